#include "m3ot/plot.hpp"

#include <cmath>
#include <iterator>
#include <map>
#include <ostream>

#include <fmt/format.h>

namespace m3ot {
namespace {

struct View {
  double center = 0.0;
  double scale = 1.0;  // px per metre
  double half = 0.0;   // metres

  // Forward (+x) is up, left (+y) is left.
  double sx(double y) const { return center - y * scale; }
  double sy(double x) const { return center - x * scale; }
};

void polyline(fmt::memory_buffer& buf, const View& v, const std::vector<GlobalPoint>& pts, std::string_view attrs) {
  fmt::format_to(std::back_inserter(buf), "<polyline {} points=\"", attrs);
  for (std::size_t i = 0; i < pts.size(); ++i)
    fmt::format_to(std::back_inserter(buf), "{}{:.2f},{:.2f}", i ? " " : "", v.sx(pts[i].y()), v.sy(pts[i].x()));
  fmt::format_to(std::back_inserter(buf), "\"/>\n");
}

}  // namespace

std::string track_color(int target_id) {
  const double hue = std::fmod(std::abs(static_cast<double>(target_id)) * 137.50776405003785, 360.0) / 60.0;
  const double s = 0.7, l = 0.42;
  const double chroma = (1.0 - std::abs(2.0 * l - 1.0)) * s;
  const double x = chroma * (1.0 - std::abs(std::fmod(hue, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue)) {
    case 0: r = chroma, g = x; break;
    case 1: r = x, g = chroma; break;
    case 2: g = chroma, b = x; break;
    case 3: g = x, b = chroma; break;
    case 4: r = x, b = chroma; break;
    default: r = chroma, b = x; break;
  }
  const double m = l - chroma / 2.0;
  auto byte = [&](double c) { return static_cast<int>(std::lround(255.0 * (c + m))); };
  return fmt::format("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b));
}

void write_svg(std::ostream& out, std::span<const TrackRecord> tracks, const Scenario* truth, const PlotOptions& opt) {
  std::map<int, std::vector<GlobalPoint>> hyp, gt;
  double reach = 0.0;
  auto add = [&](std::map<int, std::vector<GlobalPoint>>& m, int id, const GlobalPoint& p) {
    if (!p.allFinite()) return;
    m[id].push_back(p);
    reach = std::max({reach, std::abs(p.x()), std::abs(p.y())});
  };
  for (const auto& r : tracks) add(hyp, r.target_id, r.position);
  if (truth)
    for (const auto& f : truth->frames)
      for (const auto& s : f.truth)
        if (s.visible()) add(gt, s.track_id, s.position);

  View v;
  v.half = std::max(opt.min_half_extent, std::ceil(reach / opt.grid) * opt.grid);
  const double size = opt.size_px, margin = 24.0;
  v.center = size / 2.0;
  v.scale = (size / 2.0 - margin) / v.half;

  fmt::memory_buffer buf;
  auto o = std::back_inserter(buf);
  fmt::format_to(o, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
  fmt::format_to(o, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
                 opt.size_px);
  fmt::format_to(o, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
  if (!opt.title.empty())
    fmt::format_to(o, "<text x=\"{:.2f}\" y=\"16\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n", v.center,
                   opt.title);

  fmt::format_to(o, "<g class=\"grid\" stroke=\"#e0e0e0\" stroke-width=\"1\">\n");
  const int steps = static_cast<int>(std::lround(v.half / opt.grid));
  const double lo = v.center - v.half * v.scale, hi = v.center + v.half * v.scale;
  for (int k = -steps; k <= steps; ++k) {
    if (k == 0) continue;
    const double p = v.center + k * opt.grid * v.scale;
    fmt::format_to(o, "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\"/>\n", p, lo, hi);
    fmt::format_to(o, "<line x1=\"{1:.2f}\" y1=\"{0:.2f}\" x2=\"{2:.2f}\" y2=\"{0:.2f}\"/>\n", p, lo, hi);
  }
  fmt::format_to(o, "</g>\n<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n");
  fmt::format_to(o, "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\"/>\n", v.center, lo, hi);
  fmt::format_to(o, "<line x1=\"{1:.2f}\" y1=\"{0:.2f}\" x2=\"{2:.2f}\" y2=\"{0:.2f}\"/>\n", v.center, lo, hi);
  fmt::format_to(o, "</g>\n<g class=\"labels\" font-size=\"10\" fill=\"#606060\">\n");
  for (int k = -steps; k <= steps; ++k) {
    const double m = k * opt.grid;
    fmt::format_to(o, "<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", v.center + 3.0, v.sy(m) - 2.0, m);
  }
  fmt::format_to(o, "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">x [m]</text>\n", v.center - 4.0, lo + 10.0);
  fmt::format_to(o, "<text x=\"{:.2f}\" y=\"{:.2f}\">y [m]</text>\n", lo, v.center - 4.0);
  fmt::format_to(o, "</g>\n");
  // Ego vehicle, 4.5 m x 1.8 m.
  fmt::format_to(o, "<rect class=\"ego\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#303030\"/>\n",
                 v.sx(0.9), v.sy(2.25), 1.8 * v.scale, 4.5 * v.scale);

  for (const auto& [id, pts] : gt)
    polyline(buf, v, pts,
             fmt::format("class=\"truth\" data-id=\"{}\" fill=\"none\" stroke=\"#a0a0a0\" stroke-width=\"1\" "
                         "stroke-dasharray=\"4 3\"",
                         id));
  for (const auto& [id, pts] : hyp) {
    const auto color = track_color(id);
    polyline(buf, v, pts,
             fmt::format("class=\"track\" data-id=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"", id, color));
    fmt::format_to(o, "<circle class=\"head\" data-id=\"{}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\"/>\n", id,
                   v.sx(pts.back().y()), v.sy(pts.back().x()), color);
  }
  fmt::format_to(o, "</svg>\n");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace m3ot
