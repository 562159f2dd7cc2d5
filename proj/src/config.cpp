#include "m3ot/config.hpp"

#include <algorithm>
#include <charconv>
#include <concepts>
#include <fstream>
#include <functional>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "m3ot/io.hpp"

namespace m3ot {
namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw InvalidConfig("config [" + where + "]: " + what);
}

template <typename Int>
Int parse_int(const std::string& s) {
  Int x = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size()) throw std::invalid_argument("expected an integer, got '" + s + "'");
  return x;
}

void parse_into(const std::string& s, double& x) {
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size()) throw std::invalid_argument("expected a number, got '" + s + "'");
}
template <typename Int>
  requires(std::integral<Int> && !std::same_as<Int, bool>)
void parse_into(const std::string& s, Int& x) {
  x = parse_int<Int>(s);
}
void parse_into(const std::string& s, std::string& x) { x = s; }
void parse_into(const std::string& s, bool& x) {
  if (s == "true" || s == "on" || s == "1") x = true;
  else if (s == "false" || s == "off" || s == "0") x = false;
  else throw std::invalid_argument("expected true/false, got '" + s + "'");
}
void parse_into(const std::string& s, ProjectionScheme& x) { x = projection_from_string(s); }
void parse_into(const std::string& s, FusionScheme& x) { x = fusion_from_string(s); }
void parse_into(const std::string& s, PointSetMode& x) {
  if (s == "segment") x = PointSetMode::Segment;
  else if (s == "in_box") x = PointSetMode::InBox;
  else throw std::invalid_argument("expected segment or in_box, got '" + s + "'");
}
void parse_into(const std::string& s, ManeuverKind& x) { x = maneuver_from_string(s); }
void parse_into(const std::string& s, std::vector<std::uint64_t>& x) {
  x.clear();
  std::string item;
  for (char ch : s + " ") {
    if (ch == ' ' || ch == ',' || ch == '\t') {
      if (!item.empty()) x.push_back(parse_int<std::uint64_t>(item));
      item.clear();
    } else {
      item.push_back(ch);
    }
  }
}

std::string show(double x) { return fmt::format("{}", x); }
template <typename Int>
  requires(std::integral<Int> && !std::same_as<Int, bool>)
std::string show(Int x) {
  return std::to_string(x);
}
std::string show(const std::string& x) { return x; }
std::string show(bool x) { return x ? "true" : "false"; }
std::string show(ProjectionScheme x) { return to_string(x); }
std::string show(FusionScheme x) { return to_string(x); }
std::string show(PointSetMode x) { return x == PointSetMode::Segment ? "segment" : "in_box"; }
std::string show(ManeuverKind x) { return to_string(x); }
std::string show(const std::vector<std::uint64_t>& x) { return fmt::format("{}", fmt::join(x, " ")); }

template <typename Object>
struct Field {
  std::string section;
  std::string key;
  std::function<void(Object&, const std::string&)> set;
  std::function<std::string(const Object&)> get;
  bool required = false;
};

/// `access` maps an object to the member's reference, const or not.
template <typename Object, typename Access>
Field<Object> field(std::string section, std::string key, Access access, bool required = false) {
  return {std::move(section), std::move(key), [access](Object& o, const std::string& s) { parse_into(s, access(o)); },
          [access](const Object& o) { return show(access(o)); }, required};
}

#define M3OT_FIELD(section, key, expr) field<RunConfig>(section, key, [](auto& c) -> auto& { return c.expr; })
#define M3OT_REQUIRED(section, key, expr) field<RunConfig>(section, key, [](auto& c) -> auto& { return c.expr; }, true)
#define M3OT_MANEUVER(key, member) field<Maneuver>("maneuver", key, [](auto& m) -> auto& { return m.member; })

const std::vector<Field<RunConfig>>& run_fields() {
  static const std::vector<Field<RunConfig>> fields{
      M3OT_REQUIRED("run", "seed", scenario.seed),
      M3OT_REQUIRED("run", "rig", scenario.rig),
      M3OT_REQUIRED("run", "projection", proposals.projection),
      M3OT_REQUIRED("run", "fusion", proposals.fusion),
      M3OT_REQUIRED("run", "global_offsets", policy.use_global_offsets),
      M3OT_FIELD("run", "calibration", calibration_path),
      M3OT_FIELD("run", "scenario", scenario_path),
      M3OT_FIELD("run", "policy", policy_path),

      M3OT_FIELD("scenario", "duration", scenario.duration),
      M3OT_FIELD("scenario", "frame_rate", scenario.frame_rate),
      M3OT_FIELD("scenario", "n_vehicles", scenario.n_vehicles),
      M3OT_FIELD("scenario", "visible_range", scenario.visible_range),
      M3OT_FIELD("scenario", "occlusion_fraction", scenario.occlusion_fraction),
      M3OT_FIELD("scenario", "lookalike_rate", scenario.lookalike_rate),
      M3OT_FIELD("scenario", "descriptor_dim", scenario.descriptor_dim),

      M3OT_FIELD("detector", "miss_rate", scenario.detector.miss_rate),
      M3OT_FIELD("detector", "false_positive_rate", scenario.detector.false_positive_rate),
      M3OT_FIELD("detector", "sigma_px", scenario.detector.sigma_px),
      M3OT_FIELD("detector", "score_base", scenario.detector.score_base),
      M3OT_FIELD("detector", "score_slope", scenario.detector.score_slope),
      M3OT_FIELD("detector", "score_sigma", scenario.detector.score_sigma),
      M3OT_FIELD("detector", "fp_score_mean", scenario.detector.fp_score_mean),
      M3OT_FIELD("detector", "fp_score_sigma", scenario.detector.fp_score_sigma),

      M3OT_FIELD("lidar", "layers", scenario.lidar.layers),
      M3OT_FIELD("lidar", "min_elevation_deg", scenario.lidar.min_elevation_deg),
      M3OT_FIELD("lidar", "max_elevation_deg", scenario.lidar.max_elevation_deg),
      M3OT_FIELD("lidar", "angular_resolution_deg", scenario.lidar.angular_resolution_deg),
      M3OT_FIELD("lidar", "range_noise_sigma", scenario.lidar.range_noise_sigma),
      M3OT_FIELD("lidar", "max_range", scenario.lidar.max_range),

      M3OT_FIELD("fusion", "point_sets", proposals.point_sets),
      M3OT_FIELD("fusion", "distance_threshold", proposals.distance_threshold),
      M3OT_FIELD("fusion", "segment_gap", proposals.segment_gap),
      M3OT_FIELD("fusion", "segment_min_iou", proposals.segment_min_iou),
      M3OT_FIELD("fusion", "overlap_threshold", proposals.point_fusion.overlap_threshold),

      M3OT_FIELD("ransac", "inlier_threshold", proposals.point_fusion.ransac.inlier_threshold),
      M3OT_FIELD("ransac", "max_iterations", proposals.point_fusion.ransac.max_iterations),
      M3OT_FIELD("ransac", "confidence", proposals.point_fusion.ransac.confidence),
      M3OT_FIELD("ransac", "primary_inlier_ratio", proposals.point_fusion.ransac.primary_inlier_ratio),
      M3OT_FIELD("ransac", "secondary_inlier_ratio", proposals.point_fusion.ransac.secondary_inlier_ratio),
      M3OT_FIELD("ransac", "min_points", proposals.point_fusion.ransac.min_points),
      M3OT_FIELD("ransac", "min_side_points", proposals.point_fusion.ransac.min_side_points),
      M3OT_FIELD("ransac", "default_length", proposals.point_fusion.ransac.default_length),
      M3OT_FIELD("ransac", "default_width", proposals.point_fusion.ransac.default_width),
      M3OT_FIELD("ransac", "min_extent", proposals.point_fusion.ransac.min_extent),
      M3OT_FIELD("ransac", "min_corner_sine", proposals.point_fusion.ransac.min_corner_sine),
      M3OT_FIELD("ransac", "seed", proposals.point_fusion.ransac.seed),

      M3OT_FIELD("policy", "C", policy.C),
      M3OT_FIELD("policy", "e0", policy.e0),
      M3OT_FIELD("policy", "o0", policy.o0),
      M3OT_FIELD("policy", "gate_lateral", policy.gate_lateral),
      M3OT_FIELD("policy", "gate_longitudinal", policy.gate_longitudinal),
      M3OT_FIELD("policy", "overlap_window", policy.overlap_window),
      M3OT_FIELD("policy", "max_lost_age", policy.max_lost_age),
      M3OT_FIELD("policy", "nms_iou", policy.nms_iou),
      M3OT_FIELD("policy", "max_epochs", policy.max_epochs),
      M3OT_FIELD("policy", "velocity_gain", policy.velocity_gain),

      M3OT_FIELD("appearance", "prediction_sigma", appearance.prediction_sigma),
      M3OT_FIELD("appearance", "fb_scale", appearance.fb_scale),
      M3OT_FIELD("appearance", "failure_floor", appearance.failure_floor),
      M3OT_FIELD("appearance", "failure_scale", appearance.failure_scale),
      M3OT_FIELD("appearance", "descriptor_noise", appearance.descriptor_noise),
      M3OT_FIELD("appearance", "lookalike_cosine", appearance.lookalike_cosine),
      M3OT_FIELD("appearance", "seed", appearance.seed),

      M3OT_FIELD("tracker", "template_cap", template_cap),
      M3OT_FIELD("tracker", "max_interpolation_gap", max_interpolation_gap),
      M3OT_FIELD("learning", "max_active_samples", max_active_samples),

      M3OT_FIELD("evaluation", "match_threshold", evaluation.match_threshold),
      M3OT_FIELD("evaluation", "mt_fraction", evaluation.mt_fraction),
      M3OT_FIELD("evaluation", "ml_fraction", evaluation.ml_fraction),

      M3OT_FIELD("ablation", "train_seeds", ablation.train_seeds),
      M3OT_FIELD("ablation", "test_seeds", ablation.test_seeds),
      M3OT_FIELD("ablation", "train_duration", ablation.train_duration),
      M3OT_FIELD("ablation", "test_duration", ablation.test_duration),
  };
  return fields;
}

const std::vector<Field<Maneuver>>& maneuver_fields() {
  static const std::vector<Field<Maneuver>> fields{
      M3OT_MANEUVER("kind", kind),
      M3OT_MANEUVER("lane", lane),
      M3OT_MANEUVER("start_x", start_x),
      M3OT_MANEUVER("speed", speed),
      M3OT_MANEUVER("sway_amplitude", sway_amplitude),
      M3OT_MANEUVER("sway_period", sway_period),
      M3OT_MANEUVER("sway_phase", sway_phase),
      M3OT_MANEUVER("target_lane", target_lane),
      M3OT_MANEUVER("change_start", change_start),
      M3OT_MANEUVER("change_duration", change_duration),
      M3OT_MANEUVER("radius", radius),
      M3OT_MANEUVER("angular_speed", angular_speed),
      M3OT_MANEUVER("phase", phase),
      M3OT_MANEUVER("length", length),
      M3OT_MANEUVER("width", width),
      M3OT_MANEUVER("height", height),
  };
  return fields;
}

#undef M3OT_FIELD
#undef M3OT_REQUIRED
#undef M3OT_MANEUVER

template <typename Object>
void apply(const std::vector<Field<Object>>& fields, const std::string& section,
           const boost::property_tree::ptree& keys, Object& obj, std::set<std::string>& seen) {
  for (const auto& [key, node] : keys) {
    if (!node.empty()) bad(section, "nested key '" + key + "'");
    auto it = std::find_if(fields.begin(), fields.end(),
                           [&](const auto& f) { return f.key == key && (f.section == section || f.section == "maneuver"); });
    if (it == fields.end()) bad(section, "unknown key '" + key + "'");
    try {
      it->set(obj, node.data());
    } catch (const std::invalid_argument& e) {
      bad(section, key + ": " + e.what());
    }
    seen.insert(key);
  }
}

}  // namespace

TrackerOptions RunConfig::tracker_options() const {
  TrackerOptions o;
  o.proposals = proposals;
  o.template_cap = template_cap;
  return o;
}

AppearanceParams RunConfig::appearance_params() const {
  AppearanceParams a = appearance;
  a.e0 = policy.e0;
  a.template_cap = template_cap;
  return a;
}

LearningOptions RunConfig::learning_options() const {
  LearningOptions o;
  o.proposals = proposals;
  o.appearance = appearance_params();
  o.template_cap = template_cap;
  o.max_active_samples = max_active_samples;
  return o;
}

SensorRig RunConfig::resolve_rig() const {
  if (!calibration_path.empty()) return load_calibration(calibration_path);
  try {
    return rig_preset(scenario.rig);
  } catch (const UnknownPreset& e) {
    throw InvalidConfig(e.what());
  }
}

void validate(const RunConfig& c) {
  validate(c.scenario);
  if (c.calibration_path.empty()) {
    const auto& names = rig_preset_names();
    if (std::find(names.begin(), names.end(), c.scenario.rig) == names.end())
      bad("run", "unknown rig preset '" + c.scenario.rig + "'");
  }
  const auto& p = c.proposals;
  if (!(p.distance_threshold > 0)) bad("fusion", "distance_threshold must be positive");
  if (!(p.segment_gap > 0)) bad("fusion", "segment_gap must be positive");
  if (!(p.segment_min_iou >= 0 && p.segment_min_iou <= 1)) bad("fusion", "segment_min_iou must lie in [0, 1]");
  if (!(p.point_fusion.overlap_threshold > 0 && p.point_fusion.overlap_threshold <= 1))
    bad("fusion", "overlap_threshold must lie in (0, 1]");
  const auto& r = p.point_fusion.ransac;
  if (!(r.inlier_threshold > 0) || r.max_iterations < 1 || !(r.confidence > 0 && r.confidence < 1) ||
      r.min_side_points < 2 || r.min_points < r.min_side_points || !(r.default_length > 0) || !(r.default_width > 0) ||
      !(r.min_corner_sine >= 0 && r.min_corner_sine <= 1))
    bad("ransac", "invalid RANSAC parameters");
  const auto& q = c.policy;
  if (!(q.C > 0)) bad("policy", "C must be positive");
  if (!(q.e0 > 0)) bad("policy", "e0 must be positive");
  if (!(q.o0 >= 0 && q.o0 <= 1)) bad("policy", "o0 must lie in [0, 1]");
  if (!(q.gate_lateral > 0) || !(q.gate_longitudinal > 0)) bad("policy", "gate extents must be positive");
  if (q.overlap_window < 1) bad("policy", "overlap_window must be >= 1");
  if (q.max_lost_age < 1) bad("policy", "max_lost_age must be >= 1");
  if (!(q.nms_iou > 0 && q.nms_iou <= 1)) bad("policy", "nms_iou must lie in (0, 1]");
  if (q.max_epochs < 1) bad("policy", "max_epochs must be >= 1");
  if (!(q.velocity_gain >= 0 && q.velocity_gain <= 1)) bad("policy", "velocity_gain must lie in [0, 1]");
  const auto& a = c.appearance;
  if (a.prediction_sigma < 0 || a.fb_scale < 0 || a.failure_floor < 0 || a.failure_scale < 0 || a.descriptor_noise < 0)
    bad("appearance", "scales must be >= 0");
  if (!(a.lookalike_cosine >= -1 && a.lookalike_cosine <= 1)) bad("appearance", "lookalike_cosine must lie in [-1, 1]");
  if (c.template_cap < 1) bad("tracker", "template_cap must be >= 1");
  if (c.max_interpolation_gap < 0) bad("tracker", "max_interpolation_gap must be >= 0");
  if (c.max_active_samples < 2) bad("learning", "max_active_samples must be >= 2");
  try {
    validate(c.evaluation);
  } catch (const std::invalid_argument& e) {
    bad("evaluation", e.what());
  }
  const auto& s = c.ablation;
  if (s.train_seeds.empty() || s.test_seeds.empty()) bad("ablation", "seed lists must be non-empty");
  if (s.train_duration < 1 || s.test_duration < 1) bad("ablation", "durations must be >= 1");
}

RunConfig read_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  RunConfig c;
  std::set<std::string> run_seen;
  std::map<int, Maneuver> maneuvers;
  std::set<std::string> sections;
  for (const auto& [name, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) bad(name, "key outside any section");
    sections.insert(name);
    std::set<std::string> seen;
    if (name.rfind("maneuver.", 0) == 0) {
      int k = 0;
      try {
        k = parse_int<int>(name.substr(9));
      } catch (const std::invalid_argument&) {
        bad(name, "maneuver sections are named maneuver.<index>");
      }
      if (k < 0) bad(name, "negative maneuver index");
      apply(maneuver_fields(), name, keys, maneuvers[k], seen);
      continue;
    }
    const auto& fields = run_fields();
    if (std::none_of(fields.begin(), fields.end(), [&](const auto& f) { return f.section == name; }))
      bad(name, "unknown section");
    apply(fields, name, keys, c, seen);
    if (name == "run") run_seen = seen;
  }
  for (const auto& f : run_fields())
    if (f.required && !run_seen.count(f.key)) bad(f.section, "missing required key '" + f.key + "'");
  int expect = 0;
  for (auto& [k, m] : maneuvers) {
    if (k != expect++) bad("maneuver." + std::to_string(expect - 1), "maneuver indices must be 0, 1, 2, ...");
    c.scenario.maneuvers.push_back(m);
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidConfig("cannot read config '" + path + "'");
  return read_config(f);
}

void write_config(std::ostream& out, const RunConfig& c) {
  fmt::memory_buffer buf;
  std::string section;
  for (const auto& f : run_fields()) {
    if (f.section != section) {
      fmt::format_to(std::back_inserter(buf), "{}[{}]\n", section.empty() ? "" : "\n", f.section);
      section = f.section;
    }
    fmt::format_to(std::back_inserter(buf), "{} = {}\n", f.key, f.get(c));
  }
  for (std::size_t k = 0; k < c.scenario.maneuvers.size(); ++k) {
    fmt::format_to(std::back_inserter(buf), "\n[maneuver.{}]\n", k);
    for (const auto& f : maneuver_fields())
      fmt::format_to(std::back_inserter(buf), "{} = {}\n", f.key, f.get(c.scenario.maneuvers[k]));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace m3ot
