#include "m3ot/io.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string_view>

#include <fmt/format.h>

namespace m3ot {
namespace {

using Buffer = fmt::memory_buffer;

void flush(std::ostream& out, Buffer& buf) {
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  buf.clear();
}

void put(Buffer& buf, double x) { fmt::format_to(std::back_inserter(buf), " {}", x); }

template <typename Derived>
void put_all(Buffer& buf, const Eigen::DenseBase<Derived>& m) {
  // Row-major, whatever the storage order.
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put(buf, m(r, c));
}

void put_box(Buffer& buf, const Box& b) {
  put(buf, b.u);
  put(buf, b.v);
  put(buf, b.w);
  put(buf, b.h);
}

void magic(Buffer& buf, std::string_view kind) { fmt::format_to(std::back_inserter(buf), "# m3ot {} v1\n", kind); }

/// Tokenized, line-numbered access to a text file of tagged records.
class Reader {
 public:
  Reader(std::istream& in, std::string_view kind) : in_(in), kind_(kind) {
    std::string first;
    if (!std::getline(in_, first)) throw ParseError(fmt::format("empty input, expected a {} file", kind_));
    line_ = 1;
    while (!first.empty() && (first.back() == '\r' || first.back() == ' ')) first.pop_back();
    if (first != fmt::format("# m3ot {} v1", kind_))
      throw ParseError(fmt::format("line 1: not a version-1 {} file", kind_));
  }

  /// Advances to the next record; false at end of input.
  bool next() {
    while (std::getline(in_, text_)) {
      ++line_;
      tokens_.clear();
      std::string_view s(text_);
      std::size_t i = 0;
      while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
        if (i > start) tokens_.push_back(s.substr(start, i - start));
      }
      if (tokens_.empty() || tokens_.front().front() == '#') continue;
      pos_ = 0;
      return true;
    }
    if (in_.bad()) throw ParseError(fmt::format("{} file: read error after line {}", kind_, line_));
    return false;
  }

  std::size_t size() const { return tokens_.size(); }
  std::string_view token(std::size_t i) const { return tokens_.at(i); }
  std::size_t remaining() const { return tokens_.size() - pos_; }

  std::string_view word() {
    need(1);
    return tokens_[pos_++];
  }

  double real() {
    const auto t = word();
    double x = 0.0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || end != t.data() + t.size()) fail(fmt::format("bad number '{}'", t));
    return x;
  }

  template <typename Int>
  Int integer() {
    const auto t = word();
    Int x = 0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || end != t.data() + t.size()) fail(fmt::format("bad integer '{}'", t));
    return x;
  }

  int count() {
    const int n = integer<int>();
    if (n < 0) fail("negative count");
    return n;
  }

  bool flag() {
    const int f = integer<int>();
    if (f != 0 && f != 1) fail("flag must be 0 or 1");
    return f == 1;
  }

  template <typename Derived>
  void fill(Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = real();
  }

  Box box() {
    Box b;
    b.u = real();
    b.v = real();
    b.w = real();
    b.h = real();
    return b;
  }

  void done() {
    if (pos_ != tokens_.size()) fail(fmt::format("{} unexpected trailing fields", tokens_.size() - pos_));
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(fmt::format("{} file, line {}: {}", kind_, line_, what));
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > tokens_.size()) fail("too few fields");
  }

  std::istream& in_;
  std::string kind_;
  std::string text_;
  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 0;
  int line_ = 0;
};

void put_rig(Buffer& buf, const SensorRig& rig) {
  fmt::format_to(std::back_inserter(buf), "# rig name\nrig {}\n", rig.name.empty() ? "-" : rig.name);
  fmt::format_to(std::back_inserter(buf), "# range rotation[9] translation[3]\nrange");
  put_all(buf, rig.range.rotation);
  put_all(buf, rig.range.translation.transpose());
  fmt::format_to(std::back_inserter(buf),
                 "\n# camera id width height intrinsics[9] rotation[9] translation[3] ipm_homography[9]\n");
  for (const auto& c : rig.cameras) {
    fmt::format_to(std::back_inserter(buf), "camera {} {} {}", c.camera_id, c.width, c.height);
    put_all(buf, c.intrinsics);
    put_all(buf, c.rotation);
    put_all(buf, c.translation.transpose());
    put_all(buf, c.ipm_homography);
    buf.push_back('\n');
  }
}

/// Collects rig records; returns false for tags it does not own.
struct RigParser {
  SensorRig rig;
  bool named = false;
  bool ranged = false;

  bool consume(Reader& r, std::string_view tag) {
    if (tag == "rig") {
      if (named) r.fail("duplicate rig record");
      const auto name = r.word();
      rig.name = name == "-" ? std::string() : std::string(name);
      named = true;
    } else if (tag == "range") {
      if (ranged) r.fail("duplicate range record");
      r.fill(rig.range.rotation);
      Eigen::RowVector3d t;
      r.fill(t);
      rig.range.translation = t.transpose();
      ranged = true;
    } else if (tag == "camera") {
      CameraCalibration c;
      c.camera_id = r.integer<int>();
      c.width = r.integer<int>();
      c.height = r.integer<int>();
      if (c.width <= 0 || c.height <= 0) r.fail("camera image size must be positive");
      r.fill(c.intrinsics);
      r.fill(c.rotation);
      Eigen::RowVector3d t;
      r.fill(t);
      c.translation = t.transpose();
      r.fill(c.ipm_homography);
      if (rig.find(c.camera_id)) r.fail(fmt::format("duplicate camera {}", c.camera_id));
      rig.cameras.push_back(c);
    } else {
      return false;
    }
    r.done();
    return true;
  }

  void finish(Reader& r) const {
    if (!named) r.fail("missing rig record");
    if (!ranged) r.fail("missing range record");
    if (rig.cameras.empty()) r.fail("no camera records");
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read '" + path + "'");
  return f;
}

void close_out(std::ofstream& f, const std::string& path) {
  f.close();
  if (!f) throw std::runtime_error("error writing '" + path + "'");
}

}  // namespace

void write_calibration(std::ostream& out, const SensorRig& rig) {
  Buffer buf;
  magic(buf, "calibration");
  put_rig(buf, rig);
  flush(out, buf);
}

SensorRig read_calibration(std::istream& in) {
  Reader r(in, "calibration");
  RigParser rig;
  while (r.next()) {
    const auto tag = r.word();
    if (!rig.consume(r, tag)) r.fail(fmt::format("unknown record '{}'", tag));
  }
  rig.finish(r);
  return rig.rig;
}

void write_scenario(std::ostream& out, const Scenario& sc) {
  Buffer buf;
  magic(buf, "scenario");
  fmt::format_to(std::back_inserter(buf), "# scenario seed frame_rate frames vehicles\nscenario {}", sc.seed);
  put(buf, sc.frame_rate);
  fmt::format_to(std::back_inserter(buf), " {} {}\n", sc.frames.size(), sc.tracks.size());
  put_rig(buf, sc.rig);
  fmt::format_to(std::back_inserter(buf), "# vehicle track_id length width height dim embedding[dim]\n");
  for (const auto& t : sc.tracks) {
    fmt::format_to(std::back_inserter(buf), "vehicle {}", t.track_id);
    put(buf, t.length);
    put(buf, t.width);
    put(buf, t.height);
    fmt::format_to(std::back_inserter(buf), " {}", t.embedding.size());
    put_all(buf, t.embedding.transpose());
    buf.push_back('\n');
  }
  fmt::format_to(std::back_inserter(buf),
                 "# frame index\n"
                 "# det frame camera_id u v w h score\n"
                 "# pt frame x y z\n"
                 "# truth frame track_id x y z heading length width height boxes [camera_id u v w h]...\n");
  flush(out, buf);
  for (const auto& f : sc.frames) {
    fmt::format_to(std::back_inserter(buf), "frame {}\n", f.index);
    for (const auto& d : f.detections) {
      fmt::format_to(std::back_inserter(buf), "det {} {}", f.index, d.camera_id);
      put_box(buf, d.box);
      put(buf, d.score);
      buf.push_back('\n');
    }
    for (const auto& p : f.point_cloud) {
      fmt::format_to(std::back_inserter(buf), "pt {}", f.index);
      put_all(buf, p.transpose());
      buf.push_back('\n');
    }
    for (const auto& s : f.truth) {
      fmt::format_to(std::back_inserter(buf), "truth {} {}", f.index, s.track_id);
      put_all(buf, s.position.transpose());
      put(buf, s.heading);
      put(buf, s.length);
      put(buf, s.width);
      put(buf, s.height);
      fmt::format_to(std::back_inserter(buf), " {}", s.boxes.size());
      for (const auto& b : s.boxes) {
        fmt::format_to(std::back_inserter(buf), " {}", b.camera_id);
        put_box(buf, b.box);
      }
      buf.push_back('\n');
    }
    flush(out, buf);
  }
}

Scenario read_scenario(std::istream& in) {
  Reader r(in, "scenario");
  Scenario sc;
  RigParser rig;
  bool header = false;
  std::size_t n_frames = 0, n_vehicles = 0;
  Frame* frame = nullptr;

  auto frame_column = [&] {
    const int idx = r.integer<int>();
    if (!frame) r.fail("record before the first frame record");
    if (idx != frame->index) r.fail(fmt::format("record for frame {} inside frame {}", idx, frame->index));
  };

  while (r.next()) {
    const auto tag = r.word();
    if (!header) {
      if (tag != "scenario") r.fail("expected the scenario record first");
      sc.seed = r.integer<std::uint64_t>();
      sc.frame_rate = r.real();
      n_frames = static_cast<std::size_t>(r.count());
      n_vehicles = static_cast<std::size_t>(r.count());
      r.done();
      header = true;
      continue;
    }
    if (tag == "det") {
      frame_column();
      Detection d;
      d.camera_id = r.integer<int>();
      d.box = r.box();
      d.score = r.real();
      r.done();
      frame->detections.push_back(d);
    } else if (tag == "pt") {
      frame_column();
      Eigen::RowVector3d p;
      r.fill(p);
      r.done();
      frame->point_cloud.push_back(p.transpose());
    } else if (tag == "truth") {
      frame_column();
      TruthState s;
      s.track_id = r.integer<int>();
      Eigen::RowVector3d p;
      r.fill(p);
      s.position = p.transpose();
      s.heading = r.real();
      s.length = r.real();
      s.width = r.real();
      s.height = r.real();
      const int nb = r.count();
      for (int k = 0; k < nb; ++k) {
        CameraBox cb;
        cb.camera_id = r.integer<int>();
        cb.box = r.box();
        s.boxes.push_back(cb);
      }
      r.done();
      frame->truth.push_back(std::move(s));
    } else if (tag == "frame") {
      const int idx = r.integer<int>();
      r.done();
      if (frame && idx <= frame->index) r.fail("frame indices must increase");
      if (sc.frames.size() == n_frames) r.fail("more frames than declared");
      sc.frames.emplace_back().index = idx;
      frame = &sc.frames.back();
    } else if (tag == "vehicle") {
      if (frame) r.fail("vehicle record after the first frame");
      GroundTruthTrack t;
      t.track_id = r.integer<int>();
      t.length = r.real();
      t.width = r.real();
      t.height = r.real();
      t.embedding.resize(r.count());
      Eigen::Map<Eigen::RowVectorXd> e(t.embedding.data(), t.embedding.size());
      r.fill(e);
      r.done();
      if (sc.track(t.track_id)) r.fail(fmt::format("duplicate vehicle {}", t.track_id));
      sc.tracks.push_back(std::move(t));
    } else if (frame || !rig.consume(r, tag)) {
      r.fail(fmt::format("unexpected record '{}'", tag));
    }
  }
  if (!header) r.fail("missing scenario record");
  rig.finish(r);
  if (sc.frames.size() != n_frames)
    r.fail(fmt::format("truncated: {} of {} frames", sc.frames.size(), n_frames));
  if (sc.tracks.size() != n_vehicles)
    r.fail(fmt::format("{} vehicle records, {} declared", sc.tracks.size(), n_vehicles));
  sc.rig = std::move(rig.rig);
  for (const auto& f : sc.frames) {
    for (const auto& d : f.detections)
      if (!sc.rig.find(d.camera_id)) r.fail(fmt::format("frame {}: detection from unknown camera {}", f.index, d.camera_id));
    for (const auto& s : f.truth)
      if (!sc.track(s.track_id)) r.fail(fmt::format("frame {}: truth for unknown vehicle {}", f.index, s.track_id));
  }
  return sc;
}

void write_policy(std::ostream& out, const PolicySet& policy) {
  Buffer buf;
  magic(buf, "policy");
  const auto& p = policy.params;
  fmt::format_to(std::back_inserter(buf), "policy 1\n");
  fmt::format_to(std::back_inserter(buf),
                 "# params C e0 o0 gate_lateral gate_longitudinal overlap_window max_lost_age nms_iou "
                 "use_global_offsets max_epochs velocity_gain\nparams");
  put(buf, p.C);
  put(buf, p.e0);
  put(buf, p.o0);
  put(buf, p.gate_lateral);
  put(buf, p.gate_longitudinal);
  fmt::format_to(std::back_inserter(buf), " {} {}", p.overlap_window, p.max_lost_age);
  put(buf, p.nms_iou);
  fmt::format_to(std::back_inserter(buf), " {} {}", p.use_global_offsets ? 1 : 0, p.max_epochs);
  put(buf, p.velocity_gain);
  fmt::format_to(std::back_inserter(buf), "\n# active|lost camera_id bias dim weights[dim]\n");
  auto classifiers = [&](std::string_view tag, const std::map<int, LinearClassifier>& m) {
    for (const auto& [id, cls] : m) {
      fmt::format_to(std::back_inserter(buf), "{} {}", tag, id);
      put(buf, cls.bias);
      fmt::format_to(std::back_inserter(buf), " {}", cls.weights.size());
      put_all(buf, cls.weights.transpose());
      buf.push_back('\n');
    }
  };
  classifiers("active", policy.active);
  classifiers("lost", policy.lost);
  flush(out, buf);
}

PolicySet read_policy(std::istream& in) {
  Reader r(in, "policy");
  PolicySet ps;
  bool version = false, params = false;
  while (r.next()) {
    const auto tag = r.word();
    if (!version) {
      if (tag != "policy") r.fail("expected the policy version record first");
      const int v = r.integer<int>();
      if (v != 1) r.fail(fmt::format("unsupported policy version {}", v));
      r.done();
      version = true;
    } else if (tag == "params") {
      if (params) r.fail("duplicate params record");
      auto& p = ps.params;
      p.C = r.real();
      p.e0 = r.real();
      p.o0 = r.real();
      p.gate_lateral = r.real();
      p.gate_longitudinal = r.real();
      p.overlap_window = r.integer<std::size_t>();
      p.max_lost_age = r.integer<int>();
      p.nms_iou = r.real();
      p.use_global_offsets = r.flag();
      p.max_epochs = r.integer<int>();
      p.velocity_gain = r.real();
      r.done();
      params = true;
    } else if (tag == "active" || tag == "lost") {
      const int id = r.integer<int>();
      LinearClassifier cls;
      cls.bias = r.real();
      const int dim = r.count();
      const Eigen::Index want = tag == "active" ? kActiveDim : kAssociationDim;
      if (dim != want) r.fail(fmt::format("{} classifier needs {} weights, got {}", tag, want, dim));
      cls.weights.resize(dim);
      Eigen::Map<Eigen::RowVectorXd> w(cls.weights.data(), dim);
      r.fill(w);
      r.done();
      auto& m = tag == "active" ? ps.active : ps.lost;
      if (!m.emplace(id, std::move(cls)).second) r.fail(fmt::format("duplicate {} classifier for camera {}", tag, id));
    } else {
      r.fail(fmt::format("unknown record '{}'", tag));
    }
  }
  if (!version) r.fail("missing policy version record");
  if (!params) r.fail("missing params record");
  for (const auto& [id, cls] : ps.active)
    if (!ps.lost.count(id)) r.fail(fmt::format("camera {} has an active but no lost classifier", id));
  if (ps.active.size() != ps.lost.size()) r.fail("active and lost classifiers cover different cameras");
  return ps;
}

void write_tracks(std::ostream& out, std::span<const TrackRecord> records) {
  Buffer buf;
  magic(buf, "tracks");
  fmt::format_to(std::back_inserter(buf), "# frame target_id x y z camera_id u v w h state_code interpolated_flag\n");
  fmt::format_to(std::back_inserter(buf), "# state_code 0 active, 1 tracked, 2 lost, 3 inactive; camera_id -1 when no box\n");
  auto line = [&](const TrackRecord& rec, int camera, const Box& box) {
    fmt::format_to(std::back_inserter(buf), "{} {}", rec.frame, rec.target_id);
    put_all(buf, rec.position.transpose());
    fmt::format_to(std::back_inserter(buf), " {}", camera);
    put_box(buf, box);
    fmt::format_to(std::back_inserter(buf), " {} {}\n", static_cast<int>(rec.state), rec.interpolated ? 1 : 0);
  };
  for (const auto& rec : records) {
    if (rec.boxes.empty()) line(rec, -1, Box{});
    for (const auto& b : rec.boxes) line(rec, b.camera_id, b.box);
    if (buf.size() > (1u << 16)) flush(out, buf);
  }
  flush(out, buf);
}

std::vector<TrackRecord> read_tracks(std::istream& in) {
  Reader r(in, "tracks");
  std::vector<TrackRecord> out;
  bool open = false;  // the last record may still take boxes
  while (r.next()) {
    TrackRecord rec;
    rec.frame = r.integer<int>();
    rec.target_id = r.integer<int>();
    Eigen::RowVector3d p;
    r.fill(p);
    rec.position = p.transpose();
    const int camera = r.integer<int>();
    const Box box = r.box();
    const int state = r.integer<int>();
    if (state < 0 || state > 3) r.fail(fmt::format("bad state code {}", state));
    rec.state = static_cast<TargetState>(state);
    rec.interpolated = r.flag();
    r.done();
    if (camera >= 0) rec.boxes.push_back({camera, box});

    if (open && out.back().frame == rec.frame && out.back().target_id == rec.target_id) {
      auto& prev = out.back();
      if (camera < 0 || prev.position != rec.position || prev.state != rec.state || prev.interpolated != rec.interpolated)
        r.fail(fmt::format("inconsistent lines for target {} in frame {}", rec.target_id, rec.frame));
      for (const auto& b : prev.boxes)
        if (b.camera_id == camera) r.fail(fmt::format("two boxes in camera {}", camera));
      prev.boxes.push_back({camera, box});
      continue;
    }
    if (!out.empty() && rec.frame < out.back().frame) r.fail("frames must not decrease");
    out.push_back(std::move(rec));
    open = camera >= 0;
  }
  return out;
}

void write_report(std::ostream& out, const EvalReport& rep) {
  Buffer buf;
  magic(buf, "evaluation");
  fmt::format_to(std::back_inserter(buf), "# metric value\n");
  auto real = [&](std::string_view k, double v) { fmt::format_to(std::back_inserter(buf), "{:<16} {:.6f}\n", k, v); };
  auto whole = [&](std::string_view k, long v) { fmt::format_to(std::back_inserter(buf), "{:<16} {}\n", k, v); };
  real("MOTA", rep.mota);
  real("MOTP", rep.motp);
  real("MT", rep.mt);
  real("ML", rep.ml);
  whole("IDS", rep.ids);
  whole("truth", rep.truth);
  whole("matches", rep.matches);
  whole("misses", rep.misses);
  whole("false_positives", rep.false_positives);
  whole("tracks", rep.tracks);
  whole("mostly_tracked", rep.mostly_tracked);
  whole("mostly_lost", rep.mostly_lost);
  whole("frames", static_cast<long>(rep.frames.size()));
  flush(out, buf);
}

void save_scenario(const std::string& path, const Scenario& scenario) {
  auto f = open_out(path);
  write_scenario(f, scenario);
  close_out(f, path);
}

Scenario load_scenario(const std::string& path) {
  auto f = open_in(path);
  return read_scenario(f);
}

void save_calibration(const std::string& path, const SensorRig& rig) {
  auto f = open_out(path);
  write_calibration(f, rig);
  close_out(f, path);
}

SensorRig load_calibration(const std::string& path) {
  auto f = open_in(path);
  return read_calibration(f);
}

void save_policy(const std::string& path, const PolicySet& policy) {
  auto f = open_out(path);
  write_policy(f, policy);
  close_out(f, path);
}

PolicySet load_policy(const std::string& path) {
  auto f = open_in(path);
  return read_policy(f);
}

void save_tracks(const std::string& path, std::span<const TrackRecord> records) {
  auto f = open_out(path);
  write_tracks(f, records);
  close_out(f, path);
}

std::vector<TrackRecord> load_tracks(const std::string& path) {
  auto f = open_in(path);
  return read_tracks(f);
}

}  // namespace m3ot
