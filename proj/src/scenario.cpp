#include "m3ot/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

#include "m3ot/hungarian.hpp"
#include "m3ot/random.hpp"

namespace m3ot {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kImageWidth = 1280;
constexpr int kImageHeight = 720;
constexpr double kCameraFov = 70.0 * kDeg;
constexpr double kCameraPitch = 4.0 * kDeg;
constexpr double kCameraHeight = 1.6;
constexpr double kNearPlane = 0.3;
constexpr double kWorldExtent = 100.0;

CameraCalibration ring_camera(int id, double yaw_deg) {
  const double yaw = yaw_deg * kDeg;
  // Mounted on the body outline around the car centre (1.4 m ahead of the rear axle).
  const Eigen::Vector3d mount(1.4 + 2.2 * std::cos(yaw), 0.95 * std::sin(yaw), kCameraHeight);
  return make_camera(id, yaw, kCameraPitch, mount, kCameraFov, kImageWidth, kImageHeight);
}

RangeCalibration roof_lidar() {
  RangeCalibration cal;
  cal.rotation = yaw_rotation(0.5 * kDeg);
  cal.translation = Eigen::Vector3d(1.3, 0.0, 1.9);
  return cal;
}

/// Slab test against an oriented vehicle box; returns the entry distance.
std::optional<double> ray_box(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, const TruthState& s) {
  const Eigen::Matrix3d to_box = yaw_rotation(-s.heading);
  const Eigen::Vector3d centre(s.position.x(), s.position.y(), s.position.z() + 0.5 * s.height);
  const Eigen::Vector3d o = to_box * (origin - centre);
  const Eigen::Vector3d d = to_box * dir;
  const Eigen::Vector3d half(0.5 * s.length, 0.5 * s.width, 0.5 * s.height);
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-12) {
      if (std::abs(o[k]) > half[k]) return std::nullopt;
      continue;
    }
    double a = (-half[k] - o[k]) / d[k];
    double b = (half[k] - o[k]) / d[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return std::nullopt;
  }
  if (t0 <= 1e-6) return std::nullopt;
  return t0;
}

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

std::vector<Maneuver> random_traffic(int n, Rng& rng) {
  struct LaneMotion {
    double amplitude, period, phase;
  };
  const std::vector<double> all_lanes{-2.0, -1.0, 1.0, 2.0};
  std::vector<LaneMotion> motion;
  for (std::size_t i = 0; i < all_lanes.size(); ++i)
    motion.push_back({rng.uniform(5.0, 25.0), rng.uniform(40.0, 120.0), rng.uniform(0.0, 2.0 * std::numbers::pi)});

  std::vector<Maneuver> out;
  std::vector<double> lanes = all_lanes;
  if (n >= 3 && rng.bernoulli(0.5)) {
    Maneuver cut;
    cut.kind = ManeuverKind::CutIn;
    cut.lane = rng.bernoulli(0.5) ? 1.0 : -1.0;
    cut.target_lane = 0.0;
    cut.start_x = rng.uniform(18.0, 35.0);
    const auto li = static_cast<std::size_t>(std::find(all_lanes.begin(), all_lanes.end(), cut.lane) - all_lanes.begin());
    cut.sway_amplitude = std::min(motion[li].amplitude, cut.start_x - 12.0);
    cut.sway_period = motion[li].period;
    cut.sway_phase = motion[li].phase;
    cut.change_start = rng.uniform(3.0, 15.0);
    cut.change_duration = 3.0;
    out.push_back(cut);
    lanes.erase(std::find(lanes.begin(), lanes.end(), cut.lane));
  }
  while (static_cast<int>(out.size()) < n) {
    Maneuver m;
    m.kind = ManeuverKind::LaneKeep;
    m.lane = lanes[rng.index(lanes.size())];
    const auto li = static_cast<std::size_t>(std::find(all_lanes.begin(), all_lanes.end(), m.lane) - all_lanes.begin());
    m.sway_amplitude = motion[li].amplitude;
    m.sway_period = motion[li].period;
    m.sway_phase = motion[li].phase;
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      m.start_x = rng.uniform(-45.0, 45.0);
      placed = std::none_of(out.begin(), out.end(), [&](const Maneuver& o) {
        return o.lane == m.lane && o.kind == ManeuverKind::LaneKeep && std::abs(o.start_x - m.start_x) < 12.0;
      });
    }
    if (!placed) break;  // lanes are full
    out.push_back(m);
  }
  return out;
}

struct CameraView {
  std::size_t state = 0;
  Box box;
  double distance = 0.0;
};

}  // namespace

// ---------------------------------------------------------------------------

const CameraCalibration* SensorRig::find(int camera_id) const {
  for (const auto& c : cameras)
    if (c.camera_id == camera_id) return &c;
  return nullptr;
}

const CameraCalibration& SensorRig::camera(int camera_id) const {
  if (const auto* c = find(camera_id)) return *c;
  throw std::out_of_range("camera " + std::to_string(camera_id) + " is not part of rig '" + name + "'");
}

std::vector<int> SensorRig::camera_ids() const {
  std::vector<int> ids;
  for (const auto& c : cameras) ids.push_back(c.camera_id);
  return ids;
}

const std::vector<std::string>& rig_preset_names() {
  static const std::vector<std::string> names{"2cam", "3cam", "4cam", "4cam-alt", "6cam", "8cam"};
  return names;
}

SensorRig rig_preset(const std::string& name) {
  SensorRig rig;
  rig.name = name;
  rig.range = roof_lidar();
  auto ring = [&](std::initializer_list<int> slots) {
    for (int s : slots) rig.cameras.push_back(ring_camera(s, 45.0 * s));
  };
  if (name == "2cam") {
    ring({0, 4});
  } else if (name == "3cam") {
    ring({7, 0, 1});
  } else if (name == "4cam") {
    ring({0, 2, 4, 6});
  } else if (name == "4cam-alt") {
    ring({1, 3, 5, 7});
  } else if (name == "6cam") {
    for (int k = 0; k < 6; ++k) rig.cameras.push_back(ring_camera(k, 60.0 * k));
  } else if (name == "8cam") {
    ring({0, 1, 2, 3, 4, 5, 6, 7});
  } else {
    throw UnknownPreset("unknown rig preset '" + name + "'");
  }
  std::sort(rig.cameras.begin(), rig.cameras.end(),
            [](const auto& a, const auto& b) { return a.camera_id < b.camera_id; });
  return rig;
}

const char* to_string(ManeuverKind kind) {
  switch (kind) {
    case ManeuverKind::LaneKeep: return "lane_keep";
    case ManeuverKind::Overtake: return "overtake";
    case ManeuverKind::CutIn: return "cut_in";
    case ManeuverKind::Orbit: return "orbit";
  }
  return "?";
}

ManeuverKind maneuver_from_string(const std::string& name) {
  if (name == "lane_keep") return ManeuverKind::LaneKeep;
  if (name == "overtake") return ManeuverKind::Overtake;
  if (name == "cut_in") return ManeuverKind::CutIn;
  if (name == "orbit") return ManeuverKind::Orbit;
  throw InvalidConfig("unknown maneuver '" + name + "'");
}

VehiclePose evaluate_maneuver(const Maneuver& m, double t) {
  double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;
  if (m.kind == ManeuverKind::Orbit) {
    const double theta = m.phase + m.angular_speed * t;
    x = m.radius * std::cos(theta);
    y = m.radius * std::sin(theta);
    vx = -m.radius * m.angular_speed * std::sin(theta);
    vy = m.radius * m.angular_speed * std::cos(theta);
  } else {
    const double w = 2.0 * std::numbers::pi / m.sway_period;
    x = m.start_x + m.speed * t + m.sway_amplitude * std::sin(w * t + m.sway_phase);
    vx = m.speed + m.sway_amplitude * w * std::cos(w * t + m.sway_phase);
    double lane = m.lane;
    if (m.kind == ManeuverKind::CutIn) {
      const double tau = std::clamp((t - m.change_start) / m.change_duration, 0.0, 1.0);
      const double delta = m.target_lane - m.lane;
      lane = m.lane + delta * tau * tau * (3.0 - 2.0 * tau);
      if (tau > 0.0 && tau < 1.0) vy = delta * kLaneWidth * 6.0 * tau * (1.0 - tau) / m.change_duration;
    }
    y = lane * kLaneWidth;
  }
  return {x, y, std::atan2(vy, kEgoSpeed + vx)};
}

void validate(const ScenarioConfig& c) {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (c.duration < 1) throw InvalidConfig("duration must be >= 1 frame");
  if (!(c.frame_rate > 0.0)) throw InvalidConfig("frame_rate must be positive");
  if (c.n_vehicles < 0) throw InvalidConfig("n_vehicles must be >= 0");
  if (!unit(c.detector.miss_rate) || !unit(c.detector.false_positive_rate))
    throw InvalidConfig("detector rates must lie in [0, 1]");
  if (c.detector.sigma_px < 0 || c.detector.score_sigma < 0 || c.detector.fp_score_sigma < 0)
    throw InvalidConfig("detector noise must be >= 0");
  if (c.lidar.layers < 1 || !(c.lidar.angular_resolution_deg > 0) || c.lidar.range_noise_sigma < 0 ||
      !(c.lidar.max_range > 0))
    throw InvalidConfig("invalid lidar model");
  if (!unit(c.lookalike_rate) || !unit(c.occlusion_fraction)) throw InvalidConfig("rates must lie in [0, 1]");
  if (c.descriptor_dim < 1) throw InvalidConfig("descriptor_dim must be >= 1");
  if (!(c.visible_range > 0)) throw InvalidConfig("visible_range must be positive");
  for (const auto& m : c.maneuvers) {
    if (m.kind != ManeuverKind::Orbit && !(m.sway_period > 0)) throw InvalidConfig("sway_period must be positive");
    if (m.kind == ManeuverKind::CutIn && !(m.change_duration > 0)) throw InvalidConfig("change_duration must be positive");
    if (m.kind == ManeuverKind::Orbit && !(m.radius > 0)) throw InvalidConfig("orbit radius must be positive");
  }
}

const Box* TruthState::box_in(int camera_id) const {
  for (const auto& b : boxes)
    if (b.camera_id == camera_id) return &b.box;
  return nullptr;
}

const TruthState* Frame::truth_of(int track_id) const {
  for (const auto& s : truth)
    if (s.track_id == track_id) return &s;
  return nullptr;
}

const GroundTruthTrack* Scenario::track(int track_id) const {
  for (const auto& t : tracks)
    if (t.track_id == track_id) return &t;
  return nullptr;
}

std::array<GlobalPoint, 8> vehicle_corners(const TruthState& s) {
  std::array<GlobalPoint, 8> out;
  const Eigen::Matrix3d r = yaw_rotation(s.heading);
  int k = 0;
  for (double dx : {-0.5, 0.5})
    for (double dy : {-0.5, 0.5})
      for (double z : {0.0, 1.0})
        out[k++] = s.position + r * Eigen::Vector3d(dx * s.length, dy * s.width, 0.0) + Eigen::Vector3d(0, 0, z * s.height);
  return out;
}

Scenario generate(const ScenarioConfig& config) {
  validate(config);
  return generate(config, rig_preset(config.rig));
}

Scenario generate(const ScenarioConfig& config, const SensorRig& rig) {
  validate(config);
  validate(rig.range);
  for (const auto& c : rig.cameras) validate(c);

  Scenario sc;
  sc.seed = config.seed;
  sc.frame_rate = config.frame_rate;
  sc.rig = rig;

  Rng world = Rng::substream(config.seed, 0x5eed);
  const auto maneuvers = config.maneuvers.empty() ? random_traffic(config.n_vehicles, world) : config.maneuvers;
  for (std::size_t i = 0; i < maneuvers.size(); ++i) {
    const auto& m = maneuvers[i];
    GroundTruthTrack t;
    t.track_id = static_cast<int>(i) + 1;
    t.length = m.length > 0 ? m.length : world.uniform(4.2, 4.9);
    t.width = m.width > 0 ? m.width : world.uniform(1.75, 1.95);
    t.height = m.height > 0 ? m.height : world.uniform(1.4, 1.7);
    Eigen::VectorXd e(config.descriptor_dim);
    for (int k = 0; k < e.size(); ++k) e[k] = world.normal();
    if (i > 0 && world.bernoulli(config.lookalike_rate)) {
      const auto& twin = sc.tracks[world.index(sc.tracks.size())].embedding;
      for (int k = 0; k < e.size(); ++k) e[k] = twin[k] + 0.05 * e[k];
    }
    t.embedding = e.normalized();
    sc.tracks.push_back(std::move(t));
  }

  const auto& det = config.detector;
  const Eigen::Vector3d lidar_origin = rig.range.translation;
  const int n_az = std::max(1, static_cast<int>(std::lround(360.0 / config.lidar.angular_resolution_deg)));
  const double az_step = 2.0 * std::numbers::pi / n_az;

  sc.frames.reserve(static_cast<std::size_t>(config.duration));
  for (int f = 0; f < config.duration; ++f) {
    const double t = f / config.frame_rate;
    Frame frame;
    frame.index = f;

    for (std::size_t i = 0; i < maneuvers.size(); ++i) {
      const auto pose = evaluate_maneuver(maneuvers[i], t);
      if (std::abs(pose.x) > kWorldExtent || std::abs(pose.y) > kWorldExtent) continue;
      TruthState s;
      s.track_id = sc.tracks[i].track_id;
      s.position = {pose.x, pose.y, kGroundAltitude};
      s.heading = pose.heading;
      s.length = sc.tracks[i].length;
      s.width = sc.tracks[i].width;
      s.height = sc.tracks[i].height;
      frame.truth.push_back(std::move(s));
    }

    // Camera visibility and true boxes.
    std::vector<std::vector<CameraView>> views(rig.cameras.size());
    for (std::size_t c = 0; c < rig.cameras.size(); ++c) {
      const auto& cam = rig.cameras[c];
      const Eigen::Vector3d centre = cam.center();
      std::vector<CameraView> candidates;
      for (std::size_t i = 0; i < frame.truth.size(); ++i) {
        const auto& s = frame.truth[i];
        const double dist = (s.position - centre).head<2>().norm();
        if (dist > config.visible_range) continue;
        double u0 = std::numeric_limits<double>::infinity(), v0 = u0, u1 = -u0, v1 = -u0;
        bool in_front = true;
        for (const auto& corner : vehicle_corners(s)) {
          const Eigen::Vector3d pc = global_to_camera_frame(corner, cam);
          if (pc.z() <= kNearPlane) {
            in_front = false;
            break;
          }
          const auto px = back_project_global_to_camera(corner, cam);
          u0 = std::min(u0, px->x());
          u1 = std::max(u1, px->x());
          v0 = std::min(v0, px->y());
          v1 = std::max(v1, px->y());
        }
        if (!in_front) continue;
        const Box full{u0, v0, u1 - u0, v1 - v0};
        const Box clipped = clip(full, cam.width, cam.height);
        if (clipped.w < 4.0 || clipped.h < 4.0 || clipped.area() < 0.2 * full.area()) continue;
        candidates.push_back({i, clipped, dist});
      }
      for (const auto& v : candidates) {
        const bool occluded = std::any_of(candidates.begin(), candidates.end(), [&](const CameraView& o) {
          return o.distance < v.distance && intersection_area(o.box, v.box) > config.occlusion_fraction * v.box.area();
        });
        if (!occluded) views[c].push_back(v);
      }
      for (const auto& v : views[c]) frame.truth[v.state].boxes.push_back({cam.camera_id, v.box});
    }

    // Detector.
    Rng drng = Rng::substream(config.seed, static_cast<std::uint64_t>(f), 1);
    for (std::size_t c = 0; c < rig.cameras.size(); ++c) {
      const auto& cam = rig.cameras[c];
      for (const auto& v : views[c]) {
        const bool missed = drng.bernoulli(det.miss_rate);
        const double du = drng.normal(0.0, det.sigma_px), dv = drng.normal(0.0, det.sigma_px);
        const double dw = drng.normal(0.0, det.sigma_px), dh = drng.normal(0.0, det.sigma_px);
        const double noise = drng.normal(0.0, det.score_sigma);
        if (missed) continue;
        Box b = v.box;
        if (det.sigma_px > 0.0) {
          const Eigen::Vector2d ctr = b.center() + Eigen::Vector2d(du, dv);
          b.w = std::max(2.0, b.w + dw);
          b.h = std::max(2.0, b.h + dh);
          b.u = ctr.x() - 0.5 * b.w;
          b.v = ctr.y() - 0.5 * b.h;
          b = clip(b, cam.width, cam.height);
          if (b.w < 1.0 || b.h < 1.0) continue;
        }
        const double score =
            std::clamp(det.score_base - det.score_slope * v.distance / config.visible_range + noise, 0.0, 1.0);
        frame.detections.push_back({cam.camera_id, b, score});
      }
      if (drng.bernoulli(det.false_positive_rate)) {
        Box b;
        b.w = drng.uniform(40.0, 220.0);
        b.h = b.w * drng.uniform(0.55, 0.95);
        b.u = drng.uniform(0.0, cam.width - b.w);
        b.v = drng.uniform(0.40 * cam.height, std::max(0.40 * cam.height, cam.height - b.h));
        b = clip(b, cam.width, cam.height);
        const double score = std::clamp(drng.normal(det.fp_score_mean, det.fp_score_sigma), 0.0, 1.0);
        frame.detections.push_back({cam.camera_id, b, score});
      }
    }
    std::stable_sort(frame.detections.begin(), frame.detections.end(), [](const Detection& a, const Detection& b) {
      if (a.camera_id != b.camera_id) return a.camera_id < b.camera_id;
      return a.score > b.score;
    });

    // LiDAR: ray casts against vehicle boxes only, restricted to the azimuths
    // each vehicle can occupy.
    std::vector<char> cast(static_cast<std::size_t>(n_az), 0);
    for (const auto& s : frame.truth) {
      const Eigen::Vector3d rel = back_project_global_to_range(s.position, rig.range);
      if (rel.head<2>().norm() > config.lidar.max_range + s.length) continue;
      const double mid = std::atan2(rel.y(), rel.x());
      double lo = 0.0, hi = 0.0;
      for (const auto& corner : vehicle_corners(s)) {
        const Eigen::Vector3d p = back_project_global_to_range(corner, rig.range);
        const double a = wrap_angle(std::atan2(p.y(), p.x()) - mid);
        lo = std::min(lo, a);
        hi = std::max(hi, a);
      }
      const auto first = static_cast<long>(std::floor((mid + lo) / az_step)) - 1;
      const auto last = static_cast<long>(std::ceil((mid + hi) / az_step)) + 1;
      for (long j = first; j <= last; ++j) cast[static_cast<std::size_t>(((j % n_az) + n_az) % n_az)] = 1;
    }
    Rng lrng = Rng::substream(config.seed, static_cast<std::uint64_t>(f), 2);
    const auto& lidar = config.lidar;
    for (int j = 0; j < n_az; ++j) {
      if (!cast[static_cast<std::size_t>(j)]) continue;
      const double az = j * az_step;
      for (int l = 0; l < lidar.layers; ++l) {
        const double el =
            (lidar.layers == 1 ? lidar.min_elevation_deg
                               : lidar.min_elevation_deg +
                                     (lidar.max_elevation_deg - lidar.min_elevation_deg) * l / (lidar.layers - 1)) *
            kDeg;
        const Eigen::Vector3d dir_range(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
        const Eigen::Vector3d dir = rig.range.rotation * dir_range;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : frame.truth)
          if (auto hit = ray_box(lidar_origin, dir, s)) best = std::min(best, *hit);
        if (best > lidar.max_range) continue;
        const double r = best + lrng.truncated_normal(lidar.range_noise_sigma);
        frame.point_cloud.push_back(r * dir_range);
      }
    }
    sc.frames.push_back(std::move(frame));
  }
  return sc;
}

std::vector<int> label_detections(const Frame& frame, double min_iou) {
  std::vector<int> labels(frame.detections.size(), -1);
  std::vector<int> cameras;
  for (const auto& d : frame.detections)
    if (std::find(cameras.begin(), cameras.end(), d.camera_id) == cameras.end()) cameras.push_back(d.camera_id);
  for (int cam : cameras) {
    std::vector<std::size_t> dets;
    for (std::size_t i = 0; i < frame.detections.size(); ++i)
      if (frame.detections[i].camera_id == cam) dets.push_back(i);
    std::vector<std::pair<int, const Box*>> truth;
    for (const auto& s : frame.truth)
      if (const Box* b = s.box_in(cam)) truth.emplace_back(s.track_id, b);
    if (truth.empty()) continue;
    Eigen::MatrixXd score(static_cast<Eigen::Index>(dets.size()), static_cast<Eigen::Index>(truth.size()));
    for (std::size_t i = 0; i < dets.size(); ++i)
      for (std::size_t j = 0; j < truth.size(); ++j) {
        const double o = iou(frame.detections[dets[i]].box, *truth[j].second);
        score(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = o >= min_iou ? o : kForbidden;
      }
    for (const auto& [i, j] : hungarian(score).pairs) labels[dets[static_cast<std::size_t>(i)]] = truth[static_cast<std::size_t>(j)].first;
  }
  return labels;
}

}  // namespace m3ot
