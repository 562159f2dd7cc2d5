#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "m3ot/detection.hpp"
#include "m3ot/geometry.hpp"

namespace m3ot {

class InvalidConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownPreset : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SensorRig {
  std::string name;
  RangeCalibration range;
  std::vector<CameraCalibration> cameras;

  const CameraCalibration* find(int camera_id) const;
  const CameraCalibration& camera(int camera_id) const;
  std::vector<int> camera_ids() const;

  friend bool operator==(const SensorRig&, const SensorRig&) = default;
};

/// Names accepted by rig_preset().
const std::vector<std::string>& rig_preset_names();

/// Camera layouts used for the camera-count experiments. All presets are
/// subsets or re-spacings of a ring of 70-degree cameras around the ego car:
///   2cam      front + rear, no overlap
///   3cam      front, front-left, front-right, 25 deg overlaps
///   4cam      front, left, rear, right, blind gaps between views
///   4cam-alt  the four diagonal views, blind gaps front/rear/sides
///   6cam      60 deg spacing, 10 deg overlaps, full surround
///   8cam      45 deg spacing, 25 deg overlaps, full surround
SensorRig rig_preset(const std::string& name);

// ---------------------------------------------------------------------------
// World model

enum class ManeuverKind { LaneKeep, Overtake, CutIn, Orbit };

const char* to_string(ManeuverKind kind);
ManeuverKind maneuver_from_string(const std::string& name);

/// Parametric trajectory relative to the (moving) ego vehicle.
struct Maneuver {
  ManeuverKind kind = ManeuverKind::LaneKeep;
  double lane = 1.0;            // lateral lane index, positive to the left
  double start_x = 20.0;        // longitudinal position at t = 0 (m)
  double speed = 0.0;           // relative longitudinal drift (m/s)
  double sway_amplitude = 0.0;  // longitudinal oscillation (m)
  double sway_period = 60.0;    // s
  double sway_phase = 0.0;      // rad
  double target_lane = 0.0;     // cut-in
  double change_start = 5.0;    // s
  double change_duration = 3.0; // s
  double radius = 14.0;         // orbit (m)
  double angular_speed = 0.07;  // orbit (rad/s, positive counter-clockwise)
  double phase = 0.0;           // orbit start angle (rad)
  double length = 0.0;          // 0 -> sampled
  double width = 0.0;
  double height = 0.0;
};

struct VehiclePose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

inline constexpr double kLaneWidth = 3.7;
inline constexpr double kEgoSpeed = 25.0;

VehiclePose evaluate_maneuver(const Maneuver& m, double t);

struct DetectorModel {
  double miss_rate = 0.05;
  double false_positive_rate = 0.05;  // per camera per frame
  double sigma_px = 2.0;              // box centre/size noise
  double score_base = 0.95;
  double score_slope = 0.4;
  double score_sigma = 0.05;
  double fp_score_mean = 0.35;
  double fp_score_sigma = 0.15;
};

struct LidarModel {
  int layers = 16;
  double min_elevation_deg = -15.0;
  double max_elevation_deg = 15.0;
  double angular_resolution_deg = 0.4;
  double range_noise_sigma = 0.02;  // m, truncated at 3 sigma
  double max_range = 80.0;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int duration = 1800;      // frames
  double frame_rate = 10.0; // Hz
  std::string rig = "8cam";
  int n_vehicles = 6;
  /// When non-empty, used instead of randomly generated traffic.
  std::vector<Maneuver> maneuvers;
  DetectorModel detector;
  LidarModel lidar;
  double visible_range = 60.0;     // m, camera detection range
  double occlusion_fraction = 0.7; // covered area beyond which a vehicle is hidden
  double lookalike_rate = 0.2;     // probability a vehicle copies another's appearance
  int descriptor_dim = 16;
};

void validate(const ScenarioConfig& config);

struct TruthState {
  int track_id = 0;
  GlobalPoint position = GlobalPoint::Zero();  // footprint centre, z on the ground
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  std::vector<CameraBox> boxes;  // cameras in which the vehicle is visible

  bool visible() const { return !boxes.empty(); }
  const Box* box_in(int camera_id) const;

  friend bool operator==(const TruthState&, const TruthState&) = default;
};

/// Static per-vehicle data; the per-frame poses live in Frame::truth.
struct GroundTruthTrack {
  int track_id = 0;
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  Eigen::VectorXd embedding;  // synthetic appearance signature

  friend bool operator==(const GroundTruthTrack& a, const GroundTruthTrack& b) {
    return a.track_id == b.track_id && a.length == b.length && a.width == b.width && a.height == b.height &&
           a.embedding.size() == b.embedding.size() && a.embedding == b.embedding;
  }
};

struct Frame {
  int index = 0;
  std::vector<Detection> detections;        // sorted by (camera_id, score desc)
  std::vector<Eigen::Vector3d> point_cloud; // range frame
  std::vector<TruthState> truth;

  const TruthState* truth_of(int track_id) const;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct Scenario {
  std::uint64_t seed = 0;
  double frame_rate = 10.0;
  SensorRig rig;
  std::vector<GroundTruthTrack> tracks;
  std::vector<Frame> frames;

  const GroundTruthTrack* track(int track_id) const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Deterministic synthetic world: identical configs give identical scenarios.
Scenario generate(const ScenarioConfig& config);
/// Same, with an explicit rig (e.g. loaded from a calibration file).
Scenario generate(const ScenarioConfig& config, const SensorRig& rig);

/// One-to-one labelling of a frame's detections with truth track ids
/// (per camera, maximal total IoU among pairs with IoU >= min_iou); -1 for
/// false positives.
std::vector<int> label_detections(const Frame& frame, double min_iou = 0.5);

/// Corners of a vehicle's 3-D box in the global frame.
std::array<GlobalPoint, 8> vehicle_corners(const TruthState& s);

}  // namespace m3ot
