#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "m3ot/detection.hpp"
#include "m3ot/geometry.hpp"
#include "m3ot/scenario.hpp"

namespace m3ot {

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Sorted, unique indices into a frame's point cloud.
using PointIndexSet = std::vector<std::size_t>;

struct ProposalMember {
  std::size_t detection_index = 0;  // into the input detection list
  Detection detection;
  GlobalPoint projection = GlobalPoint::Zero();  // this detection's own projection
};

struct FusedProposal {
  std::vector<ProposalMember> members;  // at most one per camera, sorted by camera id
  GlobalPoint global_position = GlobalPoint::Zero();
  std::optional<PointIndexSet> point_indices;
  std::optional<Eigen::Vector2d> dimensions;  // (length, width)

  const ProposalMember* member_in(int camera_id) const;
  double max_score() const;
};

/// Greedy grouping: highest score first (ties by camera id, then u), every
/// remaining detection from another camera within `threshold` metres of the
/// seed joins it (nearest one per camera). Positions are member means.
std::vector<FusedProposal> fuse_by_distance(std::span<const Detection> detections,
                                            std::span<const GlobalPoint> projections, double threshold = 1.0);

/// max(|a ∩ b| / |a|, |a ∩ b| / |b|); 0 when either set is empty.
double overlap_ratio(const PointIndexSet& a, const PointIndexSet& b);

struct PointFusionParams {
  double overlap_threshold = 0.8;
  RansacParams ransac;
};

/// Point-set fusion. Cross-camera pairs whose overlap ratio reaches the
/// threshold are joined in descending ratio order, as long as the two groups
/// share no camera. The position comes from localizing the union of the
/// member sets, or the mean of `fallback_projections` when that fails.
std::vector<FusedProposal> fuse_by_pointcloud(std::span<const Detection> detections,
                                              std::span<const PointIndexSet> point_sets,
                                              std::span<const GlobalPoint> cloud,
                                              std::span<const GlobalPoint> fallback_projections,
                                              const PointFusionParams& params = {});

/// Points of the cloud (global frame) that project into the image of one camera.
struct CameraLookup {
  int camera_id = 0;
  std::vector<std::size_t> index;
  std::vector<PixelPoint> pixel;
};

CameraLookup build_lookup(std::span<const GlobalPoint> cloud, const CameraCalibration& camera);

/// Indices of the points inside `box`.
PointIndexSet points_in_box(const CameraLookup& lookup, const Box& box);

/// Ground-plane Euclidean clustering: points closer than `gap` share a label.
std::vector<int> segment_cloud(std::span<const GlobalPoint> cloud, double gap);

enum class ProjectionScheme { PointCloud, Ipm };
enum class FusionScheme { PointCloud, Distance };
enum class PointSetMode {
  /// Raw points inside each box.
  InBox,
  /// The cloud segment that best explains each box (one segment per box per camera).
  Segment,
};

const char* to_string(ProjectionScheme s);
const char* to_string(FusionScheme s);
ProjectionScheme projection_from_string(const std::string& s);
FusionScheme fusion_from_string(const std::string& s);

struct ProposalOptions {
  ProjectionScheme projection = ProjectionScheme::PointCloud;
  FusionScheme fusion = FusionScheme::PointCloud;
  PointSetMode point_sets = PointSetMode::Segment;
  double distance_threshold = 1.0;
  double segment_gap = 0.8;
  /// Minimum IoU between a box and a segment's silhouette for the segment to be assigned.
  double segment_min_iou = 0.3;
  PointFusionParams point_fusion;
};

struct FrameProposals {
  std::vector<GlobalPoint> cloud;  // global frame
  std::vector<PointIndexSet> point_sets;    // per detection, for overlap fusion
  std::vector<PointIndexSet> visible_sets;  // per detection, the part of its set inside the box
  std::vector<GlobalPoint> ipm;           // per detection, box bottom centre
  std::vector<GlobalPoint> projections;   // per detection, per the projection scheme
  std::vector<FusedProposal> proposals;
};

/// Projects and fuses one frame's detections.
FrameProposals build_proposals(const Frame& frame, const SensorRig& rig, const ProposalOptions& options = {});

struct DetectionPointSets {
  std::vector<PointIndexSet> fusion;   // per detection, under the configured mode
  std::vector<PointIndexSet> visible;  // per detection, fusion set restricted to the box
};

/// Per-detection point sets for a frame.
DetectionPointSets detection_point_sets(const Frame& frame, const SensorRig& rig, std::span<const GlobalPoint> cloud,
                                        const ProposalOptions& options);

}  // namespace m3ot
