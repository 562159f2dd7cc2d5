#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "m3ot/appearance.hpp"
#include "m3ot/fusion.hpp"
#include "m3ot/scenario.hpp"
#include "m3ot/svm.hpp"
#include "m3ot/target.hpp"

namespace m3ot {

class GateViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr Eigen::Index kActiveDim = 5;
inline constexpr Eigen::Index kAssociationDim = 14;

struct PolicyParams {
  double C = 1.0;
  double e0 = 10.0;  // px, FB-error stability threshold
  double o0 = 0.5;   // mean-overlap threshold
  double gate_lateral = 4.0;        // m
  double gate_longitudinal = 12.0;  // m
  std::size_t overlap_window = 5;
  int max_lost_age = 50;  // frames in Lost before Inactive
  double nms_iou = 0.5;
  bool use_global_offsets = true;
  int max_epochs = 50;
  /// Smoothing factor of the per-frame velocity estimate.
  double velocity_gain = 0.3;
};

/// One Active and one Lost classifier per camera.
struct PolicySet {
  PolicyParams params;
  std::map<int, LinearClassifier> active;
  std::map<int, LinearClassifier> lost;

  /// Accept-all Active prior (w = 0, b = 1) and reject-all Lost prior (w = 0, b = -1).
  static PolicySet initial(const SensorRig& rig, const PolicyParams& params = {});

  const LinearClassifier& active_for(int camera_id) const;
  const LinearClassifier& lost_for(int camera_id) const;

  friend bool operator==(const PolicySet& a, const PolicySet& b) {
    return a.active == b.active && a.lost == b.lost;
  }
};

/// (u/W, v/H, w/W, h/H, score), clamped to [0, 1].
Eigen::VectorXd active_feature(const Detection& det, const CameraCalibration& camera);

enum class ActiveAction { Track, Reject };  // a1, a2
enum class TrackedAction { Stay, Lose };    // a3, a4
enum class LostAction { Stay, Associate };  // a5, a6

double active_reward(const Eigen::VectorXd& feature, const LinearClassifier& cls, ActiveAction action);

/// Per-view tracking evidence: median FB error and mean overlap.
struct ViewSignal {
  double fb_error = 0.0;
  double overlap = 0.0;
};

/// Componentwise gate: |dy| <= lateral and |dx| <= longitudinal.
bool within_gate(const GlobalPoint& last, const GlobalPoint& current, const PolicyParams& params);

/// True when some view has fb_error < e0 and overlap > o0 and the position is inside the gate.
bool keeps_tracking(std::span<const ViewSignal> views, const GlobalPoint& last, const GlobalPoint& current,
                    const PolicyParams& params);

/// +1 / -1 per the tracking decision and the chosen action.
double tracked_reward(std::span<const ViewSignal> views, const GlobalPoint& last, const GlobalPoint& current,
                      const PolicyParams& params, TrackedAction action);

/// Inputs to the association features that come from outside the target.
struct AssociationContext {
  int frame = 0;
  const CameraCalibration* camera = nullptr;  // the detection's camera
  const AppearanceChannel* channel = nullptr;
};

/// The 14 association features of a (lost target, detection) pair. The
/// detection belongs to `proposal`, whose fused position must lie inside the
/// target's gate.
Eigen::VectorXd association_feature(const Target& target, const FusedProposal& proposal, const ProposalMember& member,
                                    const AssociationContext& ctx, const PolicyParams& params);

struct AssociationCandidate {
  int camera_id = 0;
  Eigen::VectorXd feature;
};

struct LostScore {
  /// y(a) times the best classifier score; y(a) * -inf without candidates.
  double value = 0.0;
  std::optional<std::size_t> argmax;
};

LostScore lost_reward(std::span<const AssociationCandidate> candidates, const PolicySet& policy, LostAction action);

}  // namespace m3ot
