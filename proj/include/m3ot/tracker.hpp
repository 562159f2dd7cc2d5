#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "m3ot/appearance.hpp"
#include "m3ot/fusion.hpp"
#include "m3ot/policy.hpp"
#include "m3ot/scenario.hpp"
#include "m3ot/target.hpp"

namespace m3ot {

class OutOfOrderFrame : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrackRecord {
  int frame = 0;
  int target_id = 0;
  GlobalPoint position = GlobalPoint::Zero();
  std::vector<CameraBox> boxes;
  TargetState state = TargetState::Tracked;
  /// Filled in by the gap post-pass, not observed.
  bool interpolated = false;

  friend bool operator==(const TrackRecord&, const TrackRecord&) = default;
};

struct Transition {
  int frame = 0;
  int target_id = 0;
  TargetState from = TargetState::Active;
  TargetState to = TargetState::Active;
};

struct TrackerOptions {
  ProposalOptions proposals;
  std::size_t template_cap = 10;
};

/// Everything a frame's MDP decisions read.
struct FrameContext {
  FrameContext(const Frame& frame, const FrameProposals& proposals, const SensorRig& rig,
               const AppearanceChannel& channel, const PolicySet& policy, std::size_t template_cap);

  const Frame* frame;
  const FrameProposals* proposals;
  const SensorRig* rig;
  const AppearanceChannel* channel;
  const PolicySet* policy;
  std::size_t template_cap;
  /// Proposal index holding each detection.
  std::vector<std::size_t> proposal_of;
};

struct TrackedStep {
  bool stay = false;
  /// Detections the target took this frame.
  std::vector<std::size_t> used;
};

/// Tracked-state policy for one target: template tracking in each active view,
/// position from the proposal of the best matched detection (or the velocity
/// prediction), then the stay/lose decision. Detections marked in `claimed`
/// are off limits and the ones taken are marked.
TrackedStep advance_tracked(Target& target, const FrameContext& ctx, std::vector<bool>& claimed);

/// Moves a target to Tracked on a proposal: templates and boxes from the
/// members, other views stopped. Used for births and re-acquisition.
void start_tracking(Target& target, const FusedProposal& proposal, const FrameContext& ctx);

/// Association features of every member of `proposal` against a lost target.
std::vector<AssociationCandidate> association_candidates(const Target& target, const FusedProposal& proposal,
                                                         const FrameContext& ctx);

/// Best member score of a (lost target, proposal) pair; kForbidden outside the gate.
double association_score(const Target& target, const FusedProposal& proposal, const FrameContext& ctx);

/// Indices of proposals none of whose members overlaps (IoU >= threshold) a
/// Tracked target's box in the same camera.
std::vector<std::size_t> suppress_covered(std::span<const FusedProposal> proposals, std::span<const Target> targets,
                                          double iou_threshold);

struct StepResult {
  int frame = 0;
  std::vector<TrackRecord> records;
  std::vector<Transition> transitions;
  /// (detection index, target id) for every detection a target took.
  std::vector<std::pair<std::size_t, int>> detection_use;
};

/// Online multi-target tracker; frames must arrive in increasing order.
class Tracker {
 public:
  Tracker(const SensorRig& rig, const PolicySet& policy, const AppearanceChannel& channel, TrackerOptions options = {});

  StepResult step(const Frame& frame);
  StepResult step(const Frame& frame, const FrameProposals& proposals);

  /// Targets that are not Inactive.
  const std::vector<Target>& targets() const { return targets_; }

 private:
  SensorRig rig_;
  PolicySet policy_;
  const AppearanceChannel* channel_;
  TrackerOptions options_;
  std::vector<Target> targets_;
  int next_id_ = 0;
  std::optional<int> last_frame_;
};

/// Linear position fill-in for Tracked gaps shorter than `max_gap` frames.
std::vector<TrackRecord> interpolate_gaps(std::span<const TrackRecord> records, int max_gap = 10);

struct TrackRun {
  std::vector<TrackRecord> records;  // online output
  std::vector<Transition> transitions;
  /// Violations of the one-detection-one-target rule.
  std::size_t shared_detections = 0;
};

/// Runs the tracker over a whole scenario with the synthetic appearance channel.
TrackRun run_tracker(const Scenario& scenario, const PolicySet& policy, const TrackerOptions& options = {},
                     const AppearanceParams& appearance = {});

}  // namespace m3ot
