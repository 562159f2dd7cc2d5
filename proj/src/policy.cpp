#include "m3ot/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace m3ot {
namespace {

/// Height at which a vehicle's image centre sits, for the motion-prediction feature.
constexpr double kCentreHeight = 0.75;

}  // namespace

PolicySet PolicySet::initial(const SensorRig& rig, const PolicyParams& params) {
  PolicySet p;
  p.params = params;
  for (int id : rig.camera_ids()) {
    p.active[id] = LinearClassifier::constant(kActiveDim, 1.0);
    p.lost[id] = LinearClassifier::constant(kAssociationDim, -1.0);
  }
  return p;
}

const LinearClassifier& PolicySet::active_for(int camera_id) const {
  auto it = active.find(camera_id);
  if (it == active.end()) throw std::out_of_range("policy: no Active classifier for camera " + std::to_string(camera_id));
  return it->second;
}

const LinearClassifier& PolicySet::lost_for(int camera_id) const {
  auto it = lost.find(camera_id);
  if (it == lost.end()) throw std::out_of_range("policy: no Lost classifier for camera " + std::to_string(camera_id));
  return it->second;
}

Eigen::VectorXd active_feature(const Detection& det, const CameraCalibration& camera) {
  const double W = camera.width, H = camera.height;
  Eigen::VectorXd f(kActiveDim);
  f << det.box.u / W, det.box.v / H, det.box.w / W, det.box.h / H, det.score;
  return f.cwiseMax(0.0).cwiseMin(1.0);
}

double active_reward(const Eigen::VectorXd& feature, const LinearClassifier& cls, ActiveAction action) {
  const double y = action == ActiveAction::Track ? 1.0 : -1.0;
  return y * cls.decision(feature);
}

bool within_gate(const GlobalPoint& last, const GlobalPoint& current, const PolicyParams& params) {
  return std::abs(current.y() - last.y()) <= params.gate_lateral &&
         std::abs(current.x() - last.x()) <= params.gate_longitudinal;
}

bool keeps_tracking(std::span<const ViewSignal> views, const GlobalPoint& last, const GlobalPoint& current,
                    const PolicyParams& params) {
  const bool good = std::any_of(views.begin(), views.end(), [&](const ViewSignal& v) {
    return v.fb_error < params.e0 && v.overlap > params.o0;
  });
  return good && within_gate(last, current, params);
}

double tracked_reward(std::span<const ViewSignal> views, const GlobalPoint& last, const GlobalPoint& current,
                      const PolicyParams& params, TrackedAction action) {
  const double y = action == TrackedAction::Stay ? 1.0 : -1.0;
  return keeps_tracking(views, last, current, params) ? y : -y;
}

Eigen::VectorXd association_feature(const Target& target, const FusedProposal& proposal, const ProposalMember& member,
                                    const AssociationContext& ctx, const PolicyParams& params) {
  if (!within_gate(target.last_position, proposal.global_position, params))
    throw GateViolation("association_feature: proposal outside the target's gate");
  const Detection& d = member.detection;
  const double cap = 2.0 * params.e0;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(kAssociationDim);

  const CameraView* view = target.view(d.camera_id);
  if (view && !view->templates.empty() && ctx.channel) {
    double height_ratio = 0.0;
    for (const auto& t : view->templates) {
      const FlowResult r = ctx.channel->match(t, d.box, ctx.frame);
      for (int k = 0; k < 5; ++k) phi[k] += std::min(r.fb_errors[static_cast<std::size_t>(k)], cap);
      phi[5] += r.ncc_forward;
      phi[6] += r.ncc_backward;
      height_ratio += r.predicted.h > 0.0 ? d.box.h / r.predicted.h : 0.0;
      phi[9] += iou(d.box, r.predicted);
    }
    const double n = static_cast<double>(view->templates.size());
    for (int k : {0, 1, 2, 3, 4, 5, 6, 9}) phi[k] /= n;
    phi[7] = height_ratio / n;
    phi[8] = view->box.h / d.box.h;
  } else {
    for (int k = 0; k < 5; ++k) phi[k] = cap;
    phi[7] = 1.0;
    phi[8] = 1.0;
  }
  phi[10] = std::clamp(d.score, 0.0, 1.0);

  phi[11] = 1.0;
  if (ctx.camera) {
    GlobalPoint c = target.predicted_position(ctx.frame);
    c.z() = kCentreHeight;
    if (const auto px = back_project_global_to_camera(c, *ctx.camera))
      phi[11] = std::min(1.0, (*px - d.box.center()).norm() / ctx.camera->width);
  }
  if (params.use_global_offsets) {
    phi[12] = std::abs(member.projection.y() - target.last_position.y());
    phi[13] = std::abs(member.projection.x() - target.last_position.x());
  }
  return phi;
}

LostScore lost_reward(std::span<const AssociationCandidate> candidates, const PolicySet& policy, LostAction action) {
  const double y = action == LostAction::Associate ? 1.0 : -1.0;
  LostScore out;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < candidates.size(); ++m) {
    const double f = policy.lost_for(candidates[m].camera_id).decision(candidates[m].feature);
    if (!out.argmax || f > best) {
      best = f;
      out.argmax = m;
    }
  }
  out.value = y * best;
  return out;
}

}  // namespace m3ot
