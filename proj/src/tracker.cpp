#include "m3ot/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "m3ot/hungarian.hpp"

namespace m3ot {
namespace {

void push_template(CameraView& view, Template t, std::size_t cap) {
  view.templates.push_back(std::move(t));
  while (view.templates.size() > cap) view.templates.pop_front();
}

void reset_view(CameraView& view, const Box& box, const FrameContext& ctx) {
  view.tracking = ctx.channel->capture(view.camera_id, box, ctx.frame->index);
  push_template(view, view.tracking, ctx.template_cap);
  view.box = box;
  view.overlaps.assign(1, OverlapEntry{box, box});
  view.active = true;
}

void update_motion(Target& t, const GlobalPoint& position, int frame, const PolicyParams& params,
                   const std::optional<Eigen::Vector2d>& dims) {
  const int dt = frame - t.last_frame;
  if (dt > 0) {
    const Eigen::Vector2d step = (position - t.last_position).head<2>() / static_cast<double>(dt);
    t.velocity = params.velocity_gain * step + (1.0 - params.velocity_gain) * t.velocity;
  }
  if (dims) t.dimensions = params.velocity_gain * *dims + (1.0 - params.velocity_gain) * t.dimensions;
  t.last_position = position;
  t.last_frame = frame;
}

}  // namespace

FrameContext::FrameContext(const Frame& f, const FrameProposals& p, const SensorRig& r, const AppearanceChannel& c,
                           const PolicySet& pol, std::size_t cap)
    : frame(&f), proposals(&p), rig(&r), channel(&c), policy(&pol), template_cap(cap),
      proposal_of(f.detections.size(), 0) {
  for (std::size_t k = 0; k < p.proposals.size(); ++k)
    for (const auto& m : p.proposals[k].members) proposal_of.at(m.detection_index) = k;
}

TrackedStep advance_tracked(Target& t, const FrameContext& ctx, std::vector<bool>& claimed) {
  const auto& params = ctx.policy->params;
  const auto& dets = ctx.frame->detections;
  const int frame = ctx.frame->index;

  struct ViewStep {
    CameraView* view;
    FlowResult flow;
    std::optional<std::size_t> det;
    double overlap = 0.0;
    bool good = false;
  };
  std::vector<ViewStep> steps;
  std::vector<ViewSignal> signals;
  for (auto& v : t.views) {
    if (!v.active) continue;
    ViewStep s{&v, ctx.channel->track(v.tracking, frame), std::nullopt};
    double best = 0.0;
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (claimed[d] || dets[d].camera_id != v.camera_id) continue;
      const double o = iou(s.flow.predicted, dets[d].box);
      if (o > best) {
        best = o;
        s.det = d;
      }
    }
    s.overlap = best;
    v.overlaps.push_back({s.flow.predicted, s.det ? std::optional<Box>(dets[*s.det].box) : std::nullopt});
    while (v.overlaps.size() > params.overlap_window) v.overlaps.pop_front();
    const OverlapMean o = mean_overlap_history(v.overlaps, params.overlap_window);
    const ViewSignal sig{s.flow.median_fb(), o.no_history ? 0.0 : o.value};
    s.good = sig.fb_error < params.e0 && sig.overlap > params.o0;
    signals.push_back(sig);
    steps.push_back(s);
  }

  // Position from the proposal of the most overlapping, stably tracked detection.
  std::optional<std::size_t> chosen;
  {
    std::vector<const ViewStep*> order;
    for (const auto& s : steps)
      if (s.det && s.overlap >= params.nms_iou && s.flow.stable) order.push_back(&s);
    std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->overlap > b->overlap; });
    for (const ViewStep* s : order) {
      const std::size_t p = ctx.proposal_of[*s->det];
      const auto& members = ctx.proposals->proposals[p].members;
      if (std::none_of(members.begin(), members.end(), [&](const ProposalMember& m) { return claimed[m.detection_index]; })) {
        chosen = p;
        break;
      }
    }
  }
  const GlobalPoint position =
      chosen ? ctx.proposals->proposals[*chosen].global_position : t.predicted_position(frame);

  TrackedStep out;
  out.stay = keeps_tracking(signals, t.last_position, position, params);
  if (!out.stay) {
    t.state = TargetState::Lost;
    t.lost_age = 0;
    for (auto& v : t.views) {
      v.active = false;
      v.overlaps.clear();
    }
    return out;
  }

  for (auto& s : steps) {
    CameraView& v = *s.view;
    if (s.det && s.overlap >= params.nms_iou && s.flow.stable) {
      v.box = dets[*s.det].box;
      claimed[*s.det] = true;
      out.used.push_back(*s.det);
      push_template(v, ctx.channel->capture(v.camera_id, v.box, frame), ctx.template_cap);
    } else if (s.good) {
      v.box = s.flow.predicted;
    } else {
      v.active = false;
      v.overlaps.clear();
    }
  }

  std::optional<Eigen::Vector2d> dims;
  if (chosen) {
    const FusedProposal& p = ctx.proposals->proposals[*chosen];
    dims = p.dimensions;
    for (const auto& m : p.members) {
      if (claimed[m.detection_index]) continue;
      claimed[m.detection_index] = true;
      out.used.push_back(m.detection_index);
      CameraView& v = t.ensure_view(m.detection.camera_id);
      if (!v.active) reset_view(v, m.detection.box, ctx);
    }
  }
  update_motion(t, position, frame, params, dims);
  t.history.push_back({frame, position, t.active_boxes()});
  std::sort(out.used.begin(), out.used.end());
  return out;
}

void start_tracking(Target& t, const FusedProposal& p, const FrameContext& ctx) {
  for (auto& v : t.views) {
    v.active = false;
    v.overlaps.clear();
  }
  for (const auto& m : p.members) reset_view(t.ensure_view(m.detection.camera_id), m.detection.box, ctx);
  const int frame = ctx.frame->index;
  t.velocity.setZero();
  t.last_position = p.global_position;
  t.last_frame = frame;
  if (p.dimensions) t.dimensions = *p.dimensions;
  t.state = TargetState::Tracked;
  t.lost_age = 0;
  t.history.push_back({frame, p.global_position, t.active_boxes()});
}

std::vector<AssociationCandidate> association_candidates(const Target& t, const FusedProposal& p,
                                                         const FrameContext& ctx) {
  std::vector<AssociationCandidate> out;
  for (const auto& m : p.members) {
    AssociationContext actx{ctx.frame->index, &ctx.rig->camera(m.detection.camera_id), ctx.channel};
    out.push_back({m.detection.camera_id, association_feature(t, p, m, actx, ctx.policy->params)});
  }
  return out;
}

double association_score(const Target& t, const FusedProposal& p, const FrameContext& ctx) {
  if (!within_gate(t.last_position, p.global_position, ctx.policy->params)) return kForbidden;
  const auto cands = association_candidates(t, p, ctx);
  return lost_reward(cands, *ctx.policy, LostAction::Associate).value;
}

std::vector<std::size_t> suppress_covered(std::span<const FusedProposal> proposals, std::span<const Target> targets,
                                          double iou_threshold) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    bool covered = false;
    for (const auto& m : proposals[k].members) {
      for (const auto& t : targets) {
        if (t.state != TargetState::Tracked) continue;
        const CameraView* v = t.view(m.detection.camera_id);
        if (v && v->active && iou(v->box, m.detection.box) >= iou_threshold) {
          covered = true;
          break;
        }
      }
      if (covered) break;
    }
    if (!covered) out.push_back(k);
  }
  return out;
}

Tracker::Tracker(const SensorRig& rig, const PolicySet& policy, const AppearanceChannel& channel,
                 TrackerOptions options)
    : rig_(rig), policy_(policy), channel_(&channel), options_(std::move(options)) {}

StepResult Tracker::step(const Frame& frame) { return step(frame, build_proposals(frame, rig_, options_.proposals)); }

StepResult Tracker::step(const Frame& frame, const FrameProposals& fp) {
  if (last_frame_ && frame.index <= *last_frame_)
    throw OutOfOrderFrame("tracker: frame " + std::to_string(frame.index) + " after frame " +
                          std::to_string(*last_frame_));
  last_frame_ = frame.index;
  const FrameContext ctx(frame, fp, rig_, *channel_, policy_, options_.template_cap);
  const auto& params = policy_.params;
  StepResult res;
  res.frame = frame.index;
  std::vector<bool> claimed(frame.detections.size(), false);

  // Tracked targets first.
  for (auto& t : targets_) {
    if (t.state != TargetState::Tracked) continue;
    const auto st = advance_tracked(t, ctx, claimed);
    res.transitions.push_back({frame.index, t.id, TargetState::Tracked, t.state});
    for (std::size_t d : st.used) res.detection_use.emplace_back(d, t.id);
  }

  // Lost targets against proposals not covered by tracked ones.
  std::vector<std::size_t> open;
  for (std::size_t k : suppress_covered(fp.proposals, targets_, params.nms_iou)) {
    const auto& ms = fp.proposals[k].members;
    if (std::none_of(ms.begin(), ms.end(), [&](const ProposalMember& m) { return claimed[m.detection_index]; }))
      open.push_back(k);
  }
  std::vector<std::size_t> lost;
  for (std::size_t i = 0; i < targets_.size(); ++i)
    if (targets_[i].state == TargetState::Lost) lost.push_back(i);

  std::vector<bool> taken(fp.proposals.size(), false);
  std::vector<bool> matched(lost.size(), false);
  if (!lost.empty() && !open.empty()) {
    Eigen::MatrixXd scores(static_cast<Eigen::Index>(lost.size()), static_cast<Eigen::Index>(open.size()));
    for (std::size_t r = 0; r < lost.size(); ++r)
      for (std::size_t c = 0; c < open.size(); ++c)
        scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            association_score(targets_[lost[r]], fp.proposals[open[c]], ctx);
    for (const auto& [r, c] : hungarian(scores).pairs) {
      Target& t = targets_[lost[static_cast<std::size_t>(r)]];
      const FusedProposal& p = fp.proposals[open[static_cast<std::size_t>(c)]];
      start_tracking(t, p, ctx);
      res.transitions.push_back({frame.index, t.id, TargetState::Lost, TargetState::Tracked});
      for (const auto& m : p.members) {
        claimed[m.detection_index] = true;
        res.detection_use.emplace_back(m.detection_index, t.id);
      }
      taken[open[static_cast<std::size_t>(c)]] = true;
      matched[static_cast<std::size_t>(r)] = true;
    }
  }
  for (std::size_t r = 0; r < lost.size(); ++r) {
    if (matched[r]) continue;
    Target& t = targets_[lost[r]];
    ++t.lost_age;
    const bool expire = t.lost_age > params.max_lost_age;
    // Targets that just became lost already logged Tracked -> Lost this frame.
    const bool logged = std::any_of(res.transitions.begin(), res.transitions.end(), [&](const Transition& tr) {
                          return tr.target_id == t.id && tr.to == TargetState::Lost;
                        });
    if (expire) {
      t.state = TargetState::Inactive;
      t.lost_age = 0;
      res.transitions.push_back({frame.index, t.id, TargetState::Lost, TargetState::Inactive});
    } else if (!logged) {
      res.transitions.push_back({frame.index, t.id, TargetState::Lost, TargetState::Lost});
    }
  }

  // Births from the remaining uncovered proposals.
  for (std::size_t k : open) {
    if (taken[k]) continue;
    const FusedProposal& p = fp.proposals[k];
    bool accept = false;
    for (const auto& m : p.members) {
      const auto f = active_feature(m.detection, rig_.camera(m.detection.camera_id));
      if (active_reward(f, policy_.active_for(m.detection.camera_id), ActiveAction::Track) > 0.0) accept = true;
    }
    Target t;
    t.id = next_id_++;
    t.birth_frame = frame.index;
    if (accept) {
      start_tracking(t, p, ctx);
      res.transitions.push_back({frame.index, t.id, TargetState::Active, TargetState::Tracked});
      for (const auto& m : p.members) {
        claimed[m.detection_index] = true;
        res.detection_use.emplace_back(m.detection_index, t.id);
      }
      targets_.push_back(std::move(t));
    } else {
      res.transitions.push_back({frame.index, t.id, TargetState::Active, TargetState::Inactive});
    }
  }

  std::erase_if(targets_, [](const Target& t) { return t.state == TargetState::Inactive; });
  for (const auto& t : targets_)
    if (t.state == TargetState::Tracked)
      res.records.push_back({frame.index, t.id, t.last_position, t.active_boxes(), TargetState::Tracked, false});
  return res;
}

std::vector<TrackRecord> interpolate_gaps(std::span<const TrackRecord> records, int max_gap) {
  std::map<int, std::vector<const TrackRecord*>> by_id;
  for (const auto& r : records) by_id[r.target_id].push_back(&r);
  std::vector<TrackRecord> out(records.begin(), records.end());
  for (auto& [id, rs] : by_id) {
    std::stable_sort(rs.begin(), rs.end(), [](auto* a, auto* b) { return a->frame < b->frame; });
    for (std::size_t k = 1; k < rs.size(); ++k) {
      const int gap = rs[k]->frame - rs[k - 1]->frame - 1;
      if (gap <= 0 || gap >= max_gap) continue;
      for (int f = 1; f <= gap; ++f) {
        const double a = static_cast<double>(f) / static_cast<double>(gap + 1);
        TrackRecord r;
        r.frame = rs[k - 1]->frame + f;
        r.target_id = id;
        r.position = (1.0 - a) * rs[k - 1]->position + a * rs[k]->position;
        r.state = TargetState::Tracked;
        r.interpolated = true;
        out.push_back(std::move(r));
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const TrackRecord& a, const TrackRecord& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.target_id < b.target_id;
  });
  return out;
}

TrackRun run_tracker(const Scenario& scenario, const PolicySet& policy, const TrackerOptions& options,
                     const AppearanceParams& appearance) {
  const SyntheticAppearance channel(scenario, appearance);
  Tracker tracker(scenario.rig, policy, channel, options);
  TrackRun run;
  for (const auto& f : scenario.frames) {
    auto s = tracker.step(f);
    std::set<std::size_t> seen;
    for (const auto& [d, id] : s.detection_use)
      if (!seen.insert(d).second) ++run.shared_detections;
    run.records.insert(run.records.end(), s.records.begin(), s.records.end());
    run.transitions.insert(run.transitions.end(), s.transitions.begin(), s.transitions.end());
  }
  return run;
}

}  // namespace m3ot
