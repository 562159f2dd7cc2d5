#include "m3ot/learning.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "m3ot/tracker.hpp"

namespace m3ot {
namespace {

/// A scenario with everything the rollouts reuse across epochs.
struct Prepared {
  const Scenario* scenario;
  SyntheticAppearance channel;
  std::vector<FrameProposals> proposals;
  std::vector<std::vector<int>> proposal_labels;  // truth id per proposal, -1 for clutter

  Prepared(const Scenario& s, const LearningOptions& o) : scenario(&s), channel(s, o.appearance) {
    for (const auto& f : s.frames) {
      proposals.push_back(build_proposals(f, s.rig, o.proposals));
      const auto labels = label_detections(f);
      std::vector<int> pl;
      for (const auto& p : proposals.back().proposals) {
        std::map<int, int> votes;
        for (const auto& m : p.members) ++votes[labels[m.detection_index]];
        int best = labels[p.members.front().detection_index], count = 0;
        for (const auto& [id, n] : votes)
          if (n > count) {
            best = id;
            count = n;
          }
        pl.push_back(best);
      }
      proposal_labels.push_back(std::move(pl));
    }
  }
};

struct Span {
  std::size_t first;  // frame position of the first correct detection
  std::size_t last;   // last frame position with the vehicle visible
  std::size_t proposal;
};

std::optional<Span> target_span(const Prepared& p, int id) {
  std::optional<Span> s;
  for (std::size_t f = 0; f < p.scenario->frames.size(); ++f) {
    const auto& labels = p.proposal_labels[f];
    if (!s) {
      auto it = std::find(labels.begin(), labels.end(), id);
      if (it != labels.end()) s = Span{f, f, static_cast<std::size_t>(it - labels.begin())};
    }
    if (s) {
      const auto* st = p.scenario->frames[f].truth_of(id);
      if (st && st->visible()) s->last = f;
    }
  }
  return s;
}

class Learner {
 public:
  Learner(PolicySet policy, const LearningOptions& o) : policy_(std::move(policy)), options_(o) {}

  /// Follows one target; returns false on a Lost-state mistake (after retraining).
  bool rollout(const Prepared& p, int id) {
    const auto span = target_span(p, id);
    if (!span) return true;
    const auto& frames = p.scenario->frames;
    Target t;
    t.id = id;
    {
      const FrameContext ctx(frames[span->first], p.proposals[span->first], p.scenario->rig, p.channel, policy_,
                             options_.template_cap);
      t.birth_frame = frames[span->first].index;
      start_tracking(t, p.proposals[span->first].proposals[span->proposal], ctx);
    }
    for (std::size_t f = span->first + 1; f <= span->last; ++f) {
      const FrameContext ctx(frames[f], p.proposals[f], p.scenario->rig, p.channel, policy_, options_.template_cap);
      std::vector<bool> claimed(frames[f].detections.size(), false);
      if (t.state == TargetState::Tracked) advance_tracked(t, ctx, claimed);
      if (t.state != TargetState::Lost) continue;

      const auto& props = p.proposals[f].proposals;
      const auto& labels = p.proposal_labels[f];
      std::optional<std::size_t> chosen, correct;
      double best = 0.0;
      for (std::size_t k = 0; k < props.size(); ++k) {
        if (!within_gate(t.last_position, props[k].global_position, policy_.params)) continue;
        if (labels[k] == id && !correct) correct = k;
        const double s = association_score(t, props[k], ctx);
        if (s >= 0.0 && (!chosen || s > best)) {
          best = s;
          chosen = k;
        }
      }
      const bool wrong = chosen && labels[*chosen] != id;
      const bool missed = !chosen && correct;
      if (wrong || missed) {
        std::set<int> touched;
        if (wrong) add_examples(t, props[*chosen], ctx, -1, touched);
        if (correct) add_examples(t, props[*correct], ctx, +1, touched);
        for (int cam : touched) retrain(cam);
        return false;
      }
      if (chosen) {
        start_tracking(t, props[*chosen], ctx);
      } else if (++t.lost_age > policy_.params.max_lost_age) {
        return true;
      }
    }
    return true;
  }

  PolicySet policy_;
  std::map<int, std::vector<TrainingSample>> sets_;
  std::set<int> degenerate_;

 private:
  void add_examples(const Target& t, const FusedProposal& p, const FrameContext& ctx, int label, std::set<int>& touched) {
    const auto cands = association_candidates(t, p, ctx);
    // Cameras in which the target has been seen, when the proposal has any.
    bool any_seen = false;
    for (const auto& c : cands) any_seen |= t.view(c.camera_id) != nullptr;
    for (const auto& c : cands) {
      if (any_seen && !t.view(c.camera_id)) continue;
      sets_[c.camera_id].push_back({c.feature, label});
      touched.insert(c.camera_id);
    }
  }

  void retrain(int camera_id) {
    const auto& set = sets_[camera_id];
    std::vector<Eigen::VectorXd> x;
    std::vector<int> y;
    for (const auto& s : set) {
      x.push_back(s.feature);
      y.push_back(s.label);
    }
    SvmParams sp;
    sp.C = policy_.params.C;
    const auto r = svm_train(x, y, sp);
    if (r.degenerate) degenerate_.insert(camera_id);
    policy_.lost[camera_id] = r.classifier;
  }

  const LearningOptions& options_;
};

}  // namespace

PolicySet train_active(std::span<const Scenario> scenarios, const PolicySet& initial, const LearningOptions& options) {
  PolicySet out = initial;
  std::map<int, std::vector<TrainingSample>> sets;
  for (const auto& s : scenarios)
    for (const auto& f : s.frames) {
      const auto labels = label_detections(f);
      for (std::size_t d = 0; d < f.detections.size(); ++d) {
        const auto& det = f.detections[d];
        sets[det.camera_id].push_back({active_feature(det, s.rig.camera(det.camera_id)), labels[d] >= 0 ? 1 : -1});
      }
    }
  for (auto& [cam, set] : sets) {
    const std::size_t stride = (set.size() + options.max_active_samples - 1) / options.max_active_samples;
    std::vector<Eigen::VectorXd> x;
    std::vector<int> y;
    for (std::size_t k = 0; k < set.size(); k += std::max<std::size_t>(stride, 1)) {
      x.push_back(set[k].feature);
      y.push_back(set[k].label);
    }
    SvmParams sp;
    sp.C = initial.params.C;
    out.active[cam] = svm_train(x, y, sp).classifier;
  }
  return out;
}

LearningResult learn_policies(std::span<const Scenario> scenarios, const PolicySet& initial,
                              const LearningOptions& options) {
  LearningResult res;
  res.policy = initial;
  if (scenarios.empty()) {
    res.diagnostics.converged = true;
    return res;
  }
  std::vector<Prepared> prepared;
  prepared.reserve(scenarios.size());
  for (const auto& s : scenarios) prepared.emplace_back(s, options);

  Learner learner(train_active(scenarios, initial, options), options);
  auto& diag = res.diagnostics;
  int best_mistakes = -1;
  for (int epoch = 0; epoch < initial.params.max_epochs; ++epoch) {
    const PolicySet start = learner.policy_;
    int mistakes = 0;
    for (const auto& p : prepared)
      for (const auto& track : p.scenario->tracks)
        if (!learner.rollout(p, track.track_id)) ++mistakes;
    diag.mistakes_per_epoch.push_back(mistakes);
    diag.epochs = epoch + 1;
    if (best_mistakes < 0 || mistakes < best_mistakes) {
      best_mistakes = mistakes;
      diag.best_epoch = epoch;
      res.policy = start;
    }
    if (mistakes == 0) {
      diag.converged = true;
      break;
    }
  }
  for (const auto& [cam, set] : learner.sets_) diag.lost_samples[cam] = set.size();
  diag.degenerate_cameras.assign(learner.degenerate_.begin(), learner.degenerate_.end());
  res.lost_sets = learner.sets_;
  return res;
}

}  // namespace m3ot
