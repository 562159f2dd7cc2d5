#pragma once

#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "m3ot/appearance.hpp"
#include "m3ot/fusion.hpp"
#include "m3ot/policy.hpp"
#include "m3ot/scenario.hpp"

namespace m3ot {

struct TrainingSample {
  Eigen::VectorXd feature;
  int label = 1;
};

struct LearningOptions {
  ProposalOptions proposals;
  AppearanceParams appearance;
  std::size_t template_cap = 10;
  /// Per-camera cap on Active training samples (evenly strided subsample).
  std::size_t max_active_samples = 4000;
};

struct LearningDiagnostics {
  bool converged = false;
  int epochs = 0;
  std::vector<int> mistakes_per_epoch;
  /// Epoch whose starting policy is returned.
  int best_epoch = 0;
  std::map<int, std::size_t> lost_samples;  // per camera
  std::vector<int> degenerate_cameras;
};

struct LearningResult {
  PolicySet policy;
  LearningDiagnostics diagnostics;
  std::map<int, std::vector<TrainingSample>> lost_sets;
};

/// Offline Active classifiers: detections labelled true or false against the
/// ground truth, one SVM per camera.
PolicySet train_active(std::span<const Scenario> scenarios, const PolicySet& initial, const LearningOptions& options = {});

/// Active classifiers offline, then reinforcement learning of the Lost
/// classifiers: each ground-truth target is followed with the current policy
/// from its first correct detection; every wrong or missed association in the
/// Lost state adds labelled pairs to the involved cameras' sets, retrains them
/// and ends that target's rollout. Stops after an epoch without mistakes or
/// after params.max_epochs, returning the policy of the best epoch.
LearningResult learn_policies(std::span<const Scenario> scenarios, const PolicySet& initial,
                              const LearningOptions& options = {});

}  // namespace m3ot
