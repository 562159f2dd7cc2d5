#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "m3ot/appearance.hpp"
#include "m3ot/fusion.hpp"
#include "m3ot/learning.hpp"
#include "m3ot/metrics.hpp"
#include "m3ot/policy.hpp"
#include "m3ot/scenario.hpp"
#include "m3ot/tracker.hpp"

namespace m3ot {

struct AblationSets {
  std::vector<std::uint64_t> train_seeds{100, 101, 102};
  std::vector<std::uint64_t> test_seeds{1, 2, 3, 4, 5};
  int train_duration = 1800;
  int test_duration = 1800;
};

/// Everything one command needs. The seed and rig preset live in `scenario`,
/// the schemes in `proposals`, the global-offset toggle in `policy`.
struct RunConfig {
  std::string calibration_path;  // replaces the preset rig when set
  std::string scenario_path;
  std::string policy_path;
  ScenarioConfig scenario;
  ProposalOptions proposals;
  PolicyParams policy;
  AppearanceParams appearance;
  std::size_t template_cap = 10;
  std::size_t max_active_samples = 4000;
  int max_interpolation_gap = 10;
  EvalConfig evaluation;
  AblationSets ablation;

  TrackerOptions tracker_options() const;
  LearningOptions learning_options() const;
  /// Appearance parameters with the shared stability threshold and template cap.
  AppearanceParams appearance_params() const;
  /// The calibration file when given, otherwise the preset.
  SensorRig resolve_rig() const;
};

/// Throws InvalidConfig on any inconsistent value.
void validate(const RunConfig& config);

/// INI text. Sections: run, scenario, detector, lidar, maneuver.<k>, fusion,
/// ransac, policy, appearance, tracker, learning, evaluation, ablation. The run
/// section must name seed, rig, projection, fusion and global_offsets; every
/// other key defaults. Unknown sections or keys and malformed values throw
/// InvalidConfig.
RunConfig read_config(std::istream& in);
RunConfig load_config(const std::string& path);
/// Writes every key, so the output reads back to an equal configuration.
void write_config(std::ostream& out, const RunConfig& config);

}  // namespace m3ot
