#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "m3ot/config.hpp"
#include "m3ot/learning.hpp"
#include "m3ot/metrics.hpp"
#include "m3ot/tracker.hpp"

namespace m3ot {

struct AblationVariant {
  ProjectionScheme projection = ProjectionScheme::PointCloud;
  FusionScheme fusion = FusionScheme::PointCloud;
  bool global_offsets = true;

  std::string name() const;  // e.g. "pointcloud/distance/offsets-on"
  friend bool operator==(const AblationVariant&, const AblationVariant&) = default;
};

/// All eight combinations of the three axes.
std::vector<AblationVariant> all_variants();

struct VariantResult {
  AblationVariant variant;
  PolicySet policy;  // learned on the training seeds
  LearningDiagnostics training;
  std::vector<EvalReport> per_seed;  // aligned with the test seeds
  // Means over the test seeds.
  double mota = 0.0;
  double motp = 0.0;
  double mt = 0.0;
  double ml = 0.0;
  double ids = 0.0;
  double false_positives = 0.0;
  double misses = 0.0;
};

struct AblationResult {
  std::vector<std::uint64_t> test_seeds;
  std::vector<VariantResult> variants;

  const VariantResult& at(const AblationVariant& v) const;
};

/// Called after each test run, before evaluation.
using RunObserver =
    std::function<void(const AblationVariant&, const Scenario&, const TrackRun& online, std::span<const TrackRecord> output)>;

/// For each variant: learns a policy on the training seeds with that variant's
/// schemes and feature set, tracks every test seed, evaluates the interpolated
/// output. Scenarios come from `base.scenario` with seed and duration replaced.
AblationResult run_ablation(const RunConfig& base, std::span<const AblationVariant> variants,
                            const RunObserver& observer = {});

/// Fixed-column table, one row per variant.
void write_ablation_table(std::ostream& out, const AblationResult& result);

}  // namespace m3ot
