#include "m3ot/experiment.hpp"

#include <iterator>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace m3ot {

std::string AblationVariant::name() const {
  return fmt::format("{}/{}/offsets-{}", to_string(projection), to_string(fusion), global_offsets ? "on" : "off");
}

std::vector<AblationVariant> all_variants() {
  std::vector<AblationVariant> out;
  for (auto p : {ProjectionScheme::PointCloud, ProjectionScheme::Ipm})
    for (auto f : {FusionScheme::PointCloud, FusionScheme::Distance})
      for (bool g : {true, false}) out.push_back({p, f, g});
  return out;
}

const VariantResult& AblationResult::at(const AblationVariant& v) const {
  for (const auto& r : variants)
    if (r.variant == v) return r;
  throw std::out_of_range("ablation: variant " + v.name() + " was not run");
}

AblationResult run_ablation(const RunConfig& base, std::span<const AblationVariant> variants,
                            const RunObserver& observer) {
  validate(base);
  const SensorRig rig = base.resolve_rig();
  auto make = [&](std::uint64_t seed, int duration) {
    ScenarioConfig c = base.scenario;
    c.seed = seed;
    c.duration = duration;
    return generate(c, rig);
  };
  std::vector<Scenario> train, test;
  for (auto s : base.ablation.train_seeds) train.push_back(make(s, base.ablation.train_duration));
  for (auto s : base.ablation.test_seeds) test.push_back(make(s, base.ablation.test_duration));

  AblationResult result;
  result.test_seeds = base.ablation.test_seeds;
  for (const auto& v : variants) {
    RunConfig cfg = base;
    cfg.proposals.projection = v.projection;
    cfg.proposals.fusion = v.fusion;
    cfg.policy.use_global_offsets = v.global_offsets;

    const auto learned = learn_policies(train, PolicySet::initial(rig, cfg.policy), cfg.learning_options());
    VariantResult vr;
    vr.variant = v;
    vr.policy = learned.policy;
    vr.training = learned.diagnostics;
    for (const auto& sc : test) {
      const auto run = run_tracker(sc, learned.policy, cfg.tracker_options(), cfg.appearance_params());
      const auto output = interpolate_gaps(run.records, cfg.max_interpolation_gap);
      if (observer) observer(v, sc, run, output);
      vr.per_seed.push_back(evaluate(sc, output, cfg.evaluation));
    }
    const double n = static_cast<double>(vr.per_seed.size());
    for (const auto& r : vr.per_seed) {
      vr.mota += r.mota / n;
      vr.motp += r.motp / n;
      vr.mt += r.mt / n;
      vr.ml += r.ml / n;
      vr.ids += r.ids / n;
      vr.false_positives += r.false_positives / n;
      vr.misses += r.misses / n;
    }
    result.variants.push_back(std::move(vr));
  }
  return result;
}

void write_ablation_table(std::ostream& out, const AblationResult& result) {
  fmt::memory_buffer buf;
  auto o = std::back_inserter(buf);
  fmt::format_to(o, "# m3ot ablation v1\n# test seeds: {}\n", fmt::join(result.test_seeds, " "));
  fmt::format_to(o, "# means over the test seeds; epochs and converged refer to policy learning\n");
  fmt::format_to(o, "{:<12} {:<12} {:<8} {:>8} {:>8} {:>7} {:>7} {:>8} {:>9} {:>9} {:>6} {:>9}\n", "projection",
                 "fusion", "offsets", "MOTA", "MOTP", "MT", "ML", "IDS", "FP", "FN", "epochs", "converged");
  for (const auto& r : result.variants)
    fmt::format_to(o, "{:<12} {:<12} {:<8} {:>8.4f} {:>8.4f} {:>7.4f} {:>7.4f} {:>8.1f} {:>9.1f} {:>9.1f} {:>6} {:>9}\n",
                   to_string(r.variant.projection), to_string(r.variant.fusion), r.variant.global_offsets ? "on" : "off",
                   r.mota, r.motp, r.mt, r.ml, r.ids, r.false_positives, r.misses, r.training.epochs,
                   r.training.converged ? "yes" : "no");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace m3ot
