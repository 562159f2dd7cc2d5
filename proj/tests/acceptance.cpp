// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "m3ot/config.hpp"
#include "m3ot/experiment.hpp"
#include "m3ot/geometry.hpp"
#include "m3ot/hungarian.hpp"
#include "m3ot/learning.hpp"
#include "m3ot/metrics.hpp"
#include "m3ot/svm.hpp"
#include "m3ot/tracker.hpp"
#include "oracles.hpp"

using namespace m3ot;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  fmt::print("criterion {}: {} {}\n", id, ok ? "PASS" : "FAIL", detail);
  std::cout.flush();
}

ScenarioConfig noiseless(ScenarioConfig c) {
  c.detector.miss_rate = 0;
  c.detector.false_positive_rate = 0;
  c.detector.sigma_px = 0;
  c.lidar.range_noise_sigma = 0;
  return c;
}

// Tolerances.
constexpr double kRangeRoundTrip = 1e-9;  // m
constexpr double kIpmRoundTrip = 1e-6;    // m
constexpr double kGeometrySeconds = 1.0;
constexpr int kMinFusionFrames = 500;
constexpr double kSvmObjective = 1e-6;
constexpr double kSvmOneDim = 1e-9;
constexpr int kMaxEpochs = 5;
constexpr double kLearningSeconds = 60.0;
constexpr double kCoverage = 0.8;
constexpr int kMaxSwitches = 2;

void geometry() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(-50.0, 50.0), depth(0.5, 80.0), yaw(-3.1, 3.1), fwd(5.0, 40.0),
      lat(-8.0, 8.0);
  double range_err = 0.0, pixel_err = 0.0, ipm_err = 0.0;
  for (int k = 0; k < 1000; ++k) {
    RangeCalibration cal;
    cal.rotation = oracle::random_rotation(gen);
    cal.translation = {u(gen) / 10, u(gen) / 10, u(gen) / 10};
    const Eigen::Vector3d p(u(gen), u(gen), u(gen));
    range_err = std::max(range_err, (back_project_global_to_range(project_range_to_global(p, cal), cal) - p).norm());

    const double a = yaw(gen);
    const auto cam = make_camera(k % 8, a, 0.07, Eigen::Vector3d(u(gen) / 25, u(gen) / 25, 1.6),
                                 70.0 * std::numbers::pi / 180.0, 1280, 720);
    // Camera-frame point at a known depth back to global and into the image.
    const Eigen::Vector3d pix((u(gen) + 50) * 12.8, (u(gen) + 50) * 7.2, 1.0);
    const Eigen::Vector3d global =
        cam.rotation.transpose() * (depth(gen) * (cam.intrinsics.inverse() * pix) - cam.translation);
    const auto back = back_project_global_to_camera(global, cam);
    pixel_err = back ? std::max(pixel_err, (*back - pix.head<2>()).norm()) : 1e9;

    const Eigen::Vector3d ground = cam.center() + yaw_rotation(a) * Eigen::Vector3d(fwd(gen), lat(gen), 0.0);
    const Eigen::Vector3d g(ground.x(), ground.y(), 0.0);
    const auto gpx = back_project_global_to_camera(g, cam);
    ipm_err = gpx ? std::max(ipm_err, (ipm_project(*gpx, cam) - g).norm()) : 1e9;
  }
  const double secs = seconds_since(t0);
  verdict(1, range_err < kRangeRoundTrip && ipm_err < kIpmRoundTrip && pixel_err < kIpmRoundTrip && secs < kGeometrySeconds,
          fmt::format("range max err {:.3g} m, pixel max err {:.3g} px, ipm max err {:.3g} m, {:.3f} s", range_err,
                      pixel_err, ipm_err, secs));
}

void fusion() {
  int frames = 0, splits = 0, merges = 0, multi = 0;
  for (const auto& rig : rig_preset_names()) {
    ScenarioConfig c;
    c.seed = 31;
    c.duration = 100;
    c.rig = rig;
    const auto sc = generate(noiseless(c));
    const auto e = oracle::check_partition(sc, ProposalOptions{});
    frames += e.frames;
    splits += e.splits;
    merges += e.merges;
    multi += e.multi;
  }
  // Two 100-point sets sharing 79, 80 and 81 points.
  auto range = [](std::size_t a, std::size_t b) {
    PointIndexSet s;
    for (std::size_t i = a; i < b; ++i) s.push_back(i);
    return s;
  };
  std::vector<GlobalPoint> cloud(300, GlobalPoint::Zero());
  const std::vector<Detection> dets{{0, {10, 300, 50, 40}, 0.9}, {1, {20, 300, 50, 40}, 0.8}};
  std::vector<GlobalPoint> fallback{{1, 0, 0}, {3, 0, 0}};
  bool threshold_ok = true;
  std::string shape;
  for (auto [shared, merged] : {std::pair{79, false}, std::pair{80, true}, std::pair{81, true}}) {
    std::vector<PointIndexSet> sets{range(0, 100), range(100 - shared, 200 - shared)};
    const double ratio = overlap_ratio(sets[0], sets[1]);
    const auto out = fuse_by_pointcloud(dets, sets, cloud, fallback);
    threshold_ok &= std::abs(ratio - shared / 100.0) < 1e-12 && (out.size() == 1) == merged;
    shape += fmt::format(" {:.2f}->{}", ratio, out.size() == 1 ? "merged" : "separate");
  }
  verdict(2, frames >= kMinFusionFrames && splits == 0 && merges == 0 && multi > 0 && threshold_ok,
          fmt::format("{} frames over all rigs, {} splits, {} merges, {} multi-camera groups; threshold{}", frames,
                      splits, merges, multi, shape));
}

void assignment() {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> dim(1, 6), val(-5, 20), forbid(0, 6);
  int mismatches = 0;
  for (int k = 0; k < 200; ++k) {
    Eigen::MatrixXd s(dim(gen), dim(gen));
    for (int i = 0; i < s.rows(); ++i)
      for (int j = 0; j < s.cols(); ++j) s(i, j) = forbid(gen) == 0 ? kForbidden : val(gen);
    if (hungarian(s).total != oracle::brute_force_assignment(s)) ++mismatches;
  }
  verdict(3, mismatches == 0, fmt::format("200 matrices up to 6x6, {} totals differ from exhaustive search", mismatches));
}

void svm() {
  std::mt19937_64 gen(5150);
  std::vector<Eigen::VectorXd> x;
  std::vector<int> y;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    oracle::random_svm_set(gen, k < 10, x, y);
    const auto r = svm_train(x, y, {.C = 1.0});
    worst = std::max(worst, std::abs(svm_primal_objective(r.classifier, x, y, 1.0) - oracle::svm_dual_optimum(x, y, 1.0)));
  }
  std::vector<Eigen::VectorXd> x1{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)};
  std::vector<int> y1{-1, 1};
  const auto one = svm_train(x1, y1, {.C = 1e3}).classifier;
  const bool one_ok = std::abs(one.weights[0] - 1.0) < kSvmOneDim && std::abs(one.bias) < kSvmOneDim;
  verdict(4, worst < kSvmObjective && one_ok,
          fmt::format("max objective gap {:.3g} over 10 separable + 10 overlapping sets; 1-D w {:.12f} b {:.3g}", worst,
                      one.weights[0], one.bias));
}

/// Learns on a noiseless three-vehicle scenario; returns it for the soundness audit.
Scenario convergence(const RunConfig& base, PolicySet& learned) {
  ScenarioConfig c = base.scenario;
  c.seed = 1;
  c.n_vehicles = 3;
  const auto sc = generate(noiseless(c));
  std::vector<Scenario> train{sc};
  const auto t0 = Clock::now();
  const auto r = learn_policies(train, PolicySet::initial(sc.rig, base.policy), base.learning_options());
  const double secs = seconds_since(t0);
  const auto& d = r.diagnostics;
  learned = r.policy;
  verdict(5, d.converged && d.mistakes_per_epoch.back() == 0 && d.epochs <= kMaxEpochs && secs < kLearningSeconds,
          fmt::format("{} epochs (limit {}), mistakes per epoch [{}], converged {}, {:.1f} s", d.epochs, kMaxEpochs,
                      fmt::join(d.mistakes_per_epoch, " "), d.converged ? "yes" : "no", secs));
  return sc;
}

Scenario orbit(const RunConfig& cfg, const PolicySet& policy) {
  ScenarioConfig c = cfg.scenario;
  c.seed = 11;
  c.duration = 1800;
  Maneuver circling;
  circling.kind = ManeuverKind::Orbit;
  circling.radius = 14.0;
  circling.angular_speed = 0.07;
  Maneuver ahead, behind;
  ahead.lane = 0;
  ahead.start_x = 40;
  behind.lane = 0;
  behind.start_x = -40;
  c.maneuvers = {circling, ahead, behind};
  const auto sc = generate(c);
  const auto run = run_tracker(sc, policy, cfg.tracker_options(), cfg.appearance_params());
  const auto out = interpolate_gaps(run.records, cfg.max_interpolation_gap);

  // Per-frame nearest hypothesis within the match radius, switches between consecutive matched ids.
  const int vehicle = sc.tracks.front().track_id;
  std::map<int, int> cover;
  std::map<int, std::vector<const TrackRecord*>> by_frame;
  for (const auto& r : out) by_frame[r.frame].push_back(&r);
  int visible = 0, switches = 0, last = -1;
  std::set<int> cameras;
  for (const auto& f : sc.frames) {
    const auto* s = f.truth_of(vehicle);
    if (!s || !s->visible()) continue;
    ++visible;
    for (const auto& b : s->boxes) cameras.insert(b.camera_id);
    double best = cfg.evaluation.match_threshold;
    int id = -1;
    for (const auto* r : by_frame[f.index]) {
      const double dist = (r->position - s->position).head<2>().norm();
      if (dist < best) {
        best = dist;
        id = r->target_id;
      }
    }
    if (id < 0) continue;
    ++cover[id];
    if (last >= 0 && id != last) ++switches;
    last = id;
  }
  int dominant = 0;
  for (const auto& [id, n] : cover) dominant = std::max(dominant, n);
  const double frac = visible ? static_cast<double>(dominant) / visible : 0.0;
  verdict(6, cameras.size() == sc.rig.cameras.size() && frac >= kCoverage && switches <= kMaxSwitches,
          fmt::format("orbiting vehicle seen by {} of {} cameras, dominant id covers {:.3f} of {} visible frames, "
                      "{} id switches, {} ids",
                      cameras.size(), sc.rig.cameras.size(), frac, visible, switches, cover.size()));
  return sc;
}

void metrics() {
  // One vehicle over ten frames: id 10 on frames 0-4, nothing on 5-6, id 11 on 7-9.
  std::vector<EvalFrame> frames;
  for (int f = 0; f < 10; ++f) {
    EvalFrame ef;
    ef.frame = f;
    ef.truth.push_back({1, GlobalPoint(f, 0, 0)});
    if (f < 5) ef.hypotheses.push_back({10, GlobalPoint(f, 0, 0)});
    if (f >= 7) ef.hypotheses.push_back({11, GlobalPoint(f, 0, 0)});
    frames.push_back(ef);
  }
  const auto hand = evaluate(frames);

  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-30, 30);
  std::vector<EvalFrame> perfect;
  for (int f = 0; f < 50; ++f) {
    EvalFrame ef;
    ef.frame = f;
    for (int id = 0; id < 6; ++id) ef.truth.push_back({id, GlobalPoint(u(gen), u(gen), 0)});
    ef.hypotheses = ef.truth;
    perfect.push_back(ef);
  }
  const auto fixed = evaluate(perfect);
  verdict(7, hand.mota == 0.7 && hand.misses == 2 && hand.ids == 1 && fixed.mota == 1.0 && fixed.motp == 0.0 && fixed.ids == 0,
          fmt::format("hand case MOTA {} (2 misses, 1 switch), perfect tracker MOTA {} MOTP {} IDS {}", hand.mota,
                      fixed.mota, fixed.motp, fixed.ids));
}

void ablation_orderings(const AblationResult& r) {
  const AblationVariant pc{ProjectionScheme::PointCloud, FusionScheme::PointCloud, true};
  const AblationVariant ipm{ProjectionScheme::Ipm, FusionScheme::PointCloud, true};
  const AblationVariant dist{ProjectionScheme::PointCloud, FusionScheme::Distance, true};
  const AblationVariant off{ProjectionScheme::PointCloud, FusionScheme::PointCloud, false};
  const auto &a = r.at(pc), &b = r.at(ipm), &c = r.at(dist), &d = r.at(off);
  const bool projection = a.motp < b.motp;
  const bool fusion = a.mota >= c.mota;
  const bool offsets = a.mota >= d.mota && a.ids <= d.ids;
  verdict(8, projection && fusion && offsets,
          fmt::format("MOTP pointcloud {:.4f} vs ipm {:.4f} [{}]; MOTA pointcloud fusion {:.4f} vs distance {:.4f} [{}]; "
                      "offsets on MOTA {:.4f} IDS {:.1f} vs off MOTA {:.4f} IDS {:.1f} [{}]",
                      a.motp, b.motp, projection ? "ok" : "violated", a.mota, c.mota, fusion ? "ok" : "violated",
                      a.mota, a.ids, d.mota, d.ids, offsets ? "ok" : "violated"));
}

struct AuditTotals {
  int runs = 0;
  long transitions = 0;
  long violations = 0;
  int causality_breaks = 0;
  int nondeterministic = 0;
};

void audit(AuditTotals& t, const Scenario& sc, const PolicySet& policy, const RunConfig& cfg) {
  const auto rep = oracle::audit_tracker(sc, policy, cfg.tracker_options(), cfg.appearance_params());
  const auto full = run_tracker(sc, policy, cfg.tracker_options(), cfg.appearance_params());
  ++t.runs;
  t.transitions += rep.transitions;
  t.violations += rep.violations + full.shared_detections;
  if (full.records != rep.records) ++t.nondeterministic;
  const int n = static_cast<int>(sc.frames.size());
  for (int cut : {n / 3, (2 * n) / 3}) {
    if (cut <= 0) continue;
    Scenario prefix = sc;
    prefix.frames.resize(static_cast<std::size_t>(cut));
    const auto part = run_tracker(prefix, policy, cfg.tracker_options(), cfg.appearance_params());
    if (part.records != oracle::head(full.records, sc.frames[static_cast<std::size_t>(cut)].index)) ++t.causality_breaks;
  }
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const RunConfig cfg;
  geometry();
  fusion();
  assignment();
  svm();

  PolicySet small_policy;
  const auto small = convergence(cfg, small_policy);

  const std::vector<AblationVariant> variants{
      {ProjectionScheme::PointCloud, FusionScheme::PointCloud, true},
      {ProjectionScheme::Ipm, FusionScheme::PointCloud, true},
      {ProjectionScheme::PointCloud, FusionScheme::Distance, true},
      {ProjectionScheme::PointCloud, FusionScheme::PointCloud, false},
  };
  std::vector<Scenario> tested;
  const auto ablation = run_ablation(cfg, variants, [&](const AblationVariant& v, const Scenario& sc, const TrackRun&,
                                                         std::span<const TrackRecord>) {
    if (v == variants.front()) tested.push_back(sc);
  });
  const auto& main_variant = ablation.at(variants.front());

  const auto circling = orbit(cfg, main_variant.policy);
  metrics();
  ablation_orderings(ablation);

  AuditTotals totals;
  audit(totals, small, small_policy, cfg);
  audit(totals, circling, main_variant.policy, cfg);
  for (const auto& v : ablation.variants) {
    RunConfig vc = cfg;
    vc.proposals.projection = v.variant.projection;
    vc.proposals.fusion = v.variant.fusion;
    vc.policy.use_global_offsets = v.variant.global_offsets;
    for (const auto& sc : tested) audit(totals, sc, v.policy, vc);
  }
  verdict(9, totals.violations == 0 && totals.causality_breaks == 0 && totals.nondeterministic == 0,
          fmt::format("{} full runs, {} transitions, {} rule violations, {} causality breaks, {} nondeterministic runs",
                      totals.runs, totals.transitions, totals.violations, totals.causality_breaks,
                      totals.nondeterministic));

  fmt::print("{} of 9 criteria failed, {:.0f} s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
