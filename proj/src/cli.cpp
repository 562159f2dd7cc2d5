#include "m3ot/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "m3ot/config.hpp"
#include "m3ot/experiment.hpp"
#include "m3ot/io.hpp"
#include "m3ot/learning.hpp"
#include "m3ot/metrics.hpp"
#include "m3ot/plot.hpp"
#include "m3ot/tracker.hpp"

namespace m3ot {
namespace {

/// Flags shared by every subcommand; unset ones leave the config untouched.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> rig;
  std::optional<std::string> calibration;
  std::optional<std::string> projection;
  std::optional<std::string> fusion;
  bool no_global_offsets = false;
  std::string out;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config, "INI configuration file");
    cmd.add_option("--seed", seed, "scenario seed");
    cmd.add_option("--rig", rig, "rig preset")->check(CLI::IsMember(rig_preset_names()));
    cmd.add_option("--calibration", calibration, "calibration file, replaces the rig preset");
    cmd.add_option("--projection", projection, "localization scheme")->check(CLI::IsMember({"pointcloud", "ipm"}));
    cmd.add_option("--fusion", fusion, "proposal fusion scheme")->check(CLI::IsMember({"pointcloud", "distance"}));
    cmd.add_flag("--no-global-offsets", no_global_offsets, "drop the global position offset features");
    cmd.add_option("--out", out, "output file (default: standard output)");
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (seed) c.scenario.seed = *seed;
    if (rig) {
      c.scenario.rig = *rig;
      c.calibration_path.clear();
    }
    if (calibration) c.calibration_path = *calibration;
    if (projection) c.proposals.projection = projection_from_string(*projection);
    if (fusion) c.proposals.fusion = fusion_from_string(*fusion);
    if (no_global_offsets) c.policy.use_global_offsets = false;
    validate(c);
    return c;
  }
};

/// Writes to --out when set, otherwise to the fallback stream.
template <typename Writer>
void emit(const std::string& path, std::ostream& fallback, Writer write) {
  if (path.empty() || path == "-") {
    write(fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  write(f);
  f.close();
  if (!f) throw std::runtime_error("error writing '" + path + "'");
}

int cmd_simulate(const CommonFlags& flags, std::optional<int> duration, std::ostream& out) {
  RunConfig cfg = flags.resolve();
  if (duration) cfg.scenario.duration = *duration;
  validate(cfg.scenario);
  const auto sc = generate(cfg.scenario, cfg.resolve_rig());
  emit(flags.out, out, [&](std::ostream& o) { write_scenario(o, sc); });
  return kExitOk;
}

int cmd_rig(const CommonFlags& flags, std::ostream& out) {
  const auto rig = flags.resolve().resolve_rig();
  emit(flags.out, out, [&](std::ostream& o) { write_calibration(o, rig); });
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, const std::vector<std::string>& paths, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = flags.resolve();
  std::vector<Scenario> train;
  for (const auto& p : paths) train.push_back(load_scenario(p));
  const SensorRig rig = train.empty() ? cfg.resolve_rig() : train.front().rig;
  for (const auto& sc : train)
    if (sc.rig.camera_ids() != rig.camera_ids()) throw InvalidConfig("training scenarios use different camera sets");
  const auto result = learn_policies(train, PolicySet::initial(rig, cfg.policy), cfg.learning_options());
  emit(flags.out, out, [&](std::ostream& o) { write_policy(o, result.policy); });

  const auto& d = result.diagnostics;
  fmt::print(err, "epochs {} converged {} best_epoch {}\nmistakes per epoch: {}\n", d.epochs, d.converged ? "yes" : "no",
             d.best_epoch, fmt::join(d.mistakes_per_epoch, " "));
  for (const auto& [cam, n] : d.lost_samples) fmt::print(err, "camera {}: {} lost-state samples\n", cam, n);
  for (int cam : d.degenerate_cameras) fmt::print(err, "camera {}: conflicting training labels dropped\n", cam);
  if (!d.converged) {
    fmt::print(err, "policy learning did not converge within {} epochs; wrote the best epoch's policy\n",
               cfg.policy.max_epochs);
    return kExitNonConvergence;
  }
  return kExitOk;
}

int cmd_track(const CommonFlags& flags, const std::string& scenario_path, std::optional<std::string> policy_path,
              std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  const auto sc = load_scenario(scenario_path.empty() ? cfg.scenario_path : scenario_path);
  if (!policy_path && !cfg.policy_path.empty()) policy_path = cfg.policy_path;
  PolicySet policy = PolicySet::initial(sc.rig, cfg.policy);
  if (policy_path) {
    policy = load_policy(*policy_path);
    if (policy.params.use_global_offsets != cfg.policy.use_global_offsets)
      throw InvalidConfig(fmt::format("policy was learned with global offsets {}, run asks for {}",
                                      policy.params.use_global_offsets ? "on" : "off",
                                      cfg.policy.use_global_offsets ? "on" : "off"));
    for (int id : sc.rig.camera_ids())
      if (!policy.active.count(id)) throw InvalidConfig(fmt::format("policy has no classifiers for camera {}", id));
    policy.params = cfg.policy;
  }
  const auto run = run_tracker(sc, policy, cfg.tracker_options(), cfg.appearance_params());
  const auto records = interpolate_gaps(run.records, cfg.max_interpolation_gap);
  emit(flags.out, out, [&](std::ostream& o) { write_tracks(o, records); });
  return kExitOk;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& truth_path, const std::string& tracks_path,
                 std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  const auto truth = load_scenario(truth_path);
  const auto tracks = load_tracks(tracks_path);
  const auto report = evaluate(truth, tracks, cfg.evaluation);
  emit(flags.out, out, [&](std::ostream& o) { write_report(o, report); });
  return kExitOk;
}

int cmd_plot(const CommonFlags& flags, const std::string& tracks_path, const std::string& truth_path,
             const std::string& title, std::ostream& out) {
  flags.resolve();
  const auto tracks = load_tracks(tracks_path);
  std::optional<Scenario> truth;
  if (!truth_path.empty()) truth = load_scenario(truth_path);
  PlotOptions opt;
  opt.title = title;
  emit(flags.out, out, [&](std::ostream& o) { write_svg(o, tracks, truth ? &*truth : nullptr, opt); });
  return kExitOk;
}

int cmd_ablate(const CommonFlags& flags, const std::vector<std::string>& only, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = flags.resolve();
  std::vector<AblationVariant> variants;
  for (const auto& v : all_variants())
    if (only.empty() || std::find(only.begin(), only.end(), v.name()) != only.end()) variants.push_back(v);
  if (variants.empty()) throw InvalidConfig("no ablation variant matches --only");
  const auto result = run_ablation(cfg, variants, [&](const AblationVariant& v, const Scenario& sc, const TrackRun&,
                                                      std::span<const TrackRecord>) {
    fmt::print(err, "{} seed {}\n", v.name(), sc.seed);
  });
  emit(flags.out, out, [&](std::ostream& o) { write_ablation_table(o, result); });
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-camera vehicle tracking: simulate, train, track, evaluate, plot, ablate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "m3ot 1.0");
  app.footer(
      "Exit codes: 0 ok, 1 other error, 2 malformed input file, 3 invalid configuration or arguments,\n"
      "4 policy learning did not converge, 5 frame mismatch between tracks and truth.");

  CommonFlags flags;
  std::optional<int> duration;
  std::vector<std::string> train_paths, only;
  std::string scenario_path, truth_path, tracks_path, title;
  std::optional<std::string> policy_path;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic scenario file");
  flags.attach(*sim);
  sim->add_option("--duration", duration, "frames")->check(CLI::PositiveNumber);

  auto* rig = app.add_subcommand("rig", "write the calibration file of a rig");
  flags.attach(*rig);

  auto* train = app.add_subcommand("train", "learn a policy from scenario files");
  flags.attach(*train);
  train->add_option("scenarios", train_paths, "training scenario files")->check(CLI::ExistingFile);

  auto* track = app.add_subcommand("track", "track a scenario file");
  flags.attach(*track);
  track->add_option("scenario", scenario_path, "scenario file (default: the config's run.scenario)");
  track->add_option("--policy", policy_path, "policy file (default: the config's run.policy, else the initial policy)");

  auto* eval = app.add_subcommand("evaluate", "CLEAR MOT metrics of a track file against a scenario's truth");
  flags.attach(*eval);
  eval->add_option("truth", truth_path, "scenario file")->required();
  eval->add_option("tracks", tracks_path, "track file")->required();

  auto* plot = app.add_subcommand("plot", "top-down SVG of a track file");
  flags.attach(*plot);
  plot->add_option("tracks", tracks_path, "track file")->required();
  plot->add_option("--truth", truth_path, "scenario file whose ground truth is drawn underneath");
  plot->add_option("--title", title, "plot title");

  auto* ablate = app.add_subcommand("ablate", "projection x fusion x offset-feature ablation table");
  flags.attach(*ablate);
  ablate->add_option("--only", only, "restrict to variants named like pointcloud/distance/offsets-on");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "m3ot: " << e.what() << "\n";
    return kExitInvalidConfig;
  }

  try {
    if (*sim) return cmd_simulate(flags, duration, out);
    if (*rig) return cmd_rig(flags, out);
    if (*train) return cmd_train(flags, train_paths, out, err);
    if (*track) return cmd_track(flags, scenario_path, policy_path, out);
    if (*eval) return cmd_evaluate(flags, truth_path, tracks_path, out);
    if (*plot) return cmd_plot(flags, tracks_path, truth_path, title, out);
    if (*ablate) return cmd_ablate(flags, only, out, err);
  } catch (const ParseError& e) {
    err << "m3ot: parse error: " << e.what() << "\n";
    return kExitParseError;
  } catch (const InvalidConfig& e) {
    err << "m3ot: invalid configuration: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const UnknownPreset& e) {
    err << "m3ot: invalid configuration: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const FrameMismatch& e) {
    err << "m3ot: frame mismatch: " << e.what() << "\n";
    return kExitFrameMismatch;
  } catch (const OutOfOrderFrame& e) {
    err << "m3ot: frame order: " << e.what() << "\n";
    return kExitFrameMismatch;
  } catch (const std::exception& e) {
    err << "m3ot: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace m3ot
