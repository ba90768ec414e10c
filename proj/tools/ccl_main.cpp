// Command-line front end: experiment runner and dataset tooling.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccl/dataset_io.hpp"
#include "ccl/experiments.hpp"
#include "ccl/ingest.hpp"
#include "ccl/version.hpp"

namespace {

enum ExitCode { kOk = 0, kThresholds = 1, kConfig = 2, kRuntime = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> out;
  std::optional<std::size_t> trial;
  std::optional<std::size_t> workers;
};

void add_run_options(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config, "Experiment config (JSON)")->required();
  cmd->add_option("--seed", c.seed, "Override the master seed");
  cmd->add_option("--trials", c.trials, "Override the number of trials")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "Override the output directory");
  cmd->add_option("--trial", c.trial, "Run only this trial index");
  cmd->add_option("--workers", c.workers, "Worker threads (default: CCL_WORKERS or all cores)")
      ->check(CLI::PositiveNumber);
}

ccl::LogLevel g_level = ccl::LogLevel::Info;

void log_line(ccl::LogLevel level, const std::string& msg) {
  std::fprintf(stderr, "[%s] %s\n", level == ccl::LogLevel::Debug ? "debug" : "info", msg.c_str());
}

int run_experiment(const Common& c, std::optional<ccl::ExperimentKind> kind) {
  ccl::RunSettings settings;
  settings.seed = c.seed;
  settings.trials = c.trials;
  settings.out = c.out;
  settings.only_trial = c.trial;
  settings.workers = c.workers.value_or(ccl::default_worker_count());
  settings.log_level = g_level;
  settings.log = log_line;

  const auto doc = ccl::ConfigDoc::load(c.config);
  const ccl::Experiment exp(ccl::ConfigNode(doc), kind, settings);
  if (g_level != ccl::LogLevel::Quiet) {
    log_line(ccl::LogLevel::Info, "running " + ccl::experiment_name(exp.kind()) + " (seed " +
                                      std::to_string(exp.seed()) + ", " + std::to_string(exp.trials()) +
                                      " trials, " + std::to_string(settings.workers) + " workers)");
  }
  const auto start = std::chrono::steady_clock::now();
  const ccl::ExperimentOutput out = exp.run(settings);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ccl::write_experiment_output(out, exp.output());

  if (g_level != ccl::LogLevel::Quiet) {
    for (const auto& row : out.report.value("rows", nlohmann::json::array())) {
      std::printf("%-16s e_w %.4e +- %.4e   e_n %.4e +- %.4e\n", row["row"].get<std::string>().c_str(),
                  row["e_w"]["mean"].get<double>(), row["e_w"]["sd"].get<double>(),
                  row["e_n"]["mean"].get<double>(), row["e_n"]["sd"].get<double>());
    }
    for (const auto& chk : out.checks) {
      std::printf("%s  %s: %.6g (%s %.6g)\n", chk.passed() ? "PASS" : "FAIL", chk.name.c_str(), chk.value,
                  chk.upper ? "max" : "min", chk.limit);
    }
    std::printf("wrote %s (%.1f s)\n", exp.output().c_str(), secs);
  }
  return out.passed() ? kOk : kThresholds;
}

int validate_configs(const std::vector<std::string>& paths) {
  int status = kOk;
  for (const auto& p : paths) {
    try {
      const ccl::Experiment exp(ccl::ConfigNode(ccl::ConfigDoc::load(p)), std::nullopt);
      std::printf("%s: ok (%s, config hash %s)\n", p.c_str(), ccl::experiment_name(exp.kind()).c_str(),
                  ccl::config_hash(exp.effective_config()).c_str());
    } catch (const ccl::Error& e) {
      std::fprintf(stderr, "%s\n", e.what());
      status = kConfig;
    }
  }
  return status;
}

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string side = "right";
  std::string facing = "left";
  double fps = 30.0;
  double scale = ccl::kDefaultPixelScale;
  double floor = ccl::kDefaultConfidenceFloor;
  std::size_t window = 1;
};

int ingest_keypoints(const IngestArgs& a) {
  ccl::IngestOptions opt;
  opt.side = a.side == "left" ? ccl::BodySide::Left : ccl::BodySide::Right;
  opt.facing = a.facing == "left" ? ccl::Facing::Left : ccl::Facing::Right;
  opt.fps = a.fps;
  opt.scale = a.scale;
  opt.confidence_floor = a.floor;
  opt.smoothing_window = a.window;
  std::vector<ccl::HumanArmRecording> recs;
  for (const auto& in : a.inputs) {
    auto parsed = ccl::read_keypoints(in, opt.side);
    for (const auto& w : parsed.warnings) std::fprintf(stderr, "[warn] %s: %s\n", in.c_str(), w.c_str());
    ccl::HumanArmRecording rec;
    rec.frames = std::move(parsed.frames);
    rec.fps = opt.fps;
    rec.side = opt.side;
    rec.facing = opt.facing;
    recs.push_back(std::move(rec));
  }
  auto res = ccl::recordings_to_dataset(recs, opt);
  for (const auto& w : res.warnings) std::fprintf(stderr, "[warn] %s\n", w.c_str());
  ccl::save_dataset(a.out, res.dataset);
  const auto& l = res.arm.link_lengths();
  std::printf("%zu samples in %zu trajectories; link lengths %.6g %.6g %.6g\n", res.dataset.size(),
              res.dataset.trajectories.size(), l[0], l[1], l[2]);
  return kOk;
}

struct ToyArgs {
  std::size_t points = 150;
  std::uint64_t seed = 0;
  std::string policy = "limit_cycle";
  std::string out;
};

int generate_toy(const ToyArgs& a) {
  ccl::PolicySpec policy;
  if (a.policy == "linear") {
    policy = ccl::default_linear_policy();
  } else if (a.policy == "limit_cycle") {
    policy = ccl::LimitCyclePolicy{};
  } else {
    policy = ccl::SinusoidalPolicy{};
  }
  auto ds = ccl::generate_toy_dataset(a.points, a.seed, policy);
  ccl::save_dataset(a.out, ds);
  std::printf("wrote %zu samples to %s\n", ds.size(), a.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint-consistent learning of null-space projections from demonstrations"};
  app.set_version_flag("--version", std::string(ccl::kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  auto* quiet = app.add_flag("-q,--quiet", "Only report errors");
  auto* verbose = app.add_flag("-v,--verbose", "Log every trial");
  quiet->excludes(verbose);

  Common common;
  std::optional<ccl::ExperimentKind> chosen;
  bool generic_run = false;
  for (auto kind : ccl::all_experiments()) {
    auto* cmd = app.add_subcommand(ccl::experiment_name(kind), "Run the " + ccl::experiment_name(kind) + " experiment");
    add_run_options(cmd, common);
    cmd->callback([&chosen, kind] { chosen = kind; });
  }
  auto* run = app.add_subcommand("run", "Run the experiment named in the config");
  add_run_options(run, common);
  run->callback([&generic_run] { generic_run = true; });

  std::vector<std::string> validate_paths;
  auto* validate = app.add_subcommand("validate-config", "Check configs without running them");
  validate->add_option("configs", validate_paths, "Config files")->required();

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Convert keypoint JSON into a dataset CSV");
  ingest->add_option("inputs", ingest_args.inputs, "Keypoint files or directories, one per recording")->required();
  ingest->add_option("-o,--out", ingest_args.out, "Output dataset CSV")->required();
  ingest->add_option("--side", ingest_args.side)->check(CLI::IsMember({"left", "right"}));
  ingest->add_option("--facing", ingest_args.facing)->check(CLI::IsMember({"left", "right"}));
  ingest->add_option("--fps", ingest_args.fps)->check(CLI::PositiveNumber);
  ingest->add_option("--scale", ingest_args.scale, "Pixels per length unit")->check(CLI::PositiveNumber);
  ingest->add_option("--confidence-floor", ingest_args.floor)->check(CLI::Range(0.0, 1.0));
  ingest->add_option("--smooth", ingest_args.window, "Moving-average window (odd)");

  ToyArgs toy_args;
  auto* gen = app.add_subcommand("generate-toy", "Write a toy-problem dataset CSV");
  gen->add_option("--points", toy_args.points)->check(CLI::PositiveNumber);
  gen->add_option("--seed", toy_args.seed);
  gen->add_option("--policy", toy_args.policy)->check(CLI::IsMember({"linear", "limit_cycle", "sinusoidal"}));
  gen->add_option("-o,--out", toy_args.out)->required();

  CLI11_PARSE(app, argc, argv);
  if (*quiet) g_level = ccl::LogLevel::Quiet;
  if (*verbose) g_level = ccl::LogLevel::Debug;

  try {
    if (chosen || generic_run) return run_experiment(common, chosen);
    if (*validate) return validate_configs(validate_paths);
    if (*ingest) return ingest_keypoints(ingest_args);
    if (*gen) return generate_toy(toy_args);
  } catch (const ccl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const ccl::ParseError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
