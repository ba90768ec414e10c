#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccl/config.hpp"
#include "ccl/metrics.hpp"

namespace ccl {

enum class ExperimentKind {
  Toy,
  Sweep,
  ThreeLink,
  CompareBaseline,
  RetargetObstacle,
  RetargetEmbodiment,
  IngestLearn,
};

/// "toy", "sweep", "three-link", ... (also accepts '_' for '-').
ExperimentKind parse_experiment_kind(const std::string& name);
std::string experiment_name(ExperimentKind kind);
/// Key of the experiment-specific config section ("three_link", ...).
std::string experiment_section(ExperimentKind kind);
std::vector<ExperimentKind> all_experiments();

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

struct RunSettings {
  std::optional<std::uint64_t> seed;   // overrides config "seed"
  std::optional<std::size_t> trials;   // overrides config "trials"
  std::optional<std::string> out;      // overrides config "output"
  /// Run only this trial index (same seed as in the full run).
  std::optional<std::size_t> only_trial;
  std::size_t workers = 1;
  LogLevel log_level = LogLevel::Info;
  std::function<void(LogLevel, const std::string&)> log;
};

/// Worker count from CCL_WORKERS, else the hardware concurrency (>= 1).
std::size_t default_worker_count();

struct ThresholdCheck {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool upper = true;  // value <= limit when true, value >= limit otherwise
  bool passed() const { return upper ? value <= limit : value >= limit; }
};

struct ExperimentOutput {
  nlohmann::json report;
  std::vector<MetricRecord> trials;
  /// Extra artifacts keyed by file name relative to the output directory.
  std::map<std::string, std::string> files;
  std::vector<ThresholdCheck> checks;
  bool passed() const;
};

/// Fully validated experiment description. Construction parses every
/// field and throws ConfigError with a file:line:column prefix.
class Experiment {
 public:
  /// `expected` set by a subcommand must agree with the config's
  /// "experiment" field when both are present.
  Experiment(const ConfigNode& root, std::optional<ExperimentKind> expected,
             const RunSettings& overrides = {});

  ExperimentKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t trials() const { return trials_; }
  const std::string& output() const { return output_; }
  /// Config after command-line overrides; this is what gets hashed.
  const nlohmann::json& effective_config() const { return effective_; }

  ExperimentOutput run(const RunSettings& settings) const;

  struct Impl;

 private:
  ExperimentKind kind_;
  std::uint64_t seed_ = 0;
  std::size_t trials_ = 1;
  std::string output_;
  nlohmann::json effective_;
  std::shared_ptr<const Impl> impl_;
};

/// Writes report.json, trials.csv and every extra file into `dir`.
void write_experiment_output(const ExperimentOutput& out, const std::filesystem::path& dir);

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. The first
/// exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace ccl
