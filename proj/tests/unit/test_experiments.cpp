#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "ccl/experiments.hpp"

namespace {

using namespace ccl;
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentOutput run_config(const std::string& name, std::size_t trials, std::size_t workers,
                            std::optional<std::size_t> only = std::nullopt) {
  auto doc = ConfigDoc::load(fs::path(CCL_SOURCE_DIR) / "configs" / name);
  RunSettings s;
  s.trials = trials;
  s.workers = workers;
  s.only_trial = only;
  s.log_level = LogLevel::Quiet;
  Experiment exp(doc, std::nullopt, s);
  return exp.run(s);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> seen(100);
  parallel_for(100, 4, [&](std::size_t i) { seen[i]++; });
  for (auto& s : seen) EXPECT_EQ(s.load(), 1);
}

TEST(ParallelFor, RethrowsLowestIndexError) {
  try {
    parallel_for(10, 3, [](std::size_t i) {
      if (i == 7 || i == 4) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "fail 4");
  }
}

TEST(ExperimentRuns, ToyIsByteIdenticalAcrossRunsAndWorkers) {
  auto a = run_config("toy.json", 4, 1);
  auto b = run_config("toy.json", 4, 3);
  auto dir_a = fs::temp_directory_path() / "ccl_det_a";
  auto dir_b = fs::temp_directory_path() / "ccl_det_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  write_experiment_output(a, dir_a);
  write_experiment_output(b, dir_b);
  EXPECT_EQ(slurp(dir_a / "trials.csv"), slurp(dir_b / "trials.csv"));
  EXPECT_EQ(slurp(dir_a / "report.json"), slurp(dir_b / "report.json"));
  EXPECT_TRUE(a.passed());
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST(ExperimentRuns, SingleTrialMatchesFullRun) {
  auto full = run_config("toy.json", 3, 1);
  auto one = run_config("toy.json", 3, 1, 2);
  ASSERT_FALSE(one.trials.empty());
  for (const auto& r : one.trials) {
    EXPECT_EQ(r.trial, 2u);
    bool found = false;
    for (const auto& f : full.trials) {
      if (f.row == r.row && f.trial == r.trial) {
        found = true;
        EXPECT_EQ(f.seed, r.seed);
        EXPECT_EQ(f.e_w, r.e_w);
        EXPECT_EQ(f.e_n, r.e_n);
      }
    }
    EXPECT_TRUE(found);
  }
}

TEST(ExperimentRuns, ReportCarriesProvenance) {
  auto out = run_config("toy.json", 2, 1);
  EXPECT_EQ(out.report["experiment"], "toy");
  EXPECT_EQ(out.report["seed"], 20190101);
  EXPECT_EQ(out.report["trials"], 2);
  EXPECT_EQ(out.report["config_hash"].get<std::string>().size(), 16u);
  ASSERT_EQ(out.report["rows"].size(), 3u);
  EXPECT_EQ(out.trials.size(), 6u);
}

TEST(ExperimentRuns, IngestLearnRecoversProjector) {
  auto out = run_config("ingest_learn.json", 1, 1);
  EXPECT_TRUE(out.passed());
  bool has_keypoints = false;
  for (const auto& [name, body] : out.files) has_keypoints = has_keypoints || name.rfind("keypoints/", 0) == 0;
  EXPECT_TRUE(has_keypoints);
}

TEST(ExperimentRuns, ThresholdFailureIsReported) {
  auto doc = ConfigDoc::parse(R"({
    "experiment": "toy", "seed": 1, "trials": 2,
    "toy": {"train_points": 3, "test_points": 50, "policies": ["sinusoidal"]},
    "thresholds": {"e_n_mean_max": -1}
  })", "fail.json");
  Experiment exp(doc, std::nullopt);
  RunSettings s;
  s.log_level = LogLevel::Quiet;
  auto out = exp.run(s);
  EXPECT_FALSE(out.passed());
}

}  // namespace
