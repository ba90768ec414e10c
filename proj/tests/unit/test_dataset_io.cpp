#include <sstream>

#include <gtest/gtest.h>

#include "ccl/dataset_io.hpp"

namespace {

using namespace ccl;

TEST(DatasetCsv, RoundTripIsExact) {
  auto setup = ArmDemoSetup::three_link_default();
  setup.points_per_trajectory = 12;
  Dataset ds = generate_arm_dataset(setup, axis_selection(parse_axes("x,y")), 3, 4);
  std::stringstream ss;
  write_dataset_csv(ss, ds);
  Dataset back = read_dataset_csv(ss);
  ASSERT_EQ(back.trajectories.size(), 3u);
  for (std::size_t t = 0; t < 3; ++t) {
    ASSERT_EQ(back.trajectories[t].size(), 12u);
    EXPECT_DOUBLE_EQ(back.trajectories[t].dt, setup.dt);
    for (std::size_t i = 0; i < 12; ++i) {
      EXPECT_EQ(back.trajectories[t].samples[i].x, ds.trajectories[t].samples[i].x);
      EXPECT_EQ(back.trajectories[t].samples[i].u, ds.trajectories[t].samples[i].u);
      EXPECT_EQ(back.trajectories[t].truth[i].w, ds.trajectories[t].truth[i].w);
      EXPECT_EQ(back.trajectories[t].truth[i].b, ds.trajectories[t].truth[i].b);
    }
  }
}

TEST(DatasetCsv, HeaderNamesColumns) {
  Dataset ds = generate_toy_dataset(2, 1);
  std::stringstream ss;
  write_dataset_csv(ss, ds);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "t,x1,x2,u1,u2,v1,v2,w1,w2,b1");
}

TEST(DatasetCsv, MalformedRowReportsLine) {
  std::stringstream ss("t,x1,u1\n0,1,2\n0.02,abc,3\n");
  try {
    read_dataset_csv(ss);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(DatasetCsv, SaveLoadWithSidecar) {
  auto dir = std::filesystem::temp_directory_path() / "ccl_dataset_io_test";
  std::filesystem::create_directories(dir);
  Dataset ds = generate_toy_dataset(10, 3);
  ds.meta.epsilon = 0.02;
  save_dataset(dir / "toy.csv", ds);
  EXPECT_TRUE(std::filesystem::exists(dir / "toy.json"));
  Dataset back = load_dataset(dir / "toy.csv");
  EXPECT_EQ(back.meta.seed, ds.meta.seed);
  EXPECT_EQ(back.meta.system, ds.meta.system);
  EXPECT_DOUBLE_EQ(back.meta.epsilon, 0.02);
  EXPECT_EQ(back.size(), 10u);
  std::filesystem::remove_all(dir);
}

TEST(DatasetCsv, AttachPriorEvaluatesPolicy) {
  Dataset ds = generate_toy_dataset(5, 3, SinusoidalPolicy{});
  for (auto& t : ds.trajectories)
    for (auto& s : t.samples) s.pi.resize(0);
  attach_prior(ds, SinusoidalPolicy{});
  for (const auto& s : ds.observations()) EXPECT_EQ(s.pi, eval_policy(SinusoidalPolicy{}, s.x));
}

}  // namespace
