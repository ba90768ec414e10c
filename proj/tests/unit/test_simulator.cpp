#include <cmath>

#include <gtest/gtest.h>

#include "ccl/metrics.hpp"
#include "ccl/simulator.hpp"

namespace {

using namespace ccl;

ConstraintModel arm_xy_model(const PlanarArm& arm) {
  return SelectionConstraint(axis_selection(parse_axes("x,y")), jacobian_features(arm));
}

TEST(Toy, SamplesRespectRanges) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    ToyProblem p = sample_toy_problem(SinusoidalPolicy{}, rng);
    EXPECT_GE(p.theta, 0.0);
    EXPECT_LT(p.theta, kPi);
    EXPECT_GE(p.target, -2.0);
    EXPECT_LE(p.target, 2.0);
  }
  Dataset ds = generate_toy_dataset(300, 7);
  for (const auto& s : ds.trajectories[0].samples) {
    EXPECT_LE(s.x.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Toy, DecompositionIdentities) {
  Dataset ds = generate_toy_dataset(500, 11, SinusoidalPolicy{});
  const auto obs = ds.observations();
  const auto truth = ds.truth();
  ASSERT_EQ(obs.size(), truth.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& gt = truth[i];
    EXPECT_LE((gt.v + gt.w - obs[i].u).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(gt.v.dot(gt.w), 0.0, 1e-12);
    EXPECT_NEAR(gt.w.dot(obs[i].u - gt.w), 0.0, 1e-12);
    EXPECT_NEAR((gt.a * gt.w)(0), 0.0, 1e-12);
    EXPECT_NEAR((gt.a * obs[i].u)(0), gt.b(0), 1e-12);
  }
}

TEST(Toy, SameSeedSameData) {
  Dataset a = generate_toy_dataset(50, 99);
  Dataset b = generate_toy_dataset(50, 99);
  Dataset c = generate_toy_dataset(50, 100);
  auto oa = a.observations(), ob = b.observations(), oc = c.observations();
  bool differs = false;
  for (std::size_t i = 0; i < oa.size(); ++i) {
    EXPECT_EQ(oa[i].x, ob[i].x);
    EXPECT_EQ(oa[i].u, ob[i].u);
    differs = differs || oa[i].u != oc[i].u;
  }
  EXPECT_TRUE(differs);
}

TEST(ComposeAction, ArmIdentities) {
  PlanarArm arm({10.0, 10.0, 10.0});
  auto model = arm_xy_model(arm);
  TaskPointAttractor task{arm, Eigen::Vector3d(3.0, 12.0, 0.0), 1.0};
  PointAttractor prior{1.0, Vector::Constant(3, 0.2)};
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    Vector x(3);
    x << uniform(rng, 0, 1), uniform(rng, 1, 2.5), uniform(rng, -1, 1);
    GroundTruth gt = compose_action(model, task, prior, x);
    ASSERT_EQ(gt.b.size(), 2);
    Vector u = gt.v + gt.w;
    EXPECT_LE(std::abs(gt.v.dot(gt.w)), 1e-10);
    EXPECT_LE(std::abs(gt.w.dot(u - gt.w)), 1e-10);
    EXPECT_LE((gt.a * gt.w).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((gt.a * u - gt.b).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Simulate, LengthAndDeterminism) {
  PlanarArm arm({10.0, 10.0, 10.0});
  auto model = arm_xy_model(arm);
  TaskPointAttractor task{arm, Eigen::Vector3d(0.0, 15.0, 0.0), 1.0};
  PointAttractor prior{1.0, Vector::Zero(3)};
  Vector x0(3);
  x0 << 0.1, 1.6, 0.1;
  Trajectory t1 = simulate_trajectory(model, task, prior, x0, 0.02, 1.0);
  Trajectory t2 = simulate_trajectory(model, task, prior, x0, 0.02, 1.0);
  ASSERT_EQ(t1.size(), 50u);
  ASSERT_TRUE(t1.has_truth());
  for (std::size_t i = 0; i < t1.size(); ++i) EXPECT_EQ(t1.samples[i].u, t2.samples[i].u);
  for (std::size_t i = 1; i < t1.size(); ++i) {
    Vector expected = t1.samples[i - 1].x + 0.02 * t1.samples[i - 1].u;
    EXPECT_LE((t1.samples[i].x - expected).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Simulate, RankCollapseAtStraightArm) {
  PlanarArm arm({10.0, 10.0, 10.0});
  auto model = arm_xy_model(arm);
  TaskPointAttractor task{arm, Eigen::Vector3d(0.0, 15.0, 0.0), 1.0};
  PointAttractor prior{1.0, Vector::Zero(3)};
  try {
    simulate_trajectory(model, task, prior, Vector::Zero(3), 0.02, 1.0);
    FAIL() << "expected RankCollapse";
  } catch (const RankCollapse& e) {
    EXPECT_EQ(e.step(), 0u);
  }
}

TEST(Simulate, BadStepRejected) {
  auto model = ConstraintModel::constant(Matrix::Identity(1, 2));
  EXPECT_THROW(simulate_trajectory(model, PointAttractor{1.0, Vector::Zero(1)}, SinusoidalPolicy{},
                                   Vector::Zero(2), 0.0, 1.0),
               DimensionError);
}

TEST(Noise, ZeroEpsilonIsIdentity) {
  Dataset ds = generate_toy_dataset(100, 3);
  Dataset noisy = add_noise(ds, {0.0, NoiseTarget::Actions}, 5);
  auto a = ds.observations(), b = noisy.observations();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].u, b[i].u);
}

TEST(Noise, VarianceScalesWithEpsilon) {
  Dataset ds = generate_toy_dataset(20000, 3, SinusoidalPolicy{});
  const double eps = 0.1;
  Dataset noisy = add_noise(ds, {eps, NoiseTarget::Actions}, 5);
  auto clean = ds.observations(), dirty = noisy.observations();
  const Vector sigma = action_std(clean);
  for (Index d = 0; d < 2; ++d) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      double e = (dirty[i].u(d) - clean[i].u(d)) / sigma(d);
      sum += e;
      sq += e * e;
    }
    const double n = static_cast<double>(clean.size());
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, eps, 0.005);
  }
}

TEST(Noise, PriorTargetLeavesActions) {
  Dataset ds = generate_toy_dataset(100, 3);
  Dataset noisy = add_noise(ds, {0.05, NoiseTarget::PriorPolicy}, 5);
  auto a = ds.observations(), b = noisy.observations();
  bool pi_changed = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].u, b[i].u);
    pi_changed = pi_changed || a[i].pi != b[i].pi;
  }
  EXPECT_TRUE(pi_changed);
  // ground truth keeps the clean prior
  auto ta = ds.truth(), tb = noisy.truth();
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(ta[i].pi, tb[i].pi);
}

TEST(ArmDataset, SizesAndDeterminism) {
  auto setup = ArmDemoSetup::three_link_default();
  Matrix lambda = axis_selection(parse_axes("x,y"));
  Dataset a = generate_arm_dataset(setup, lambda, 4, 77);
  Dataset b = generate_arm_dataset(setup, lambda, 4, 77);
  ASSERT_EQ(a.trajectories.size(), 4u);
  for (std::size_t t = 0; t < 4; ++t) {
    ASSERT_EQ(a.trajectories[t].size(), setup.points_per_trajectory);
    for (std::size_t i = 0; i < a.trajectories[t].size(); ++i) {
      EXPECT_EQ(a.trajectories[t].samples[i].u, b.trajectories[t].samples[i].u);
    }
  }
  const auto& x0 = a.trajectories[0].samples[0].x;
  for (Index i = 0; i < 3; ++i) {
    EXPECT_GE(x0(i), setup.start_min(i));
    EXPECT_LE(x0(i), setup.start_max(i));
  }
}

}  // namespace
