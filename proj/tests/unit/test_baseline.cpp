#include <cmath>

#include <gtest/gtest.h>

#include "ccl/baseline.hpp"

namespace {

using namespace ccl;

std::vector<Observation> unconstrained_samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Observation> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(2);
    x << uniform(rng, -1, 1), uniform(rng, -1, 1);
    Vector u = eval_policy(SinusoidalPolicy{}, x);
    out.push_back({x, u, u});
  }
  return out;
}

TEST(Rbf, FeaturesIncludeBias) {
  RbfModel m;
  m.centers = Matrix::Zero(2, 2);
  m.centers(0, 1) = 1.0;
  m.width = 1.0;
  Vector x = Vector::Zero(2);
  Vector f = m.features(x);
  ASSERT_EQ(f.size(), 3);
  EXPECT_DOUBLE_EQ(f(0), 1.0);
  EXPECT_DOUBLE_EQ(f(1), std::exp(-0.5));
  EXPECT_DOUBLE_EQ(f(2), 1.0);
}

TEST(SeparationObjective, LoopOracle) {
  auto data = unconstrained_samples(30, 2);
  RbfModel m;
  m.centers = Matrix::Random(2, 4);
  m.width = 0.7;
  m.weights = Matrix::Random(2, 5);
  double expected = 0.0;
  for (const auto& s : data) {
    Vector w = m(s.x);
    Matrix p = w * w.transpose() / w.squaredNorm();
    expected += (p * s.u - w).squaredNorm();
  }
  EXPECT_NEAR(separation_objective(m, data), expected, 1e-10 * std::max(1.0, expected));
}

TEST(Baseline, UnconstrainedActionsAreAllNullSpace) {
  // with no constraint u = w, so the separation should keep all of u
  auto data = unconstrained_samples(200, 3);
  BaselineConfig cfg;
  cfg.num_centers = 40;
  auto res = baseline_separate_nullspace(data, cfg);
  ASSERT_EQ(res.w_hat.size(), data.size());
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    err += (res.w_hat[i] - data[i].u).squaredNorm();
    ref += data[i].u.squaredNorm();
    EXPECT_LE((res.w_hat[i] + res.v_hat[i] - data[i].u).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_LE(err / ref, 1e-2);
  EXPECT_LE(res.objective, 1e-2 * ref);
}

TEST(Baseline, Deterministic) {
  auto data = unconstrained_samples(50, 4);
  auto a = baseline_separate_nullspace(data);
  auto b = baseline_separate_nullspace(data);
  EXPECT_EQ(a.model.weights, b.model.weights);
}

TEST(Baseline, TooFewSamples) {
  auto data = unconstrained_samples(1, 4);
  EXPECT_THROW(baseline_separate_nullspace(data), DimensionError);
}

}  // namespace
