#include <cmath>

#include <gtest/gtest.h>

#include "ccl/learning.hpp"
#include "ccl/metrics.hpp"

namespace {

using namespace ccl;

// Direction angle in [0, pi) of a 1 x 2 constraint row.
double row_angle(const Matrix& a) {
  double t = std::atan2(a(0, 1), a(0, 0));
  if (t < 0) t += kPi;
  if (t >= kPi) t -= kPi;
  return t;
}

// For a unit row a, N = I - a a^T, so the objective has a closed form.
double unit_row_objective(const Eigen::Vector2d& a, const std::vector<Observation>& obs) {
  double total = 0.0;
  for (const auto& s : obs) {
    const Vector d = s.u - s.pi;
    total += std::abs(s.pi.dot(d) - a.dot(s.pi) * a.dot(d));
  }
  return total;
}

double angle_gap(double a, double b) {
  double d = std::fmod(std::abs(a - b), kPi);
  return std::min(d, kPi - d);
}

TEST(Consistency, TrueModelIsZero) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Dataset ds = generate_toy_dataset(150, seed, default_linear_policy());
    auto obs = ds.observations();
    auto model = ConstraintModel::constant(ds.truth().front().a);
    const Vector sigma = action_std(obs);
    EXPECT_LE(consistency_objective(model, obs) / (150.0 * sigma.squaredNorm()), 1e-10);
  }
}

TEST(Consistency, LoopOracle) {
  Dataset ds = generate_toy_dataset(40, 5, SinusoidalPolicy{});
  auto obs = ds.observations();
  Matrix a(1, 2);
  a << 0.3, 0.9;
  double expected = 0.0;
  const Matrix nn = Matrix::Identity(2, 2) - a.transpose() * (a * a.transpose()).inverse() * a;
  for (const auto& s : obs) expected += std::abs(s.pi.dot(nn * (s.u - s.pi)));
  EXPECT_NEAR(consistency_objective(ConstraintModel::constant(a), obs), expected, 1e-12);
}

TEST(Consistency, CachedObjectiveAgreesWithGeneric) {
  Rng rng(6);
  Dataset ds = generate_toy_dataset(60, 8, LimitCyclePolicy{});
  auto obs = ds.observations();
  ConsistencyObjective f(obs, SphericalRepresentation{2}, 1);
  ASSERT_EQ(f.parameter_count(), 1);
  for (int i = 0; i < 50; ++i) {
    Vector p(1);
    p << uniform(rng, -kPi, kPi);
    EXPECT_NEAR(f(p), consistency_objective(f.model(p), obs), 1e-10);
  }

  auto setup = ArmDemoSetup::three_link_default();
  setup.points_per_trajectory = 10;
  Dataset arm = generate_arm_dataset(setup, axis_selection(parse_axes("x,y")), 3, 2);
  auto aobs = arm.observations();
  ConsistencyObjective g(aobs, SelectionRepresentation{jacobian_features(setup.arm)}, 2);
  for (int i = 0; i < 50; ++i) {
    Vector p(g.parameter_count());
    for (Index j = 0; j < p.size(); ++j) p(j) = uniform(rng, -kPi, kPi);
    const double generic = consistency_objective(g.model(p), aobs);
    EXPECT_NEAR(g(p), generic, 1e-9 * std::max(1.0, generic));
  }
}

TEST(LearnToy, AgreesWithGridSearchOracle) {
  OptimizerConfig opt;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Dataset ds = generate_toy_dataset(150, seed, default_linear_policy());
    auto obs = ds.observations();
    opt.seed = derive_seed(seed, 3);
    LearnedConstraint fit = learn_constraint(obs, 1, SphericalRepresentation{2}, opt);
    double best_t = 0.0, best_v = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 1800; ++step) {
      const double t = deg2rad(0.1 * step);
      const double v = unit_row_objective(Eigen::Vector2d(std::cos(t), std::sin(t)), obs);
      if (v < best_v) {
        best_v = v;
        best_t = t;
      }
    }
    const double learned = row_angle(fit.model.matrix(obs.front().x));
    EXPECT_LE(rad2deg(angle_gap(learned, best_t)), 0.5) << "seed " << seed;
    EXPECT_LE(fit.objective_value, best_v + 1e-12);
  }
}

TEST(LearnToy, SweepPicksOneRow) {
  Dataset ds = generate_toy_dataset(100, 4, SinusoidalPolicy{});
  OptimizerConfig opt;
  opt.seed = 4;
  auto fit = learn_constraint_sweep(ds.observations(), SphericalRepresentation{2}, opt);
  EXPECT_EQ(fit.model.k(), 1);
}

TEST(LearnToy, ZeroPriorIsFullyDegenerate) {
  Dataset ds = generate_toy_dataset(20, 4, SinusoidalPolicy{});
  auto obs = ds.observations();
  for (auto& s : obs) s.pi.setZero();
  auto model = ConstraintModel::constant(ds.truth().front().a);
  EXPECT_DOUBLE_EQ(degenerate_prior_fraction(model, obs), 1.0);
}

TEST(LearnToy, BadKRejected) {
  Dataset ds = generate_toy_dataset(10, 4);
  auto obs = ds.observations();
  EXPECT_THROW(ConsistencyObjective(obs, SphericalRepresentation{2}, 3), DimensionError);
  std::vector<Observation> none;
  EXPECT_THROW(consistency_objective(ConstraintModel::constant(Matrix::Identity(1, 2)), none),
               DimensionError);
}

TEST(LearnArm, RecoversProjectorForPositionConstraint) {
  auto setup = ArmDemoSetup::three_link_default();
  Matrix lambda = axis_selection(parse_axes("x,y"));
  Dataset ds = generate_arm_dataset(setup, lambda, 10, 31);
  auto obs = ds.observations();
  OptimizerConfig opt;
  opt.seed = 9;
  auto rep = SelectionRepresentation{jacobian_features(setup.arm)};
  auto fit = learn_constraint(obs, 2, rep, opt);
  ConstraintModel truth = SelectionConstraint(lambda, jacobian_features(setup.arm));
  EXPECT_LE(max_projector_distance(fit.model, truth, obs), 1e-6);
}

struct SelectionCase {
  const char* axes;
  unsigned pattern;
};

class ExhaustiveSelection : public ::testing::TestWithParam<SelectionCase> {};

TEST_P(ExhaustiveSelection, FindsTruePattern) {
  const auto c = GetParam();
  auto setup = ArmDemoSetup::three_link_default();
  setup.points_per_trajectory = 20;
  Matrix lambda = axis_selection(parse_axes(c.axes));
  Dataset ds = generate_arm_dataset(setup, lambda, 5, 12);
  std::vector<JointState> states;
  std::vector<Vector> w;
  double scale = 0.0;
  for (const auto& t : ds.trajectories) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      states.push_back(t.samples[i].x);
      w.push_back(t.truth[i].w);
      scale += t.truth[i].w.squaredNorm();
    }
  }
  auto feature = jacobian_features(setup.arm);

  auto with_k = learn_selection_exhaustive(states, w, feature, lambda.rows());
  ASSERT_TRUE(with_k.pattern.has_value());
  // every row of the true selection annihilates w
  EXPECT_LE(with_k.objective_value, 1e-12 * scale);
  EXPECT_EQ(*with_k.pattern, c.pattern);
  EXPECT_EQ(with_k.lambda, lambda);

  auto free_k = learn_selection_exhaustive(states, w, feature, std::nullopt);
  EXPECT_EQ(*free_k.pattern, c.pattern);
}

INSTANTIATE_TEST_SUITE_P(AllCases, ExhaustiveSelection,
                         ::testing::Values(SelectionCase{"x", 0b001}, SelectionCase{"y", 0b010},
                                           SelectionCase{"theta", 0b100},
                                           SelectionCase{"x,y", 0b011},
                                           SelectionCase{"x,theta", 0b101},
                                           SelectionCase{"y,theta", 0b110}),
                         [](const auto& info) {
                           std::string s = info.param.axes;
                           for (auto& ch : s)
                             if (ch == ',') ch = '_';
                           return s;
                         });

TEST(SelectionObjective, LoopOracle) {
  PlanarArm arm({1.0, 2.0, 1.5});
  auto feature = jacobian_features(arm);
  Rng rng(3);
  std::vector<JointState> states;
  std::vector<Vector> w;
  for (int i = 0; i < 10; ++i) {
    states.push_back(Vector::Random(3));
    w.push_back(Vector::Random(3));
  }
  Matrix lambda = axis_selection(parse_axes("x,theta"));
  double expected = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    Matrix a = lambda * arm.jacobian(states[i]);
    Matrix p = a.transpose() * (a * a.transpose()).inverse() * a;
    expected += w[i].dot(p * w[i]);
  }
  EXPECT_NEAR(selection_objective(lambda, feature, states, w), expected, 1e-10);
}

TEST(LearnSelectionMatrix, RecoversRowSpan) {
  auto setup = ArmDemoSetup::three_link_default();
  setup.points_per_trajectory = 20;
  Matrix lambda = axis_selection(parse_axes("x,y"));
  Dataset ds = generate_arm_dataset(setup, lambda, 5, 13);
  std::vector<JointState> states;
  std::vector<Vector> w;
  for (const auto& t : ds.trajectories) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      states.push_back(t.samples[i].x);
      w.push_back(t.truth[i].w);
    }
  }
  OptimizerConfig opt;
  opt.seed = 5;
  auto fit = learn_selection_matrix(states, w, jacobian_features(setup.arm), 2, opt);
  // Same row span: the rows of fit.lambda have no theta component.
  EXPECT_LE(fit.lambda.col(2).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(fit.objective_value, 1e-12);
}

}  // namespace
