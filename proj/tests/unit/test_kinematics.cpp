#include <cmath>
#include <complex>
#include <numeric>

#include <gtest/gtest.h>

#include "ccl/kinematics.hpp"
#include "ccl/random.hpp"

namespace {

using namespace ccl;

// End-effector position as a sum of complex phasors; independent of the
// library's accumulation loop.
std::complex<double> phasor_tip(const std::vector<double>& links, const Vector& q) {
  std::complex<double> tip{0.0, 0.0};
  double heading = 0.0;
  for (std::size_t i = 0; i < links.size(); ++i) {
    heading += q(static_cast<Index>(i));
    tip += std::polar(links[i], heading);
  }
  return tip;
}

Vector random_q(Index n, Rng& rng) {
  Vector q(n);
  for (Index i = 0; i < n; ++i) q(i) = uniform(rng, -kPi, kPi);
  return q;
}

TEST(Kinematics, StraightArmAlongX) {
  PlanarArm arm({1.0, 1.0, 1.0});
  auto pose = arm.forward_kinematics(Vector::Zero(3));
  EXPECT_DOUBLE_EQ(pose.x, 3.0);
  EXPECT_DOUBLE_EQ(pose.y, 0.0);
  EXPECT_DOUBLE_EQ(pose.theta, 0.0);
}

TEST(Kinematics, ShoulderQuarterTurnPointsUp) {
  PlanarArm arm({1.0, 1.0, 1.0});
  Vector q(3);
  q << kPi / 2, 0.0, 0.0;
  auto pose = arm.forward_kinematics(q);
  EXPECT_NEAR(pose.x, 0.0, 1e-15);
  EXPECT_NEAR(pose.y, 3.0, 1e-15);
  EXPECT_NEAR(pose.theta, kPi / 2, 1e-15);
}

TEST(Kinematics, ForwardKinematicsMatchesPhasorSum) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + trial % 7;
    std::vector<double> links(static_cast<std::size_t>(n));
    for (auto& l : links) l = uniform(rng, 0.1, 20.0);
    PlanarArm arm(links);
    Vector q = random_q(n, rng);
    auto pose = arm.forward_kinematics(q);
    auto tip = phasor_tip(links, q);
    EXPECT_NEAR(pose.x, tip.real(), 1e-12);
    EXPECT_NEAR(pose.y, tip.imag(), 1e-12);
    EXPECT_NEAR(std::cos(pose.theta), std::cos(q.sum()), 1e-12);
    EXPECT_NEAR(std::sin(pose.theta), std::sin(q.sum()), 1e-12);
    EXPECT_GT(pose.theta, -kPi);
    EXPECT_LE(pose.theta, kPi);
  }
}

TEST(Kinematics, JointPositionsEndAtTip) {
  PlanarArm arm({10.0, 5.0, 2.0});
  Vector q(3);
  q << 0.3, -1.1, 2.0;
  auto pts = arm.joint_positions(q);
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts.front(), Eigen::Vector2d::Zero());
  auto pose = arm.forward_kinematics(q);
  EXPECT_NEAR(pts.back().x(), pose.x, 1e-12);
  EXPECT_NEAR(pts.back().y(), pose.y, 1e-12);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_NEAR((pts[i] - pts[i - 1]).norm(), arm.link_lengths()[i - 1], 1e-12);
  }
}

TEST(Kinematics, JacobianMatchesCentralDifferences) {
  Rng rng(5);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + trial % 6;
    std::vector<double> links(static_cast<std::size_t>(n));
    for (auto& l : links) l = uniform(rng, 0.5, 15.0);
    PlanarArm arm(links);
    Vector q = random_q(n, rng);
    Matrix j = arm.jacobian(q);
    ASSERT_EQ(j.rows(), 3);
    ASSERT_EQ(j.cols(), n);
    for (Index c = 0; c < n; ++c) {
      Vector qp = q, qm = q;
      qp(c) += h;
      qm(c) -= h;
      Eigen::Vector3d fd = (arm.task_coordinates(qp) - arm.task_coordinates(qm)) / (2 * h);
      EXPECT_LE((j.col(c) - fd).cwiseAbs().maxCoeff(), 1e-6) << "column " << c;
    }
  }
}

TEST(Kinematics, RejectsBadLinks) {
  EXPECT_THROW(PlanarArm({}), DimensionError);
  EXPECT_THROW(PlanarArm({1.0, 0.0}), DimensionError);
  EXPECT_THROW(PlanarArm({1.0, -2.0}), DimensionError);
  EXPECT_THROW(PlanarArm({1.0, std::nan("")}), DimensionError);
}

TEST(Kinematics, WrongJointCountThrows) {
  PlanarArm arm({1.0, 1.0});
  EXPECT_THROW(arm.forward_kinematics(Vector::Zero(3)), DimensionError);
  EXPECT_THROW(arm.jacobian(Vector::Zero(1)), DimensionError);
}

TEST(Kinematics, WrapAngleRange) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    double a = uniform(rng, -50.0, 50.0);
    double w = wrap_angle(a);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    EXPECT_NEAR(std::remainder(a - w, 2 * kPi), 0.0, 1e-9);
  }
}

TEST(Kinematics, ParseAxes) {
  auto xy = parse_axes("x,y");
  ASSERT_EQ(xy.size(), 2u);
  EXPECT_EQ(xy[0], TaskAxis::X);
  EXPECT_EQ(xy[1], TaskAxis::Y);
  auto t = parse_axes("theta");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], TaskAxis::Theta);
  EXPECT_EQ(axes_label(parse_axes("y,theta")), "y,theta");
  EXPECT_THROW(parse_axes(""), ConfigError);
  EXPECT_THROW(parse_axes("x,x"), ConfigError);
  EXPECT_THROW(parse_axes("z"), ConfigError);
}

TEST(Kinematics, AxisSelectionPicksRows) {
  std::vector<TaskAxis> axes{TaskAxis::Y, TaskAxis::Theta};
  Matrix s = axis_selection(axes);
  Matrix expected(2, 3);
  expected << 0, 1, 0, 0, 0, 1;
  EXPECT_EQ(s, expected);
}

TEST(Kinematics, DiagonalSelectionPattern) {
  Matrix d = diagonal_selection(0b101);
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 0) = 1;
  expected(2, 2) = 1;
  EXPECT_EQ(d, expected);
}

double manipulability_oracle(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a * a.transpose());
  double prod = 1.0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) prod *= std::max(0.0, es.eigenvalues()(i));
  return std::sqrt(prod);
}

TEST(Manipulability, MatchesEigenvalueProduct) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + trial % 5;
    const Index k = 1 + trial % n;
    Matrix a(k, n);
    for (Index i = 0; i < a.size(); ++i) a(i) = uniform(rng, -2.0, 2.0);
    double m = manipulability(a);
    EXPECT_NEAR(m, manipulability_oracle(a), 1e-9 * std::max(1.0, m));
  }
}

TEST(Manipulability, RankDeficientIsZero) {
  Matrix a(2, 3);
  a << 1, 2, 3, 2, 4, 6;
  EXPECT_EQ(manipulability(a), 0.0);
  Matrix tall = Matrix::Random(4, 2);
  EXPECT_EQ(manipulability(tall), 0.0);
}

TEST(Manipulability, InvariantUnderRowRotation) {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a(2, 4);
    for (Index i = 0; i < a.size(); ++i) a(i) = uniform(rng, -1.0, 1.0);
    double phi = uniform(rng, -kPi, kPi);
    Matrix r(2, 2);
    r << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    EXPECT_NEAR(manipulability(r * a), manipulability(a), 1e-12);
  }
}

TEST(Manipulability, StraightArmIsSingularForPosition) {
  PlanarArm arm({10.0, 10.0, 10.0});
  Matrix a = axis_selection(parse_axes("x,y")) * arm.jacobian(Vector::Zero(3));
  EXPECT_NEAR(manipulability(a), 0.0, 1e-9);
}

TEST(ManipulabilityGradient, PermutationEquivariant) {
  PlanarArm arm({10.0, 7.0, 4.0});
  auto base = SelectionConstraint(axis_selection(parse_axes("x,y")), jacobian_features(arm));
  const std::vector<Index> perm{2, 0, 1};
  Eigen::PermutationMatrix<Eigen::Dynamic> p(3);
  for (Index i = 0; i < 3; ++i) p.indices()(i) = static_cast<int>(perm[static_cast<std::size_t>(i)]);
  Matrix pm = p.toDenseMatrix().cast<double>();

  // A'(x') = A(P^T x') P^T describes the same system with permuted joints.
  FeatureMap permuted{"permuted", 3, 3, [arm, pm](const JointState& xp) {
                        JointState x = pm.transpose() * xp;
                        return Matrix(arm.jacobian(x) * pm.transpose());
                      }};
  ConstraintModel m1 = base;
  ConstraintModel m2 = SelectionConstraint(axis_selection(parse_axes("x,y")), permuted);

  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x = random_q(3, rng);
    Vector g1 = manipulability_gradient(m1, x);
    Vector g2 = manipulability_gradient(m2, pm * x);
    EXPECT_LE((pm * g1 - g2).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ManipulabilityGradient, SymmetricInMirroredPosture) {
  // m(q) = m(-q) for a planar arm, so the gradient is odd.
  PlanarArm arm({10.0, 10.0, 10.0});
  ConstraintModel m = SelectionConstraint(axis_selection(parse_axes("x,y")), jacobian_features(arm));
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x = random_q(3, rng);
    Vector g = manipulability_gradient(m, x);
    Vector gm = manipulability_gradient(m, -x);
    EXPECT_LE((g + gm).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ManipulabilityGradient, AscentLeavesSingularNeighbourhood) {
  PlanarArm arm({10.0, 10.0, 10.0});
  ConstraintModel m = SelectionConstraint(axis_selection(parse_axes("x,y")), jacobian_features(arm));
  Vector x(3);
  x << 0.2, 0.05, 0.05;
  double before = manipulability(m.matrix(x));
  for (int step = 0; step < 50; ++step) x += 1e-3 * manipulability_gradient(m, x);
  EXPECT_GT(manipulability(m.matrix(x)), before);
}

TEST(Kinematics, JacobianAtZeroPosture) {
  PlanarArm arm({0.1, 0.1, 0.1});
  Matrix j = arm.jacobian(Vector::Zero(3));
  Matrix expected(3, 3);
  expected << 0, 0, 0, 0.3, 0.2, 0.1, 1, 1, 1;
  EXPECT_LE((j - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Manipulability, TrivialCases) {
  Matrix row(1, 2);
  row << 1, 0;
  EXPECT_NEAR(manipulability(row), 1.0, 1e-15);
  EXPECT_NEAR(manipulability(Matrix::Identity(2, 2)), 1.0, 1e-15);
}

TEST(ManipulabilityGradient, ConstantConstraintHasZeroGradient) {
  Matrix a(2, 3);
  a << 1, 2, 0, 0, 1, 1;
  ConstraintModel m = ConstraintModel::constant(a);
  Vector g = manipulability_gradient(m, Vector::Constant(3, 0.4));
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ManipulabilityGradient, DoesNotDecreaseFromStraightArm) {
  PlanarArm arm({0.1, 0.1, 0.1});
  ConstraintModel m = SelectionConstraint(axis_selection(parse_axes("x,y")), jacobian_features(arm));
  const Vector x = Vector::Zero(3);
  const double before = manipulability(m.matrix(x));
  for (double alpha : {1e-3, 1e-2, 1e-1}) {
    EXPECT_GE(manipulability(m.matrix(x + alpha * manipulability_gradient(m, x))), before);
  }
}

}  // namespace
