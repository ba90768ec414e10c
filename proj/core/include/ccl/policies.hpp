#pragma once

#include <string>
#include <variant>

#include "ccl/constraints.hpp"
#include "ccl/kinematics.hpp"
#include "ccl/types.hpp"

namespace ccl {

/// pi(x) = -L (x, 1).
struct LinearPolicy {
  Matrix gain;  // n x (n + 1)
};

/// Polar dynamics rho' = rho (rho0 - rho^2), phi' = omega on a 2-D state.
/// The stable radius is sqrt(rho0).
struct LimitCyclePolicy {
  double rho0 = 0.75;
  double omega = 1.0;
};

/// pi(x) = (cos z1 cos z2, -sin z1 sin z2), z1 = pi x1, z2 = pi (x2 + 1/2).
struct SinusoidalPolicy {};

/// pi(x) = beta (x* - x), beta a scalar gain.
struct PointAttractor {
  double beta = 1.0;
  JointState target;
};

/// b(x) = gain (r* - r(x)) in the arm's (x, y, theta) task space. The
/// orientation difference is wrapped to (-pi, pi].
struct TaskPointAttractor {
  PlanarArm arm{{1.0}};
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  double gain = 1.0;
};

/// pi(x) = gain * grad_x sqrt(det(A(x) A(x)^T)).
struct ManipulabilityGradient {
  ConstraintModel model = ConstraintModel::constant(Matrix::Identity(1, 1));
  double step = kDefaultGradientStep;
  double gain = 1.0;
};

using PolicySpec = std::variant<LinearPolicy, LimitCyclePolicy, SinusoidalPolicy, PointAttractor,
                                TaskPointAttractor, ManipulabilityGradient>;

/// Evaluates the policy at x. Throws DimensionError on shape mismatch.
Vector eval_policy(const PolicySpec& spec, const JointState& x);

/// Short stable name ("linear", "limit_cycle", ...).
std::string policy_name(const PolicySpec& spec);

/// The toy-problem linear policy with L = ((2, 4, 0), (1, 3, -1)).
LinearPolicy default_linear_policy();

}  // namespace ccl
