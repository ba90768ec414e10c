#include "ccl/policies.hpp"

#include <cmath>

namespace ccl {

namespace {

struct Evaluator {
  const JointState& x;

  Vector operator()(const LinearPolicy& p) const {
    require_dim(p.gain.cols(), x.size() + 1, "linear policy gain columns");
    Vector xbar(x.size() + 1);
    xbar << x, 1.0;
    return -p.gain * xbar;
  }

  Vector operator()(const LimitCyclePolicy& p) const {
    require_dim(x.size(), 2, "limit cycle state");
    const double r2 = x.squaredNorm();
    if (r2 == 0.0) return Vector::Zero(2);
    // rho' e_rho + rho phi' e_phi written in Cartesian form.
    const double radial = p.rho0 - r2;
    Vector out(2);
    out << radial * x(0) - p.omega * x(1), radial * x(1) + p.omega * x(0);
    return out;
  }

  Vector operator()(const SinusoidalPolicy&) const {
    require_dim(x.size(), 2, "sinusoidal policy state");
    const double z1 = kPi * x(0);
    const double z2 = kPi * (x(1) + 0.5);
    Vector out(2);
    out << std::cos(z1) * std::cos(z2), -std::sin(z1) * std::sin(z2);
    return out;
  }

  Vector operator()(const PointAttractor& p) const {
    require_dim(x.size(), p.target.size(), "point attractor state");
    return p.beta * (p.target - x);
  }

  Vector operator()(const TaskPointAttractor& p) const {
    const Eigen::Vector3d r = p.arm.task_coordinates(x);
    Vector out(3);
    out << p.target.x() - r.x(), p.target.y() - r.y(), wrap_angle(p.target.z() - r.z());
    return p.gain * out;
  }

  Vector operator()(const ManipulabilityGradient& p) const {
    return p.gain * manipulability_gradient(p.model, x, p.step);
  }
};

struct Namer {
  std::string operator()(const LinearPolicy&) const { return "linear"; }
  std::string operator()(const LimitCyclePolicy&) const { return "limit_cycle"; }
  std::string operator()(const SinusoidalPolicy&) const { return "sinusoidal"; }
  std::string operator()(const PointAttractor&) const { return "point_attractor"; }
  std::string operator()(const TaskPointAttractor&) const { return "task_point_attractor"; }
  std::string operator()(const ManipulabilityGradient&) const { return "manipulability_gradient"; }
};

}  // namespace

Vector eval_policy(const PolicySpec& spec, const JointState& x) {
  if (!x.allFinite()) throw NumericalError("eval_policy: non-finite state");
  return std::visit(Evaluator{x}, spec);
}

std::string policy_name(const PolicySpec& spec) { return std::visit(Namer{}, spec); }

LinearPolicy default_linear_policy() {
  Matrix l(2, 3);
  l << 2.0, 4.0, 0.0, 1.0, 3.0, -1.0;
  return LinearPolicy{l};
}

}  // namespace ccl
