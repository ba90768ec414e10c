#include "ccl/simulator.hpp"

#include <cmath>
#include <string>

namespace ccl {

std::size_t Dataset::size() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

bool Dataset::has_truth() const {
  if (trajectories.empty()) return false;
  for (const auto& t : trajectories) {
    if (!t.has_truth()) return false;
  }
  return true;
}

std::vector<Observation> Dataset::observations() const {
  std::vector<Observation> out;
  out.reserve(size());
  for (const auto& t : trajectories) out.insert(out.end(), t.samples.begin(), t.samples.end());
  return out;
}

std::vector<GroundTruth> Dataset::truth() const {
  std::vector<GroundTruth> out;
  out.reserve(size());
  for (const auto& t : trajectories) out.insert(out.end(), t.truth.begin(), t.truth.end());
  return out;
}

Matrix ToyProblem::constraint() const {
  Matrix a(1, 2);
  a << std::cos(theta), std::sin(theta);
  return a;
}

ToyProblem sample_toy_problem(PolicySpec null_policy, Rng& rng) {
  ToyProblem p;
  p.theta = uniform(rng, 0.0, kPi);
  p.target = uniform(rng, -2.0, 2.0);
  p.null_policy = std::move(null_policy);
  return p;
}

Trajectory sample_toy_points(const ToyProblem& problem, std::size_t n_points, Rng& rng) {
  const Matrix a = problem.constraint();
  const Projector proj(a);
  Trajectory traj;
  traj.dt = 0.02;
  traj.samples.reserve(n_points);
  traj.truth.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    Vector x(2);
    x(0) = uniform(rng, -1.0, 1.0);
    x(1) = uniform(rng, -1.0, 1.0);
    GroundTruth gt;
    gt.a = a;
    gt.b = Vector::Constant(1, problem.target - (a * x)(0));
    gt.pi = eval_policy(problem.null_policy, x);
    gt.v = proj.pseudo_inverse() * gt.b;
    gt.w = proj.nullspace() * gt.pi;
    traj.samples.push_back(Observation{x, gt.v + gt.w, gt.pi});
    traj.truth.push_back(std::move(gt));
  }
  return traj;
}

Dataset generate_toy_dataset(std::size_t n_points, std::uint64_t seed,
                             const PolicySpec& null_policy) {
  Rng rng(seed);
  const ToyProblem problem = sample_toy_problem(null_policy, rng);
  Dataset ds;
  ds.trajectories.push_back(sample_toy_points(problem, n_points, rng));
  ds.meta.seed = seed;
  ds.meta.system = "toy2d/" + policy_name(null_policy);
  ds.meta.constraint = "theta=" + std::to_string(problem.theta);
  return ds;
}

GroundTruth compose_action(const ConstraintModel& constraint, const PolicySpec& task_policy,
                           const PolicySpec& null_policy, const JointState& x) {
  GroundTruth gt;
  gt.a = constraint.matrix(x);
  const Vector task = eval_policy(task_policy, x);
  const auto* sel = constraint.selection();
  if (sel != nullptr && task.size() == sel->feature().rows && task.size() != constraint.k()) {
    gt.b = sel->lambda() * task;
  } else {
    require_dim(task.size(), constraint.k(), "task policy output");
    gt.b = task;
  }
  gt.pi = eval_policy(null_policy, x);
  require_dim(gt.pi.size(), gt.a.cols(), "null-space policy output");
  const Projector proj(gt.a);
  gt.v = proj.pseudo_inverse() * gt.b;
  gt.w = proj.nullspace() * gt.pi;
  return gt;
}

Trajectory simulate_trajectory(const ConstraintModel& constraint, const PolicySpec& task_policy,
                               const PolicySpec& null_policy, const JointState& x0, double dt,
                               double duration) {
  if (!(dt > 0.0)) throw DimensionError("simulate_trajectory: dt must be positive");
  if (!(duration >= 0.0)) throw DimensionError("simulate_trajectory: negative duration");
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  Trajectory traj;
  traj.dt = dt;
  traj.samples.reserve(steps);
  traj.truth.reserve(steps);
  JointState x = x0;
  for (std::size_t t = 0; t < steps; ++t) {
    GroundTruth gt = compose_action(constraint, task_policy, null_policy, x);
    if (numerical_rank(gt.a, kRankCollapseTolerance) < gt.a.rows()) {
      throw RankCollapse("simulate_trajectory: constraint lost row rank", t);
    }
    Vector u = gt.v + gt.w;
    if (!u.allFinite()) throw NumericalError("simulate_trajectory: non-finite action");
    traj.samples.push_back(Observation{x, u, gt.pi});
    traj.truth.push_back(std::move(gt));
    x += dt * u;
  }
  return traj;
}

Dataset add_noise(const Dataset& dataset, const NoiseSpec& spec, std::uint64_t seed) {
  if (!(spec.epsilon >= 0.0)) throw DimensionError("add_noise: epsilon must be >= 0");
  Dataset out = dataset;
  out.meta.epsilon = spec.epsilon;
  out.meta.noise_target = spec.target == NoiseTarget::Actions ? "actions" : "prior_policy";
  if (spec.epsilon == 0.0 || dataset.size() == 0) return out;

  const Index dim = dataset.trajectories.front().samples.front().u.size();
  Vector mean = Vector::Zero(dim);
  Vector sq = Vector::Zero(dim);
  const auto count = static_cast<double>(dataset.size());
  for (const auto& t : dataset.trajectories) {
    for (const auto& s : t.samples) mean += s.u;
  }
  mean /= count;
  for (const auto& t : dataset.trajectories) {
    for (const auto& s : t.samples) sq += (s.u - mean).cwiseAbs2();
  }
  const Vector sigma = (sq / std::max(1.0, count - 1.0)).cwiseSqrt();

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = std::sqrt(spec.epsilon);
  for (auto& t : out.trajectories) {
    for (auto& s : t.samples) {
      Vector& target = spec.target == NoiseTarget::Actions ? s.u : s.pi;
      require_dim(target.size(), dim, "add_noise target");
      for (Index i = 0; i < dim; ++i) target(i) += scale * sigma(i) * normal(rng);
    }
  }
  return out;
}

ArmDemoSetup ArmDemoSetup::three_link_default() {
  ArmDemoSetup s;
  s.start_min = Vector(3);
  s.start_max = Vector(3);
  s.start_min << deg2rad(0.0), deg2rad(90.0), deg2rad(0.0);
  s.start_max << deg2rad(10.0), deg2rad(100.0), deg2rad(10.0);
  Vector target(3);
  target << deg2rad(10.0), deg2rad(-10.0), deg2rad(10.0);
  s.prior = PointAttractor{1.0, target};
  return s;
}

Dataset generate_arm_dataset(const ArmDemoSetup& setup, const Matrix& lambda,
                             std::size_t n_trajectories, std::uint64_t seed) {
  const Index n = setup.arm.joint_count();
  require_dim(setup.start_min.size(), n, "start_min");
  require_dim(setup.start_max.size(), n, "start_max");
  const ConstraintModel constraint(SelectionConstraint(lambda, jacobian_features(setup.arm)));
  const double duration = setup.dt * static_cast<double>(setup.points_per_trajectory);

  Rng rng(seed);
  Dataset ds;
  ds.meta.seed = seed;
  ds.meta.system = "planar_arm/" + std::to_string(n) + "-link";
  ds.trajectories.reserve(n_trajectories);
  std::size_t redraws = 0;
  while (ds.trajectories.size() < n_trajectories) {
    JointState q0(n);
    for (Index i = 0; i < n; ++i) q0(i) = uniform(rng, setup.start_min(i), setup.start_max(i));
    Eigen::Vector3d target;
    for (Index i = 0; i < 3; ++i) target(i) = uniform(rng, setup.target_min(i), setup.target_max(i));
    const TaskPointAttractor task{setup.arm, target, setup.task_gain};
    try {
      ds.trajectories.push_back(
          simulate_trajectory(constraint, task, setup.prior, q0, setup.dt, duration));
    } catch (const RankCollapse&) {
      if (++redraws > setup.max_redraws) throw;
    }
  }
  return ds;
}

}  // namespace ccl
