#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccl/constraints.hpp"
#include "ccl/kinematics.hpp"
#include "ccl/policies.hpp"
#include "ccl/random.hpp"
#include "ccl/types.hpp"

namespace ccl {

/// One observed (x, u) pair plus the prior policy value handed to the learner.
struct Observation {
  JointState x;
  JointAction u;
  Vector pi;  // prior null-space policy at x; may carry injected noise
};

/// Generating decomposition of a sample: u = v + w, v = A^+ b, w = N pi.
struct GroundTruth {
  Vector v;
  Vector w;
  Vector b;
  Matrix a;
  Vector pi;  // noise-free prior
};

struct Trajectory {
  double dt = 0.02;
  std::vector<Observation> samples;
  std::vector<GroundTruth> truth;  // empty, or one record per sample

  bool has_truth() const { return !truth.empty(); }
  std::size_t size() const { return samples.size(); }
};

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::string system;
  std::string constraint;
  double epsilon = 0.0;
  std::string noise_target = "none";
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  DatasetMeta meta;

  std::size_t size() const;
  bool has_truth() const;
  /// All samples, trajectory by trajectory.
  std::vector<Observation> observations() const;
  std::vector<GroundTruth> truth() const;
};

enum class NoiseTarget { Actions, PriorPolicy };

/// Additive white Gaussian noise N(0, epsilon * sigma_i^2) per dimension.
struct NoiseSpec {
  double epsilon = 0.0;
  NoiseTarget target = NoiseTarget::Actions;
};

/// A 2-D system with one constant constraint along (cos theta, sin theta)
/// and a scalar task attractor towards `target` along that direction.
struct ToyProblem {
  double theta = 0.0;
  double target = 0.0;
  PolicySpec null_policy = SinusoidalPolicy{};

  Matrix constraint() const;
};

/// theta ~ U[0, pi), target ~ U[-2, 2].
ToyProblem sample_toy_problem(PolicySpec null_policy, Rng& rng);

/// n i.i.d. states x ~ U[-1, 1]^2 with actions composed from the problem.
Trajectory sample_toy_points(const ToyProblem& problem, std::size_t n_points, Rng& rng);

/// Convenience: one problem and n_points samples from a single seed.
Dataset generate_toy_dataset(std::size_t n_points, std::uint64_t seed,
                             const PolicySpec& null_policy = LimitCyclePolicy{});

/// Composes u = A^+ b + N pi at x and records the decomposition.
/// b is the task policy output, or Lambda times it when the output has the
/// feature dimension of a selection constraint.
GroundTruth compose_action(const ConstraintModel& constraint, const PolicySpec& task_policy,
                           const PolicySpec& null_policy, const JointState& x);

inline constexpr double kRankCollapseTolerance = 1e-8;

/// Explicit Euler rollout x_{t+1} = x_t + dt u_t with round(duration / dt)
/// samples. Throws RankCollapse when A(x_t) loses row rank.
Trajectory simulate_trajectory(const ConstraintModel& constraint, const PolicySpec& task_policy,
                               const PolicySpec& null_policy, const JointState& x0, double dt,
                               double duration);

/// Adds noise to actions or prior values. sigma is the per-dimension
/// standard deviation of u over the whole dataset. Ground truth is untouched.
Dataset add_noise(const Dataset& dataset, const NoiseSpec& spec, std::uint64_t seed);

/// Reaching demonstrations of a planar arm under A(x) = Lambda J(x).
struct ArmDemoSetup {
  PlanarArm arm{{10.0, 10.0, 10.0}};
  Vector start_min;  // rad
  Vector start_max;  // rad
  Eigen::Vector3d target_min{-1.0, 0.0, 0.0};
  Eigen::Vector3d target_max{1.0, 2.0, kPi};
  PolicySpec prior = PointAttractor{};
  double task_gain = 1.0;
  double dt = 0.02;
  std::size_t points_per_trajectory = 50;
  std::size_t max_redraws = 100;

  /// 3-link arm with 10-unit links, starts in [0,10] x [90,100] x [0,10] deg,
  /// prior attractor (10, -10, 10) deg with beta = 1.
  static ArmDemoSetup three_link_default();
};

/// Draws `n_trajectories` start/target pairs and rolls each out. A draw that
/// hits a rank collapse is replaced by a fresh draw from the same stream.
Dataset generate_arm_dataset(const ArmDemoSetup& setup, const Matrix& lambda,
                             std::size_t n_trajectories, std::uint64_t seed);

}  // namespace ccl
