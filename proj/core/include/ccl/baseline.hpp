#pragma once

#include <span>
#include <vector>

#include "ccl/simulator.hpp"
#include "ccl/types.hpp"

namespace ccl {

/// w(x) = W [phi_1(x) .. phi_M(x), 1] with Gaussian radial basis features.
struct RbfModel {
  Matrix centers;  // state_dim x M
  double width = 1.0;
  Matrix weights;  // action_dim x (M + 1)

  Vector features(const JointState& x) const;
  Vector operator()(const JointState& x) const { return weights * features(x); }
};

struct BaselineConfig {
  std::size_t num_centers = 20;  // clamped to N - 1
  double norm_floor = 1e-8;      // lower bound on ||w_n|| when forming P_n
  int max_function_evals = 4000;
};

struct BaselineResult {
  RbfModel model;
  std::vector<Vector> w_hat;
  std::vector<Vector> v_hat;
  double objective = 0.0;
  std::size_t floored_samples = 0;
};

/// Sum over samples of ||P_n u_n - w_n||^2 with P_n = w_n w_n^T / ||w_n||^2.
double separation_objective(const RbfModel& model, std::span<const Observation> data,
                            double norm_floor = 1e-8);

/// Null-space component separation that needs only (x, u): fits the RBF
/// model by Levenberg-Marquardt on separation_objective, starting from a
/// least-squares fit of w(x) to u.
BaselineResult baseline_separate_nullspace(std::span<const Observation> data,
                                           const BaselineConfig& cfg = {});

}  // namespace ccl
