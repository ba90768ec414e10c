#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccl/constraints.hpp"
#include "ccl/simulator.hpp"
#include "ccl/types.hpp"

namespace ccl {

/// Per-dimension sample standard deviation of the observed actions.
Vector action_std(std::span<const Observation> data);

/// (1/N) sum_n ||(w_n - w_hat_n) ./ sigma_u||^2. Dimensions with sigma_u = 0
/// are left out of the norm; throws if every dimension is degenerate.
double nmse_w(std::span<const Vector> true_w, std::span<const Vector> est_w, const Vector& sigma_u);

/// Consistency objective normalised by N ||sigma_u||^2.
double consistency_error(const ConstraintModel& model, std::span<const Observation> data,
                         const Vector& sigma_u);

/// Frobenius norm of N1 - N2.
double projector_distance(const Matrix& n1, const Matrix& n2);

/// Largest projector_distance between two models over the given states.
double max_projector_distance(const ConstraintModel& a, const ConstraintModel& b,
                              std::span<const Observation> data);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (N - 1)
};

MeanSd mean_sd(std::span<const double> values);

struct MetricRecord {
  std::string row;  // table row label (policy, selection case, ...)
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double e_w = 0.0;
  double e_n = 0.0;
};

}  // namespace ccl
