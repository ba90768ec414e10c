#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "ccl/constraints.hpp"
#include "ccl/optimizer.hpp"
#include "ccl/simulator.hpp"
#include "ccl/types.hpp"

namespace ccl {

/// Unknown constant A: k orthonormal rows in R^n from spherical angles.
struct SphericalRepresentation {
  Index n = 0;
};

/// A(x) = Lambda Phi(x) with Lambda's k rows orthonormal in R^p, spherical angles.
struct SelectionRepresentation {
  FeatureMap feature;
};

using Representation = std::variant<SphericalRepresentation, SelectionRepresentation>;

/// Sum over samples of |pi_n^T N(x_n) (u_n - pi_n)| for a candidate model.
/// Uses Observation::pi as the prior. Throws NumericalError on non-finite data.
double consistency_objective(const ConstraintModel& model, std::span<const Observation> data);

/// Cached form of consistency_objective over the angle parameters of a
/// representation; this is what the optimizer sees.
class ConsistencyObjective {
 public:
  ConsistencyObjective(std::span<const Observation> data, Representation rep, Index k);

  double operator()(const Vector& params) const;
  ConstraintModel model(const Vector& params) const;
  Index parameter_count() const { return n_params_; }
  Index k() const { return k_; }

 private:
  double eval_selection(const Matrix& lambda) const;

  Representation rep_;
  Index k_;
  Index n_params_;
  Matrix pi_;                 // n x N
  Matrix diff_;               // n x N, u - pi
  std::vector<Matrix> phi_;   // cached features (selection only)
};

struct LearnedConstraint {
  ConstraintModel model;
  Vector params;                     // angles, wrapped to (-pi, pi]
  double objective_value = 0.0;
  int restarts_used = 0;
  int restarts_failed = 0;
  int restarts_converged = 0;
  std::uint64_t seed = 0;
  double degenerate_fraction = 0.0;  // samples with ||N pi|| ~ 0
};

/// Fraction of samples whose projected prior ||N(x) pi|| falls below
/// rel_tol * ||pi||. High values mean the objective cannot identify N.
double degenerate_prior_fraction(const ConstraintModel& model, std::span<const Observation> data,
                                 double rel_tol = 1e-6);

/// Best-of-restarts minimiser of the consistency objective.
LearnedConstraint learn_constraint(std::span<const Observation> data, Index k,
                                   const Representation& rep, const OptimizerConfig& opt);

/// Fits k = 1, 2, ... and returns the smallest k whose objective drops below
/// rel_tol * sum ||u_n||.
LearnedConstraint learn_constraint_sweep(std::span<const Observation> data,
                                         const Representation& rep, const OptimizerConfig& opt,
                                         double rel_tol = 1e-8);

/// Sum over samples of w_n^T (Lambda Phi_n)^+ (Lambda Phi_n) w_n.
double selection_objective(const Matrix& lambda, const FeatureMap& feature,
                           std::span<const JointState> states, std::span<const Vector> w_hat);

struct LearnedSelection {
  Matrix lambda;
  double objective_value = 0.0;
  std::optional<unsigned> pattern;  // set by the exhaustive diagonal search
  std::vector<double> pattern_objectives;  // indexed by pattern, exhaustive mode only
};

/// Continuous Lambda (k orthonormal rows over the feature rows) minimising
/// selection_objective. Throws Error when Lambda Phi is rank deficient on every sample.
LearnedSelection learn_selection_matrix(std::span<const JointState> states,
                                        std::span<const Vector> w_hat, const FeatureMap& feature,
                                        Index k, const OptimizerConfig& opt);

/// Exhaustive search over the 0/1 diagonal patterns of a p x p selection
/// (p <= 8). With k given, the best pattern with exactly k ones wins.
/// Otherwise the pattern with the most ones whose objective is below
/// rel_tol * sum ||w_n||^2 wins. The returned lambda keeps only selected rows.
LearnedSelection learn_selection_exhaustive(std::span<const JointState> states,
                                            std::span<const Vector> w_hat,
                                            const FeatureMap& feature, std::optional<Index> k,
                                            double rel_tol = 1e-10);

}  // namespace ccl
