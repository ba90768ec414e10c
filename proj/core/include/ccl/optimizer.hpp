#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ccl/random.hpp"
#include "ccl/types.hpp"

namespace ccl {

struct OptimizerConfig {
  int restarts = 20;
  int max_iters = 5000;          // per restart, polishing included
  double objective_tol = 1e-14;  // spread of simplex values
  double param_tol = 1e-12;      // simplex diameter (infinity norm)
  std::uint64_t seed = 0;
  double initial_step = 0.5;     // initial simplex edge
  double init_spread = kPi;      // random starts: init + U[-spread, spread]
  bool record_history = false;

  void validate() const;
};

using Objective = std::function<double(const Vector&)>;
using InitSampler = std::function<Vector(Rng&)>;

struct RestartTrace {
  Vector start;
  Vector params;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;            // objective went non-finite; restart abandoned
  std::vector<double> incumbent;  // best value after every iteration (if recorded)
};

struct OptimizeResult {
  Vector params;
  double value = 0.0;
  int best_restart = -1;
  int restarts_failed = 0;
  int restarts_converged = 0;
  std::vector<RestartTrace> restarts;
};

/// One Nelder-Mead local search from `start`, with re-started simplices
/// around the incumbent until no further progress. Throws NumericalError if
/// the objective turns non-finite.
RestartTrace nelder_mead(const Objective& f, const Vector& start, const OptimizerConfig& cfg);

/// Best of `cfg.restarts` Nelder-Mead runs. Restart 0 starts from `init`, the
/// others from `sampler(rng)` (default: init + U[-init_spread, init_spread]).
/// Ties go to the lowest restart index. Throws ConvergenceError when every
/// restart failed.
OptimizeResult optimize(const Objective& f, const Vector& init, const OptimizerConfig& cfg,
                        const InitSampler& sampler = {});

}  // namespace ccl
