#include "ccl/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ccl {

void OptimizerConfig::validate() const {
  if (restarts < 1) throw ConfigError("optimizer: restarts must be >= 1");
  if (max_iters < 1) throw ConfigError("optimizer: max_iters must be >= 1");
  if (!(objective_tol > 0.0)) throw ConfigError("optimizer: objective_tol must be > 0");
  if (!(param_tol > 0.0)) throw ConfigError("optimizer: param_tol must be > 0");
  if (!(initial_step > 0.0)) throw ConfigError("optimizer: initial_step must be > 0");
}

namespace {

double checked(const Objective& f, const Vector& x) {
  const double v = f(x);
  if (!std::isfinite(v)) throw NumericalError("objective returned a non-finite value");
  return v;
}

struct Simplex {
  std::vector<Vector> points;
  std::vector<double> values;

  void sort() {
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Vector> p;
    std::vector<double> v;
    for (std::size_t i : idx) {
      p.push_back(points[i]);
      v.push_back(values[i]);
    }
    points = std::move(p);
    values = std::move(v);
  }

  double diameter() const {
    double d = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      d = std::max(d, (points[i] - points[0]).lpNorm<Eigen::Infinity>());
    }
    return d;
  }
};

// Standard coefficients: reflection 1, expansion 2, contraction 1/2, shrink 1/2.
// Returns the number of iterations used; `converged` set when tolerances are met.
int run_simplex(const Objective& f, const Vector& start, double start_value, double step,
                const OptimizerConfig& cfg, int budget, Vector& best, double& best_value,
                bool& converged, std::vector<double>* history) {
  const Index n = start.size();
  Simplex s;
  s.points.push_back(start);
  s.values.push_back(start_value);
  for (Index i = 0; i < n; ++i) {
    Vector p = start;
    p(i) += step;
    s.points.push_back(p);
    s.values.push_back(checked(f, p));
  }
  s.sort();
  converged = false;
  int it = 0;
  for (; it < budget; ++it) {
    const double spread = s.values.back() - s.values.front();
    if (spread <= cfg.objective_tol || s.diameter() <= cfg.param_tol) {
      converged = true;
      break;
    }
    Vector centroid = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) centroid += s.points[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(n);
    const Vector& worst = s.points.back();
    const double f_worst = s.values.back();
    const double f_second = s.values[s.values.size() - 2];
    const double f_best = s.values.front();

    const Vector xr = centroid + (centroid - worst);
    const double fr = checked(f, xr);
    if (fr < f_best) {
      const Vector xe = centroid + 2.0 * (centroid - worst);
      const double fe = checked(f, xe);
      if (fe < fr) {
        s.points.back() = xe;
        s.values.back() = fe;
      } else {
        s.points.back() = xr;
        s.values.back() = fr;
      }
    } else if (fr < f_second) {
      s.points.back() = xr;
      s.values.back() = fr;
    } else {
      bool shrink = false;
      if (fr < f_worst) {
        const Vector xc = centroid + 0.5 * (xr - centroid);
        const double fc = checked(f, xc);
        if (fc <= fr) {
          s.points.back() = xc;
          s.values.back() = fc;
        } else {
          shrink = true;
        }
      } else {
        const Vector xc = centroid + 0.5 * (worst - centroid);
        const double fc = checked(f, xc);
        if (fc < f_worst) {
          s.points.back() = xc;
          s.values.back() = fc;
        } else {
          shrink = true;
        }
      }
      if (shrink) {
        for (std::size_t i = 1; i < s.points.size(); ++i) {
          s.points[i] = s.points[0] + 0.5 * (s.points[i] - s.points[0]);
          s.values[i] = checked(f, s.points[i]);
        }
      }
    }
    s.sort();
    if (s.values.front() < best_value) {
      best_value = s.values.front();
      best = s.points.front();
    }
    if (history != nullptr) history->push_back(best_value);
  }
  if (s.values.front() < best_value) {
    best_value = s.values.front();
    best = s.points.front();
  }
  return it;
}

}  // namespace

RestartTrace nelder_mead(const Objective& f, const Vector& start, const OptimizerConfig& cfg) {
  cfg.validate();
  RestartTrace trace;
  trace.start = start;
  trace.params = start;
  trace.value = checked(f, start);
  std::vector<double>* history = cfg.record_history ? &trace.incumbent : nullptr;
  if (history != nullptr) history->push_back(trace.value);

  double step = cfg.initial_step;
  int used = 0;
  constexpr int kMaxRounds = 4;
  for (int round = 0; round < kMaxRounds && used < cfg.max_iters; ++round) {
    const double before = trace.value;
    bool converged = false;
    used += run_simplex(f, trace.params, trace.value, step, cfg, cfg.max_iters - used, trace.params,
                        trace.value, converged, history);
    trace.converged = converged;
    if (!converged) break;
    // A fresh, smaller simplex around the incumbent guards against premature collapse.
    if (round > 0 && before - trace.value <= cfg.objective_tol) break;
    step = std::max(1e3 * cfg.param_tol, 1e-3 * step);
  }
  trace.iterations = used;
  return trace;
}

OptimizeResult optimize(const Objective& f, const Vector& init, const OptimizerConfig& cfg,
                        const InitSampler& sampler) {
  cfg.validate();
  Rng rng(cfg.seed);
  OptimizeResult result;
  result.value = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    Vector start = init;
    if (r > 0) {
      if (sampler) {
        start = sampler(rng);
      } else {
        for (Index i = 0; i < start.size(); ++i) start(i) += uniform(rng, -cfg.init_spread, cfg.init_spread);
      }
    }
    RestartTrace trace;
    try {
      trace = nelder_mead(f, start, cfg);
    } catch (const NumericalError&) {
      trace.start = start;
      trace.failed = true;
      trace.value = std::numeric_limits<double>::infinity();
      ++result.restarts_failed;
    }
    if (!trace.failed) {
      if (trace.converged) ++result.restarts_converged;
      if (trace.value < result.value) {
        result.value = trace.value;
        result.params = trace.params;
        result.best_restart = r;
      }
    }
    result.restarts.push_back(std::move(trace));
  }
  if (result.best_restart < 0) {
    throw ConvergenceError("optimize: every restart failed", result.value);
  }
  return result;
}

}  // namespace ccl
