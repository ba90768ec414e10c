#include "ccl/learning.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <string>

namespace ccl {

namespace {

constexpr Index kMaxRows = 8;
constexpr Index kMaxCols = 16;
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxRows, kMaxCols>;
using SmallGram = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxRows, kMaxRows>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxRows, 1>;

// Relative pivot floor of the Gram matrix below which the fast solve defers to SVD.
constexpr double kGramPivotFloor = 1e-14;

void check_data(std::span<const Observation> data) {
  if (data.empty()) throw DimensionError("learning: empty dataset");
  const Index n = data.front().u.size();
  for (const auto& s : data) {
    require_dim(s.u.size(), n, "observation u");
    require_dim(s.pi.size(), n, "observation pi (attach a prior first)");
    if (!s.u.allFinite() || !s.pi.allFinite() || !s.x.allFinite()) {
      throw NumericalError("learning: non-finite observation");
    }
  }
}

double projected_term(const Matrix& a, const Vector& left, const Vector& right) {
  const Projector p(a);
  return left.dot(p.nullspace() * right);
}

Vector wrap_all(Vector v) {
  for (Index i = 0; i < v.size(); ++i) v(i) = wrap_angle(v(i));
  return v;
}

Index rows_of(const Representation& rep, Index fallback) {
  if (const auto* s = std::get_if<SelectionRepresentation>(&rep)) return s->feature.rows;
  return fallback;
}

InitSampler angle_sampler(Index count) {
  return [count](Rng& rng) {
    Vector v(count);
    for (Index i = 0; i < count; ++i) v(i) = uniform(rng, -kPi, kPi);
    return v;
  };
}

}  // namespace

double consistency_objective(const ConstraintModel& model, std::span<const Observation> data) {
  check_data(data);
  require_dim(data.front().u.size(), model.n(), "consistency_objective model dimension");
  double total = 0.0;
  for (const auto& s : data) {
    total += std::abs(projected_term(model.matrix(s.x), s.pi, s.u - s.pi));
  }
  return total;
}

ConsistencyObjective::ConsistencyObjective(std::span<const Observation> data, Representation rep,
                                           Index k)
    : rep_(std::move(rep)), k_(k) {
  check_data(data);
  const Index n = data.front().u.size();
  const auto count = static_cast<Index>(data.size());
  Index rows = n;
  if (const auto* sel = std::get_if<SelectionRepresentation>(&rep_)) {
    require_dim(sel->feature.cols, n, "feature columns vs action dimension");
    rows = sel->feature.rows;
    phi_.reserve(data.size());
    for (const auto& s : data) {
      Matrix phi = sel->feature(s.x);
      require_dim(phi.rows(), rows, "feature rows");
      require_dim(phi.cols(), n, "feature cols");
      if (!phi.allFinite()) throw NumericalError("learning: non-finite feature matrix");
      phi_.push_back(std::move(phi));
    }
  } else {
    require_dim(std::get<SphericalRepresentation>(rep_).n, n, "spherical representation n");
  }
  if (k < 1 || k > rows) {
    throw DimensionError("learning: k = " + std::to_string(k) + " must be in [1, " +
                         std::to_string(rows) + "]");
  }
  n_params_ = spherical_parameter_count(k, rows);
  pi_.resize(n, count);
  diff_.resize(n, count);
  for (Index i = 0; i < count; ++i) {
    const auto& s = data[static_cast<std::size_t>(i)];
    pi_.col(i) = s.pi;
    diff_.col(i) = s.u - s.pi;
  }
}

double ConsistencyObjective::operator()(const Vector& params) const {
  if (std::holds_alternative<SphericalRepresentation>(rep_)) {
    const Matrix a = spherical_rows(params, k_, pi_.rows());
    // Orthonormal rows: N = I - A^T A.
    const Matrix ap = a * pi_;
    const Matrix ad = a * diff_;
    const Vector terms = (pi_.cwiseProduct(diff_)).colwise().sum().transpose() -
                         (ap.cwiseProduct(ad)).colwise().sum().transpose();
    return terms.cwiseAbs().sum();
  }
  const auto& sel = std::get<SelectionRepresentation>(rep_);
  return eval_selection(spherical_rows(params, k_, sel.feature.rows));
}

double ConsistencyObjective::eval_selection(const Matrix& lambda) const {
  const Index n = pi_.rows();
  const bool small = lambda.rows() <= kMaxRows && n <= kMaxCols;
  double total = 0.0;
  for (std::size_t i = 0; i < phi_.size(); ++i) {
    const auto col = static_cast<Index>(i);
    if (small) {
      SmallMatrix a = lambda * phi_[i];
      SmallGram g = a * a.transpose();
      Eigen::LDLT<SmallGram> ldlt(g);
      const auto d = ldlt.vectorD();
      const double dmax = d.cwiseAbs().maxCoeff();
      if (ldlt.info() == Eigen::Success && dmax > 0.0 && d.minCoeff() > kGramPivotFloor * dmax) {
        const SmallVector apv = a * pi_.col(col);
        const SmallVector adv = a * diff_.col(col);
        const SmallVector y = ldlt.solve(adv);
        total += std::abs(pi_.col(col).dot(diff_.col(col)) - apv.dot(y));
        continue;
      }
    }
    total += std::abs(projected_term(lambda * phi_[i], pi_.col(col), diff_.col(col)));
  }
  return total;
}

ConstraintModel ConsistencyObjective::model(const Vector& params) const {
  if (const auto* sph = std::get_if<SphericalRepresentation>(&rep_)) {
    return ConstraintModel(SphericalConstraint(params, k_, sph->n));
  }
  const auto& sel = std::get<SelectionRepresentation>(rep_);
  return ConstraintModel(
      SelectionConstraint(spherical_rows(params, k_, sel.feature.rows), sel.feature));
}

double degenerate_prior_fraction(const ConstraintModel& model, std::span<const Observation> data,
                                 double rel_tol) {
  if (data.empty()) return 0.0;
  std::size_t degenerate = 0;
  for (const auto& s : data) {
    const Projector p(model.matrix(s.x));
    const double pn = s.pi.norm();
    if (pn == 0.0 || (p.nullspace() * s.pi).norm() <= rel_tol * pn) ++degenerate;
  }
  return static_cast<double>(degenerate) / static_cast<double>(data.size());
}

LearnedConstraint learn_constraint(std::span<const Observation> data, Index k,
                                   const Representation& rep, const OptimizerConfig& opt) {
  opt.validate();
  const ConsistencyObjective objective(data, rep, k);
  const Index count = objective.parameter_count();
  LearnedConstraint out{objective.model(Vector::Zero(count)), Vector::Zero(count)};
  out.seed = opt.seed;
  if (count == 0) {
    out.objective_value = objective(out.params);
    out.restarts_used = 0;
  } else {
    const InitSampler sampler = angle_sampler(count);
    Rng init_rng(derive_seed(opt.seed, 0x1417));
    const Vector init = sampler(init_rng);
    const auto result =
        optimize([&objective](const Vector& p) { return objective(p); }, init, opt, sampler);
    out.params = wrap_all(result.params);
    out.model = objective.model(out.params);
    out.objective_value = result.value;
    out.restarts_used = static_cast<int>(result.restarts.size());
    out.restarts_failed = result.restarts_failed;
    out.restarts_converged = result.restarts_converged;
  }
  out.degenerate_fraction = degenerate_prior_fraction(out.model, data);
  return out;
}

LearnedConstraint learn_constraint_sweep(std::span<const Observation> data,
                                         const Representation& rep, const OptimizerConfig& opt,
                                         double rel_tol) {
  check_data(data);
  const Index rows = rows_of(rep, data.front().u.size());
  double scale = 0.0;
  for (const auto& s : data) scale += s.u.norm();
  std::optional<LearnedConstraint> last;
  for (Index k = 1; k <= rows; ++k) {
    LearnedConstraint fit = learn_constraint(data, k, rep, opt);
    if (fit.objective_value < rel_tol * scale) return fit;
    last = std::move(fit);
  }
  return std::move(*last);
}

double selection_objective(const Matrix& lambda, const FeatureMap& feature,
                           std::span<const JointState> states, std::span<const Vector> w_hat) {
  if (states.size() != w_hat.size()) throw DimensionError("selection_objective: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (lambda.rows() == 0) continue;
    const Matrix a = lambda * feature(states[i]);
    const Matrix p = pseudo_inverse(a) * a;
    total += w_hat[i].dot(p * w_hat[i]);
  }
  return total;
}

LearnedSelection learn_selection_matrix(std::span<const JointState> states,
                                        std::span<const Vector> w_hat, const FeatureMap& feature,
                                        Index k, const OptimizerConfig& opt) {
  opt.validate();
  if (states.empty() || states.size() != w_hat.size()) {
    throw DimensionError("learn_selection_matrix: need matching non-empty states and w_hat");
  }
  if (k < 1 || k > feature.rows) throw DimensionError("learn_selection_matrix: bad k");
  std::vector<Matrix> phi;
  phi.reserve(states.size());
  for (const auto& x : states) phi.push_back(feature(x));
  for (const auto& w : w_hat) {
    require_dim(w.size(), feature.cols, "w_hat dimension");
    if (!w.allFinite()) throw NumericalError("learn_selection_matrix: non-finite w_hat");
  }

  const Index p = feature.rows;
  const Index count = spherical_parameter_count(k, p);
  auto eval = [&](const Matrix& lambda) {
    double total = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      const Matrix a = lambda * phi[i];
      const Matrix g = a * a.transpose();
      Eigen::LDLT<Matrix> ldlt(g);
      const Vector d = ldlt.vectorD();
      const double dmax = d.cwiseAbs().maxCoeff();
      if (ldlt.info() == Eigen::Success && dmax > 0.0 && d.minCoeff() > kGramPivotFloor * dmax) {
        const Vector aw = a * w_hat[i];
        total += aw.dot(ldlt.solve(aw));
      } else {
        total += w_hat[i].dot(pseudo_inverse(a) * (a * w_hat[i]));
      }
    }
    return total;
  };

  LearnedSelection out;
  if (count == 0) {
    out.lambda = Matrix::Identity(p, p);
    out.objective_value = eval(out.lambda);
  } else {
    const InitSampler sampler = angle_sampler(count);
    Rng init_rng(derive_seed(opt.seed, 0x5e1));
    const auto result = optimize(
        [&](const Vector& params) { return eval(spherical_rows(params, k, p)); },
        sampler(init_rng), opt, sampler);
    out.lambda = spherical_rows(wrap_all(result.params), k, p);
    out.objective_value = result.value;
  }
  bool any_full_rank = false;
  for (const auto& f : phi) {
    if (numerical_rank(out.lambda * f) == k) {
      any_full_rank = true;
      break;
    }
  }
  if (!any_full_rank) throw Error("learn_selection_matrix: Lambda Phi is rank deficient on all data");
  return out;
}

LearnedSelection learn_selection_exhaustive(std::span<const JointState> states,
                                            std::span<const Vector> w_hat,
                                            const FeatureMap& feature, std::optional<Index> k,
                                            double rel_tol) {
  const Index p = feature.rows;
  if (p < 1 || p > 8) throw DimensionError("learn_selection_exhaustive: needs 1 <= p <= 8");
  if (k && (*k < 1 || *k > p)) throw DimensionError("learn_selection_exhaustive: bad k");
  double scale = 0.0;
  for (const auto& w : w_hat) scale += w.squaredNorm();

  const unsigned patterns = 1u << p;
  LearnedSelection out;
  out.pattern_objectives.assign(patterns, 0.0);
  auto rows_for = [p](unsigned pattern) {
    Matrix lambda = Matrix::Zero(std::popcount(pattern), p);
    Index r = 0;
    for (Index i = 0; i < p; ++i) {
      if (pattern & (1u << i)) lambda(r++, i) = 1.0;
    }
    return lambda;
  };
  for (unsigned pattern = 1; pattern < patterns; ++pattern) {
    out.pattern_objectives[pattern] = selection_objective(rows_for(pattern), feature, states, w_hat);
  }

  std::optional<unsigned> best;
  for (unsigned pattern = 1; pattern < patterns; ++pattern) {
    const double value = out.pattern_objectives[pattern];
    const int ones = std::popcount(pattern);
    if (k) {
      if (ones != *k) continue;
      if (!best || value < out.pattern_objectives[*best]) best = pattern;
    } else {
      if (value > rel_tol * scale) continue;
      if (!best || ones > std::popcount(*best) ||
          (ones == std::popcount(*best) && value < out.pattern_objectives[*best])) {
        best = pattern;
      }
    }
  }
  if (!best) throw Error("learn_selection_exhaustive: no pattern satisfies the tolerance");
  out.pattern = best;
  out.lambda = rows_for(*best);
  out.objective_value = out.pattern_objectives[*best];
  return out;
}

}  // namespace ccl
