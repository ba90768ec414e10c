#include "ccl/baseline.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

namespace ccl {

namespace {

Vector residual(const Vector& w, const Vector& u, double floor, bool& floored) {
  const double nn = w.squaredNorm();
  floored = nn < floor * floor;
  const double denom = std::max(nn, floor * floor);
  return w * (w.dot(u) / denom) - w;
}

struct SeparationFunctor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const Matrix* feats;  // (M + 1) x N
  const Matrix* actions;  // n x N
  double floor;
  int n_inputs;
  int n_values;

  int inputs() const { return n_inputs; }
  int values() const { return n_values; }

  int operator()(const Eigen::VectorXd& params, Eigen::VectorXd& out) const {
    const Index n = actions->rows();
    const Eigen::Map<const Matrix> w_mat(params.data(), n, feats->rows());
    const Matrix w_all = w_mat * (*feats);
    for (Index i = 0; i < actions->cols(); ++i) {
      bool floored = false;
      out.segment(i * n, n) = residual(w_all.col(i), actions->col(i), floor, floored);
    }
    return 0;
  }
};

double median_pairwise_distance(const Matrix& pts) {
  std::vector<double> d;
  for (Index i = 0; i < pts.cols(); ++i) {
    for (Index j = i + 1; j < pts.cols(); ++j) d.push_back((pts.col(i) - pts.col(j)).norm());
  }
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  const double m = d[d.size() / 2];
  return m > 0.0 ? m : 1.0;
}

}  // namespace

Vector RbfModel::features(const JointState& x) const {
  const Index m = centers.cols();
  Vector f(m + 1);
  const double inv = 1.0 / (2.0 * width * width);
  for (Index j = 0; j < m; ++j) f(j) = std::exp(-(x - centers.col(j)).squaredNorm() * inv);
  f(m) = 1.0;
  return f;
}

double separation_objective(const RbfModel& model, std::span<const Observation> data,
                            double norm_floor) {
  double total = 0.0;
  for (const auto& s : data) {
    bool floored = false;
    total += residual(model(s.x), s.u, norm_floor, floored).squaredNorm();
  }
  return total;
}

BaselineResult baseline_separate_nullspace(std::span<const Observation> data,
                                           const BaselineConfig& cfg) {
  if (data.size() < 2) throw DimensionError("baseline: need at least two samples");
  const auto count = static_cast<Index>(data.size());
  const Index dx = data.front().x.size();
  const Index n = data.front().u.size();
  const Index m = std::max<Index>(1, std::min<Index>(static_cast<Index>(cfg.num_centers), count - 1));

  RbfModel model;
  model.centers.resize(dx, m);
  for (Index j = 0; j < m; ++j) {
    // evenly spaced subset, deterministic
    const Index idx = (j * count) / m;
    model.centers.col(j) = data[static_cast<std::size_t>(idx)].x;
  }
  model.width = median_pairwise_distance(model.centers);

  Matrix feats(m + 1, count);
  Matrix actions(n, count);
  for (Index i = 0; i < count; ++i) {
    feats.col(i) = model.features(data[static_cast<std::size_t>(i)].x);
    actions.col(i) = data[static_cast<std::size_t>(i)].u;
  }
  if (!actions.allFinite()) throw NumericalError("baseline: non-finite actions");

  // Initial guess: w(x) fitted to u, where P u = u holds trivially.
  model.weights = feats.transpose().completeOrthogonalDecomposition().solve(actions.transpose()).transpose();

  SeparationFunctor functor{&feats, &actions, cfg.norm_floor, static_cast<int>(n * (m + 1)),
                            static_cast<int>(n * count)};
  Eigen::VectorXd params = Eigen::Map<const Eigen::VectorXd>(model.weights.data(), model.weights.size());
  Eigen::VectorXd res(functor.n_values);
  functor(params, res);
  if (functor.n_values >= functor.n_inputs && res.squaredNorm() > 1e-20) {
    Eigen::NumericalDiff<SeparationFunctor> numdiff(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<SeparationFunctor>> lm(numdiff);
    lm.parameters.maxfev = cfg.max_function_evals;
    lm.minimize(params);
    model.weights = Eigen::Map<const Matrix>(params.data(), n, m + 1);
  }

  BaselineResult out;
  out.model = model;
  out.w_hat.reserve(data.size());
  out.v_hat.reserve(data.size());
  for (const auto& s : data) {
    Vector w = model(s.x);
    if (w.norm() < cfg.norm_floor) ++out.floored_samples;
    out.v_hat.push_back(s.u - w);
    out.w_hat.push_back(std::move(w));
  }
  out.objective = separation_objective(model, data, cfg.norm_floor);
  return out;
}

}  // namespace ccl
