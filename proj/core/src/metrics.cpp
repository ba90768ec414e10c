#include "ccl/metrics.hpp"

#include <cmath>

#include "ccl/learning.hpp"

namespace ccl {

Vector action_std(std::span<const Observation> data) {
  if (data.empty()) throw DimensionError("action_std: empty dataset");
  const Index n = data.front().u.size();
  Vector mean = Vector::Zero(n);
  for (const auto& s : data) mean += s.u;
  mean /= static_cast<double>(data.size());
  Vector sq = Vector::Zero(n);
  for (const auto& s : data) sq += (s.u - mean).cwiseAbs2();
  const double denom = data.size() > 1 ? static_cast<double>(data.size() - 1) : 1.0;
  return (sq / denom).cwiseSqrt();
}

double nmse_w(std::span<const Vector> true_w, std::span<const Vector> est_w, const Vector& sigma_u) {
  if (true_w.size() != est_w.size()) throw DimensionError("nmse_w: length mismatch");
  if (true_w.empty()) throw DimensionError("nmse_w: empty input");
  bool any = false;
  for (Index i = 0; i < sigma_u.size(); ++i) any = any || sigma_u(i) > 0.0;
  if (!any) throw NumericalError("nmse_w: every dimension has zero standard deviation");
  double total = 0.0;
  for (std::size_t n = 0; n < true_w.size(); ++n) {
    require_dim(true_w[n].size(), sigma_u.size(), "nmse_w true_w");
    require_dim(est_w[n].size(), sigma_u.size(), "nmse_w est_w");
    for (Index i = 0; i < sigma_u.size(); ++i) {
      if (sigma_u(i) <= 0.0) continue;
      const double e = (true_w[n](i) - est_w[n](i)) / sigma_u(i);
      total += e * e;
    }
  }
  return total / static_cast<double>(true_w.size());
}

double consistency_error(const ConstraintModel& model, std::span<const Observation> data,
                         const Vector& sigma_u) {
  const double s2 = sigma_u.squaredNorm();
  if (!(s2 > 0.0)) throw NumericalError("consistency_error: ||sigma_u|| = 0");
  return consistency_objective(model, data) / (static_cast<double>(data.size()) * s2);
}

double projector_distance(const Matrix& n1, const Matrix& n2) {
  if (n1.rows() != n2.rows() || n1.cols() != n2.cols()) {
    throw DimensionError("projector_distance: shape mismatch");
  }
  return (n1 - n2).norm();
}

double max_projector_distance(const ConstraintModel& a, const ConstraintModel& b,
                              std::span<const Observation> data) {
  double worst = 0.0;
  for (const auto& s : data) {
    worst = std::max(worst, projector_distance(Projector(a.matrix(s.x)).nullspace(),
                                               Projector(b.matrix(s.x)).nullspace()));
  }
  return worst;
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace ccl
