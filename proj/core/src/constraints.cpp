#include "ccl/constraints.hpp"

#include <cmath>
#include <string>

namespace ccl {

namespace {

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
}

}  // namespace

Matrix pseudo_inverse(const Eigen::Ref<const Matrix>& m, double rel_tol) {
  require_finite(m, "pseudo_inverse");
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rel_tol * (s.size() > 0 ? s(0) : 0.0);
  Vector s_inv = Vector::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) s_inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

Index numerical_rank(const Eigen::Ref<const Matrix>& m, double rel_tol) {
  require_finite(m, "numerical_rank");
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  const double cutoff = rel_tol * s(0);
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) ++rank;
  }
  return rank;
}

Vector spherical_to_unit(const Eigen::Ref<const Vector>& angles, Index n) {
  if (n < 1) throw DimensionError("spherical_to_unit: n must be >= 1");
  if (angles.size() == 0 && n > 1) {
    throw DimensionError("spherical_to_unit: empty angle vector for n = " + std::to_string(n));
  }
  require_dim(angles.size(), n - 1, "spherical_to_unit angles");
  Vector out(n);
  double sines = 1.0;
  for (Index i = 0; i < n - 1; ++i) {
    out(i) = sines * std::cos(angles(i));
    sines *= std::sin(angles(i));
  }
  out(n - 1) = sines;
  return out;
}

Vector unit_to_spherical(const Eigen::Ref<const Vector>& unit) {
  const Index n = unit.size();
  if (n < 1) throw DimensionError("unit_to_spherical: empty vector");
  require_finite(unit, "unit_to_spherical");
  Vector angles(n - 1);
  for (Index i = 0; i < n - 1; ++i) {
    // tail norm of the remaining components
    const double tail = unit.tail(n - i - 1).norm();
    angles(i) = std::atan2(tail, unit(i));
  }
  // The final angle carries the sign of the last component.
  if (n >= 2 && unit(n - 1) < 0.0) {
    angles(n - 2) = std::atan2(unit(n - 1), unit(n - 2));
  }
  return angles;
}

Index spherical_parameter_count(Index k, Index n) {
  if (k < 0 || n < 1 || k > n) {
    throw DimensionError("spherical_parameter_count: need 0 <= k <= n (k = " + std::to_string(k) +
                         ", n = " + std::to_string(n) + ")");
  }
  return k * (2 * n - k - 1) / 2;
}

Matrix spherical_rows(const Eigen::Ref<const Vector>& theta, Index k, Index n) {
  if (k > n) {
    throw DimensionError("spherical_rows: k = " + std::to_string(k) + " exceeds n = " +
                         std::to_string(n));
  }
  require_dim(theta.size(), spherical_parameter_count(k, n), "spherical_rows parameter count");
  Matrix rows(k, n);
  Matrix basis = Matrix::Identity(n, n);  // columns span the current complement
  Index offset = 0;
  for (Index r = 0; r < k; ++r) {
    const Index m = n - r;
    const Vector c = spherical_to_unit(theta.segment(offset, m - 1), m);
    offset += m - 1;
    rows.row(r) = (basis * c).transpose();
    if (r + 1 == k) break;
    // Householder reflection H with H c = e1; columns 2..m of H span c's complement.
    Vector v = c;
    v(0) -= 1.0;
    const double vv = v.squaredNorm();
    Matrix h = Matrix::Identity(m, m);
    if (vv > 1e-300) h.noalias() -= (2.0 / vv) * v * v.transpose();
    basis = (basis * h.rightCols(m - 1)).eval();
  }
  return rows;
}

SphericalConstraint::SphericalConstraint(Vector theta, Index k, Index n)
    : theta_(std::move(theta)), k_(k), n_(n), a_(spherical_rows(theta_, k, n)) {}

FeatureMap identity_features(Index n) {
  return FeatureMap{"identity", n, n, [n](const JointState&) { return Matrix::Identity(n, n); }};
}

SelectionConstraint::SelectionConstraint(Matrix lambda, FeatureMap feature)
    : lambda_(std::move(lambda)), feature_(std::move(feature)) {
  require_dim(lambda_.cols(), feature_.rows, "SelectionConstraint lambda columns");
  require_finite(lambda_, "SelectionConstraint lambda");
}

Matrix SelectionConstraint::matrix(const JointState& x) const {
  const Matrix phi = feature_(x);
  require_dim(phi.rows(), feature_.rows, "feature rows");
  require_dim(phi.cols(), feature_.cols, "feature cols");
  return lambda_ * phi;
}

ConstraintModel ConstraintModel::constant(Matrix a) {
  const Index n = a.cols();
  return ConstraintModel(SelectionConstraint(std::move(a), identity_features(n)));
}

Matrix ConstraintModel::matrix(const JointState& x) const {
  if (const auto* s = spherical()) return s->matrix();
  return std::get<SelectionConstraint>(rep_).matrix(x);
}

Index ConstraintModel::k() const {
  return std::visit([](const auto& c) { return c.k(); }, rep_);
}

Index ConstraintModel::n() const {
  return std::visit([](const auto& c) { return c.n(); }, rep_);
}

bool ConstraintModel::state_dependent() const {
  if (spherical()) return false;
  return selection()->feature().name != "identity";
}

Projector::Projector(const Matrix& a, double rel_tol)
    : a_(a), a_pinv_(ccl::pseudo_inverse(a, rel_tol)), rank_(numerical_rank(a, rel_tol)) {
  n_ = Matrix::Identity(a.cols(), a.cols()) - a_pinv_ * a_;
}

}  // namespace ccl
