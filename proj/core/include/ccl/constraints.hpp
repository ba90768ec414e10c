#pragma once

#include <functional>
#include <string>
#include <variant>

#include "ccl/types.hpp"

namespace ccl {

/// Singular values below rel_tol * sigma_max are treated as zero.
inline constexpr double kDefaultPinvTolerance = 1e-10;

/// Moore-Penrose pseudo-inverse via SVD. Throws NumericalError on non-finite input.
Matrix pseudo_inverse(const Eigen::Ref<const Matrix>& m, double rel_tol = kDefaultPinvTolerance);

/// Numerical rank with the same cut-off rule as pseudo_inverse.
Index numerical_rank(const Eigen::Ref<const Matrix>& m, double rel_tol = kDefaultPinvTolerance);

/// Generalised spherical coordinates: n-1 angles to a unit vector in R^n.
///
/// Component i is cos(angle_i) times the product of the preceding sines; the
/// last component is the product of all sines.
Vector spherical_to_unit(const Eigen::Ref<const Vector>& angles, Index n);

/// Inverse of spherical_to_unit for a unit (or non-zero) vector. Returns n-1 angles.
Vector unit_to_spherical(const Eigen::Ref<const Vector>& unit);

/// Number of angles needed for k mutually orthonormal rows in R^n: k(2n-k-1)/2.
Index spherical_parameter_count(Index k, Index n);

/// Builds k orthonormal rows from angles.
///
/// Row 1 uses the first n-1 angles. Each further row is a unit vector, drawn
/// from the next block of angles, expressed in an orthonormal basis of the
/// complement of the rows so far; that basis is updated with a Householder
/// reflection that carries the previous row onto the first basis vector.
Matrix spherical_rows(const Eigen::Ref<const Vector>& theta, Index k, Index n);

/// Constant constraint matrix with orthonormal rows, parameterised by angles.
class SphericalConstraint {
 public:
  SphericalConstraint(Vector theta, Index k, Index n);

  const Vector& theta() const { return theta_; }
  Index k() const { return k_; }
  Index n() const { return n_; }
  const Matrix& matrix() const { return a_; }

 private:
  Vector theta_;
  Index k_;
  Index n_;
  Matrix a_;
};

/// State-dependent feature matrix Phi(x) with `rows` candidate constraints on
/// an action space of dimension `cols`.
struct FeatureMap {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::function<Matrix(const JointState&)> eval;

  Matrix operator()(const JointState& x) const { return eval(x); }
};

/// Phi(x) = I_n.
FeatureMap identity_features(Index n);

/// A(x) = Lambda * Phi(x).
class SelectionConstraint {
 public:
  SelectionConstraint(Matrix lambda, FeatureMap feature);

  Matrix matrix(const JointState& x) const;
  const Matrix& lambda() const { return lambda_; }
  const FeatureMap& feature() const { return feature_; }
  Index k() const { return lambda_.rows(); }
  Index n() const { return feature_.cols; }

 private:
  Matrix lambda_;
  FeatureMap feature_;
};

/// Either constraint representation behind one evaluation interface.
class ConstraintModel {
 public:
  using Representation = std::variant<SphericalConstraint, SelectionConstraint>;

  ConstraintModel(SphericalConstraint c) : rep_(std::move(c)) {}  // NOLINT
  ConstraintModel(SelectionConstraint c) : rep_(std::move(c)) {}  // NOLINT

  /// Wraps a fixed matrix as Lambda = A over identity features.
  static ConstraintModel constant(Matrix a);

  Matrix matrix(const JointState& x) const;
  Index k() const;
  Index n() const;
  bool state_dependent() const;

  const Representation& representation() const { return rep_; }
  const SphericalConstraint* spherical() const { return std::get_if<SphericalConstraint>(&rep_); }
  const SelectionConstraint* selection() const { return std::get_if<SelectionConstraint>(&rep_); }

 private:
  Representation rep_;
};

/// Null-space projector N = I - A^+ A together with its source matrices.
class Projector {
 public:
  explicit Projector(const Matrix& a, double rel_tol = kDefaultPinvTolerance);

  const Matrix& constraint() const { return a_; }
  const Matrix& pseudo_inverse() const { return a_pinv_; }
  const Matrix& nullspace() const { return n_; }
  Index rank() const { return rank_; }

 private:
  Matrix a_;
  Matrix a_pinv_;
  Matrix n_;
  Index rank_;
};

inline Projector null_projector(const Matrix& a, double rel_tol = kDefaultPinvTolerance) {
  return Projector(a, rel_tol);
}

}  // namespace ccl
