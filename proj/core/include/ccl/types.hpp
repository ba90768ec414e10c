#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "ccl/error.hpp"

namespace ccl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Joint angles (rad) or any generic state vector x.
using JointState = Eigen::VectorXd;
/// Joint velocities (rad/s) or any generic action vector u.
using JointAction = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

inline void require_dim(Index got, Index expected, const char* what) {
  if (got != expected) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  }
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

}  // namespace ccl
