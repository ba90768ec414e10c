#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "ccl/constraints.hpp"
#include "ccl/types.hpp"

namespace ccl {

/// End-effector position and orientation of a planar arm.
struct TaskPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // (-pi, pi]

  Eigen::Vector3d vector() const { return {x, y, theta}; }
};

/// Rows of the planar task space, in Jacobian row order.
enum class TaskAxis { X = 0, Y = 1, Theta = 2 };

/// Serial chain of revolute joints moving in the plane. Joint angles are
/// relative: link i points along the sum of the first i angles.
class PlanarArm {
 public:
  explicit PlanarArm(std::vector<double> link_lengths);

  Index joint_count() const { return static_cast<Index>(links_.size()); }
  const std::vector<double>& link_lengths() const { return links_; }
  double reach() const;

  TaskPose forward_kinematics(const JointState& q) const;

  /// (x, y, sum of angles) without wrapping the orientation.
  Eigen::Vector3d task_coordinates(const JointState& q) const;

  /// 3 x n matrix of partial derivatives of (x, y, theta).
  Matrix jacobian(const JointState& q) const;

  /// Base, every joint and the end-effector: n + 1 points.
  std::vector<Eigen::Vector2d> joint_positions(const JointState& q) const;

 private:
  std::vector<double> links_;
};

/// Phi(x) = J(x) for the given arm.
FeatureMap jacobian_features(const PlanarArm& arm);

/// Phi(x) = rows of J(x) picked by `rows` (used to map learned rows onto another arm).
FeatureMap jacobian_row_features(const PlanarArm& arm, std::vector<Index> rows);

/// Parses "x", "y,theta", "x,y" ... into task axes. Accepts "t"/"theta"/"th".
std::vector<TaskAxis> parse_axes(std::string_view text);
std::string axes_label(std::span<const TaskAxis> axes);

/// k x 3 row-selection matrix for the given axes.
Matrix axis_selection(std::span<const TaskAxis> axes);

/// Diagonal 3 x 3 selection with the given 0/1 pattern; bit i selects axis i.
Matrix diagonal_selection(unsigned pattern);

/// sqrt(det(A A^T)). Returns 0 for rank-deficient A.
double manipulability(const Eigen::Ref<const Matrix>& a);

inline constexpr double kDefaultGradientStep = 1e-5;

/// Central finite-difference gradient of x -> manipulability(model.matrix(x)).
Vector manipulability_gradient(const ConstraintModel& model, const JointState& x,
                               double h = kDefaultGradientStep);

}  // namespace ccl
