#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "ccl/constraints.hpp"
#include "ccl/kinematics.hpp"
#include "ccl/policies.hpp"
#include "ccl/simulator.hpp"

namespace ccl {

/// Null-space / task split of observed actions under a learned model.
struct Components {
  Vector w_hat;  // N(x) pi
  Vector v_hat;  // u - w_hat
};

std::vector<Components> estimate_components(std::span<const Observation> data,
                                            const ConstraintModel& learned);

/// b_hat_n = A_hat(x_n) u_n. Throws RankCollapse at the first sample where
/// A_hat loses row rank.
std::vector<Vector> estimate_task_policy(const ConstraintModel& a_hat,
                                         std::span<const Observation> data);

/// Recorded b_hat replayed by step index; zero after the recording ends.
struct ReplayTask {
  std::vector<Vector> b_hat;
};

/// b_hat(x) = Lambda_hat gain (r* - r(x)) in the demonstrator's task space.
struct AttractorTask {
  PlanarArm arm{{1.0}};
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  double gain = 1.0;
};

using TaskSource = std::variant<ReplayTask, AttractorTask>;

/// Least-squares task target r* consistent with b_hat_n = Lambda (r* - r_n) gain
/// on the data. The learned model must be a selection over the arm's Jacobian.
AttractorTask fit_task_attractor(const ConstraintModel& learned, const PlanarArm& arm,
                                 std::span<const Observation> data, double gain = 1.0);

/// Imitator with a different kinematic structure. Learned row i (a row of
/// the demonstrator's Jacobian) corresponds to imitator Jacobian row
/// `row_correspondence[i]`.
struct Embodiment {
  PlanarArm imitator{{1.0}};
  std::vector<Index> row_correspondence{0, 1, 2};
};

struct RetargetPlan {
  ConstraintModel constraint;  // learned A_hat for the demonstrator
  TaskSource task;
  PolicySpec robot_policy;
  std::optional<Embodiment> embodiment;

  /// Checks the correspondence is injective and dimensions agree.
  void validate() const;

  /// A_hat(x), or Lambda_hat rows mapped onto the imitator Jacobian.
  Matrix constraint_at(const JointState& x) const;
};

/// Decomposed action of the retargeted controller at one step.
struct RetargetAction {
  Vector u;
  Vector task_part;  // A^+ b_hat
  Vector null_part;  // N pi_r
  Vector b_hat;
  Matrix a;
  Vector pi_r;
  double manipulability = 0.0;
};

/// u = A^+ b_hat + (I - A^+ A) pi_r at state x and step index `step`.
/// Throws RankCollapse when A loses row rank at x.
RetargetAction retarget_step(const RetargetPlan& plan, const JointState& x, std::size_t step);

/// Euler rollout of retarget_step. Ground-truth records carry the
/// decomposition at every step (v = task part, w = null part, b = b_hat).
Trajectory reproduce_trajectory(const RetargetPlan& plan, const JointState& x0, double dt,
                                double duration);

/// Axis-aligned rectangle in the workspace.
class ObstacleRegion {
 public:
  ObstacleRegion(double x_min, double y_min, double x_max, double y_max);

  double x_min() const { return lo_.x(); }
  double y_min() const { return lo_.y(); }
  double x_max() const { return hi_.x(); }
  double y_max() const { return hi_.y(); }

  bool contains(const Eigen::Vector2d& p) const;
  double distance(const Eigen::Vector2d& p) const;
  /// Closed-rectangle intersection test for the segment a-b.
  bool intersects(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const;
  /// 0 when intersecting, else the Euclidean segment-to-rectangle distance.
  double segment_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const;

 private:
  Eigen::Vector2d lo_;
  Eigen::Vector2d hi_;
};

struct ClearanceReport {
  bool clear = true;
  std::size_t violating_steps = 0;
  std::optional<std::size_t> first_step;
  std::optional<Index> first_link;  // 1-based link number
  std::vector<Index> links_hit;     // sorted, 1-based
  double min_distance = 0.0;
};

ClearanceReport check_obstacle_clearance(const Trajectory& trajectory, const PlanarArm& arm,
                                         const ObstacleRegion& region);

}  // namespace ccl
