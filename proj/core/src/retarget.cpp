#include "ccl/retarget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace ccl {

std::vector<Components> estimate_components(std::span<const Observation> data,
                                            const ConstraintModel& learned) {
  std::vector<Components> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    const Projector proj(learned.matrix(s.x));
    require_dim(s.pi.size(), proj.nullspace().cols(), "estimate_components: prior");
    require_dim(s.u.size(), proj.nullspace().cols(), "estimate_components: action");
    Components c;
    c.w_hat = proj.nullspace() * s.pi;
    c.v_hat = s.u - c.w_hat;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Vector> estimate_task_policy(const ConstraintModel& a_hat,
                                         std::span<const Observation> data) {
  std::vector<Vector> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Matrix a = a_hat.matrix(data[i].x);
    require_dim(data[i].u.size(), a.cols(), "estimate_task_policy: action");
    if (numerical_rank(a, kRankCollapseTolerance) < a.rows()) {
      throw RankCollapse("estimate_task_policy: learned constraint lost row rank", i);
    }
    out.emplace_back(a * data[i].u);
  }
  return out;
}

namespace {

const SelectionConstraint& require_selection(const ConstraintModel& m, const char* what) {
  const auto* sel = m.selection();
  if (sel == nullptr) {
    throw ConfigError(std::string(what) + ": needs a selection constraint A = Lambda Phi(x)");
  }
  return *sel;
}

// Task residual r* - r(x) with the orientation difference wrapped.
Eigen::Vector3d task_error(const PlanarArm& arm, const Eigen::Vector3d& target,
                           const JointState& x) {
  Eigen::Vector3d e = target - arm.task_coordinates(x);
  e(2) = wrap_angle(e(2));
  return e;
}

}  // namespace

AttractorTask fit_task_attractor(const ConstraintModel& learned, const PlanarArm& arm,
                                 std::span<const Observation> data, double gain) {
  const auto& sel = require_selection(learned, "fit_task_attractor");
  require_dim(sel.feature().rows, 3, "fit_task_attractor: feature rows");
  if (data.empty()) throw DimensionError("fit_task_attractor: no samples");
  if (!(gain > 0.0)) throw ConfigError("fit_task_attractor: gain must be positive");
  const Matrix& lambda = sel.lambda();
  const Index k = lambda.rows();
  const auto bs = estimate_task_policy(learned, data);

  // Stack Lambda r* = b_n / gain + Lambda r(x_n) over all samples.
  const auto rows = static_cast<Index>(data.size()) * k;
  Matrix lhs(rows, 3);
  Vector rhs(rows);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Index>(i) * k;
    lhs.middleRows(r, k) = lambda;
    rhs.segment(r, k) = bs[i] / gain + lambda * arm.task_coordinates(data[i].x);
  }
  AttractorTask task{arm, Eigen::Vector3d::Zero(), gain};
  task.target = lhs.completeOrthogonalDecomposition().solve(rhs);
  return task;
}

void RetargetPlan::validate() const {
  if (!embodiment) return;
  const auto& sel = require_selection(constraint, "RetargetPlan");
  const auto& corr = embodiment->row_correspondence;
  require_dim(static_cast<Index>(corr.size()), sel.feature().rows,
              "RetargetPlan: row correspondence size");
  std::set<Index> seen;
  for (Index r : corr) {
    if (r < 0 || r > 2) throw ConfigError("RetargetPlan: imitator row out of range (0..2)");
    if (!seen.insert(r).second) throw ConfigError("RetargetPlan: row correspondence is not injective");
  }
}

Matrix RetargetPlan::constraint_at(const JointState& x) const {
  if (!embodiment) return constraint.matrix(x);
  const auto& sel = require_selection(constraint, "RetargetPlan");
  require_dim(x.size(), embodiment->imitator.joint_count(), "RetargetPlan: imitator state");
  const Matrix j = embodiment->imitator.jacobian(x);
  Matrix phi(static_cast<Index>(embodiment->row_correspondence.size()), j.cols());
  for (std::size_t i = 0; i < embodiment->row_correspondence.size(); ++i) {
    phi.row(static_cast<Index>(i)) = j.row(embodiment->row_correspondence[i]);
  }
  return sel.lambda() * phi;
}

namespace {

Vector task_command(const RetargetPlan& plan, const JointState& x, std::size_t step, Index k) {
  if (const auto* replay = std::get_if<ReplayTask>(&plan.task)) {
    if (step >= replay->b_hat.size()) return Vector::Zero(k);
    require_dim(replay->b_hat[step].size(), k, "retarget: replayed b_hat");
    return replay->b_hat[step];
  }
  const auto& att = std::get<AttractorTask>(plan.task);
  const auto& sel = require_selection(plan.constraint, "retarget attractor");
  if (!plan.embodiment) {
    return sel.lambda() * (att.gain * task_error(att.arm, att.target, x));
  }
  // Imitator task coordinates, reordered into the learned row meaning.
  const Eigen::Vector3d e = task_error(plan.embodiment->imitator, att.target, x);
  Vector mapped(static_cast<Index>(plan.embodiment->row_correspondence.size()));
  for (std::size_t i = 0; i < plan.embodiment->row_correspondence.size(); ++i) {
    mapped(static_cast<Index>(i)) = e(plan.embodiment->row_correspondence[i]);
  }
  return sel.lambda() * (att.gain * mapped);
}

}  // namespace

RetargetAction retarget_step(const RetargetPlan& plan, const JointState& x, std::size_t step) {
  RetargetAction act;
  act.a = plan.constraint_at(x);
  require_dim(x.size(), act.a.cols(), "retarget_step: state");
  act.manipulability = manipulability(act.a);
  if (numerical_rank(act.a, kRankCollapseTolerance) < act.a.rows()) {
    throw RankCollapse("retarget_step: singular constraint, manipulability " +
                           std::to_string(act.manipulability),
                       step);
  }
  act.b_hat = task_command(plan, x, step, act.a.rows());
  act.pi_r = eval_policy(plan.robot_policy, x);
  require_dim(act.pi_r.size(), act.a.cols(), "retarget_step: robot policy");
  const Projector proj(act.a);
  act.task_part = proj.pseudo_inverse() * act.b_hat;
  act.null_part = proj.nullspace() * act.pi_r;
  act.u = act.task_part + act.null_part;
  if (!act.u.allFinite()) throw NumericalError("retarget_step: non-finite action");
  return act;
}

Trajectory reproduce_trajectory(const RetargetPlan& plan, const JointState& x0, double dt,
                                double duration) {
  if (!(dt > 0.0)) throw DimensionError("reproduce_trajectory: dt must be positive");
  if (!(duration >= 0.0)) throw DimensionError("reproduce_trajectory: negative duration");
  plan.validate();
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  Trajectory traj;
  traj.dt = dt;
  traj.samples.reserve(steps);
  traj.truth.reserve(steps);
  JointState x = x0;
  for (std::size_t t = 0; t < steps; ++t) {
    RetargetAction act = retarget_step(plan, x, t);
    traj.samples.push_back(Observation{x, act.u, act.pi_r});
    traj.truth.push_back(GroundTruth{std::move(act.task_part), std::move(act.null_part),
                                     std::move(act.b_hat), std::move(act.a), act.pi_r});
    x += dt * act.u;
  }
  return traj;
}

ObstacleRegion::ObstacleRegion(double x_min, double y_min, double x_max, double y_max)
    : lo_(x_min, y_min), hi_(x_max, y_max) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max)) {
    throw ConfigError("ObstacleRegion: non-finite bounds");
  }
  if (!(x_max > x_min) || !(y_max > y_min)) {
    throw ConfigError("ObstacleRegion: rectangle must have positive area");
  }
}

bool ObstacleRegion::contains(const Eigen::Vector2d& p) const {
  return p.x() >= lo_.x() && p.x() <= hi_.x() && p.y() >= lo_.y() && p.y() <= hi_.y();
}

double ObstacleRegion::distance(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d d = (lo_ - p).cwiseMax(p - hi_).cwiseMax(0.0);
  return d.norm();
}

bool ObstacleRegion::intersects(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const {
  // Liang-Barsky clipping of a + t (b - a), t in [0, 1].
  const Eigen::Vector2d d = b - a;
  double t0 = 0.0;
  double t1 = 1.0;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {a.x() - lo_.x(), hi_.x() - a.x(), a.y() - lo_.y(), hi_.y() - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
    if (t0 > t1) return false;
  }
  return true;
}

namespace {

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = b - a;
  const double len2 = d.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (a + t * d - p).norm();
}

}  // namespace

double ObstacleRegion::segment_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const {
  if (intersects(a, b)) return 0.0;
  double best = std::min(distance(a), distance(b));
  const Eigen::Vector2d corners[4] = {lo_, {hi_.x(), lo_.y()}, hi_, {lo_.x(), hi_.y()}};
  for (const auto& c : corners) best = std::min(best, point_segment_distance(c, a, b));
  return best;
}

ClearanceReport check_obstacle_clearance(const Trajectory& trajectory, const PlanarArm& arm,
                                         const ObstacleRegion& region) {
  ClearanceReport rep;
  rep.min_distance = std::numeric_limits<double>::infinity();
  std::set<Index> hit;
  for (std::size_t t = 0; t < trajectory.samples.size(); ++t) {
    const auto pts = arm.joint_positions(trajectory.samples[t].x);
    bool violated = false;
    for (std::size_t l = 0; l + 1 < pts.size(); ++l) {
      const double d = region.segment_distance(pts[l], pts[l + 1]);
      rep.min_distance = std::min(rep.min_distance, d);
      if (d == 0.0) {
        const auto link = static_cast<Index>(l + 1);
        hit.insert(link);
        if (!rep.first_step) {
          rep.first_step = t;
          rep.first_link = link;
        }
        violated = true;
      }
    }
    if (violated) ++rep.violating_steps;
  }
  rep.clear = rep.violating_steps == 0;
  rep.links_hit.assign(hit.begin(), hit.end());
  if (trajectory.samples.empty()) rep.min_distance = 0.0;
  return rep;
}

}  // namespace ccl
