#include "ccl/kinematics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace ccl {

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

PlanarArm::PlanarArm(std::vector<double> link_lengths) : links_(std::move(link_lengths)) {
  if (links_.empty()) throw DimensionError("PlanarArm: at least one link is required");
  for (double l : links_) {
    if (!(l > 0.0) || !std::isfinite(l)) {
      throw DimensionError("PlanarArm: link lengths must be positive and finite");
    }
  }
}

double PlanarArm::reach() const {
  double r = 0.0;
  for (double l : links_) r += l;
  return r;
}

Eigen::Vector3d PlanarArm::task_coordinates(const JointState& q) const {
  require_dim(q.size(), joint_count(), "forward_kinematics q");
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  for (Index i = 0; i < joint_count(); ++i) {
    phi += q(i);
    x += links_[i] * std::cos(phi);
    y += links_[i] * std::sin(phi);
  }
  return {x, y, phi};
}

TaskPose PlanarArm::forward_kinematics(const JointState& q) const {
  const Eigen::Vector3d r = task_coordinates(q);
  return TaskPose{r.x(), r.y(), wrap_angle(r.z())};
}

Matrix PlanarArm::jacobian(const JointState& q) const {
  require_dim(q.size(), joint_count(), "jacobian q");
  const Index n = joint_count();
  Vector cx(n);
  Vector cy(n);
  double phi = 0.0;
  for (Index i = 0; i < n; ++i) {
    phi += q(i);
    cx(i) = links_[i] * std::cos(phi);
    cy(i) = links_[i] * std::sin(phi);
  }
  Matrix j(3, n);
  double sx = 0.0;
  double sy = 0.0;
  for (Index i = n - 1; i >= 0; --i) {
    sx += cx(i);
    sy += cy(i);
    j(0, i) = -sy;
    j(1, i) = sx;
    j(2, i) = 1.0;
  }
  return j;
}

std::vector<Eigen::Vector2d> PlanarArm::joint_positions(const JointState& q) const {
  require_dim(q.size(), joint_count(), "joint_positions q");
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(links_.size() + 1);
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  pts.push_back(p);
  double phi = 0.0;
  for (Index i = 0; i < joint_count(); ++i) {
    phi += q(i);
    p += links_[i] * Eigen::Vector2d(std::cos(phi), std::sin(phi));
    pts.push_back(p);
  }
  return pts;
}

FeatureMap jacobian_features(const PlanarArm& arm) {
  return FeatureMap{"jacobian", 3, arm.joint_count(),
                    [arm](const JointState& q) { return arm.jacobian(q); }};
}

FeatureMap jacobian_row_features(const PlanarArm& arm, std::vector<Index> rows) {
  for (Index r : rows) {
    if (r < 0 || r > 2) throw DimensionError("jacobian_row_features: row index out of range");
  }
  const Index p = static_cast<Index>(rows.size());
  return FeatureMap{"jacobian_rows", p, arm.joint_count(),
                    [arm, rows = std::move(rows)](const JointState& q) {
                      const Matrix j = arm.jacobian(q);
                      Matrix out(static_cast<Index>(rows.size()), j.cols());
                      for (std::size_t i = 0; i < rows.size(); ++i) {
                        out.row(static_cast<Index>(i)) = j.row(rows[i]);
                      }
                      return out;
                    }};
}

std::vector<TaskAxis> parse_axes(std::string_view text) {
  std::vector<TaskAxis> axes;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    if (token == "x") {
      axes.push_back(TaskAxis::X);
    } else if (token == "y") {
      axes.push_back(TaskAxis::Y);
    } else if (token == "theta" || token == "t" || token == "th") {
      axes.push_back(TaskAxis::Theta);
    } else {
      throw ConfigError("unknown task axis '" + token + "'");
    }
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '_') {
      flush();
    } else {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  if (axes.empty()) throw ConfigError("empty task axis list");
  for (std::size_t i = 1; i < axes.size(); ++i) {
    if (axes[i] <= axes[i - 1]) {
      throw ConfigError("task axes must be distinct and in x, y, theta order: '" +
                        std::string(text) + "'");
    }
  }
  return axes;
}

std::string axes_label(std::span<const TaskAxis> axes) {
  std::string out;
  for (TaskAxis a : axes) {
    if (!out.empty()) out += ",";
    out += a == TaskAxis::X ? "x" : a == TaskAxis::Y ? "y" : "theta";
  }
  return out;
}

Matrix axis_selection(std::span<const TaskAxis> axes) {
  Matrix s = Matrix::Zero(static_cast<Index>(axes.size()), 3);
  for (std::size_t i = 0; i < axes.size(); ++i) {
    s(static_cast<Index>(i), static_cast<Index>(axes[i])) = 1.0;
  }
  return s;
}

Matrix diagonal_selection(unsigned pattern) {
  Matrix s = Matrix::Zero(3, 3);
  for (Index i = 0; i < 3; ++i) {
    if (pattern & (1u << i)) s(i, i) = 1.0;
  }
  return s;
}

double manipulability(const Eigen::Ref<const Matrix>& a) {
  if (!a.allFinite()) throw NumericalError("manipulability: non-finite matrix");
  if (a.rows() == 0) return 1.0;
  if (a.rows() > a.cols()) return 0.0;
  const Matrix gram = a * a.transpose();
  const double det = gram.determinant();
  return det > 0.0 ? std::sqrt(det) : 0.0;
}

Vector manipulability_gradient(const ConstraintModel& model, const JointState& x, double h) {
  if (!(h > 0.0)) throw NumericalError("manipulability_gradient: step must be positive");
  Vector grad(x.size());
  JointState probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = manipulability(model.matrix(probe));
    probe(i) = x(i) - h;
    const double down = manipulability(model.matrix(probe));
    probe(i) = x(i);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("manipulability_gradient: non-finite manipulability");
    }
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace ccl
