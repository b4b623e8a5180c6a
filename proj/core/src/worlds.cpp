#include "vpsto/worlds.hpp"

#include "vpsto/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vpsto {

namespace {

double distance_to_rect(const Eigen::Vector2d& p, const Rect& r) {
  const double dx = std::max({r.min.x() - p.x(), 0.0, p.x() - r.max.x()});
  const double dy = std::max({r.min.y() - p.y(), 0.0, p.y() - r.max.y()});
  return std::hypot(dx, dy);
}

bool strictly_inside(const Eigen::Vector2d& p, const Rect& r) {
  return p.x() > r.min.x() && p.x() < r.max.x() && p.y() > r.min.y() && p.y() < r.max.y();
}

// Total signed angle swept around `center` along the polyline.
double swept_angle(const Eigen::MatrixXd& path, const Eigen::Vector2d& center) {
  double total = 0.0;
  for (Eigen::Index i = 1; i < path.rows(); ++i) {
    const Eigen::Vector2d a = path.row(i - 1).transpose() - center;
    const Eigen::Vector2d b = path.row(i).transpose() - center;
    total += std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
  }
  return total;
}

}  // namespace

World2D::World2D(Rect bounds, double robot_radius, std::vector<Disk> disks, std::vector<Rect> rects)
    : bounds_(std::move(bounds)),
      robot_radius_(robot_radius),
      disks_(std::move(disks)),
      rects_(std::move(rects)) {
  if (robot_radius_ < 0.0) throw std::invalid_argument("robot radius must be non-negative");
  if (!(bounds_.min.array() < bounds_.max.array()).all()) {
    throw std::invalid_argument("workspace bounds are empty");
  }
  for (const Disk& d : disks_) {
    if (d.radius <= 0.0) throw std::invalid_argument("disk radius must be positive");
  }
  for (const Rect& r : rects_) {
    if (!(r.min.array() < r.max.array()).all()) throw std::invalid_argument("rectangle is empty");
  }
}

bool World2D::is_colliding(const Eigen::VectorXd& q) const {
  if (q.size() != 2) throw DimensionMismatch("World2D expects 2D configurations");
  const Eigen::Vector2d p = q;
  if (p.x() - robot_radius_ < bounds_.min.x() || p.x() + robot_radius_ > bounds_.max.x() ||
      p.y() - robot_radius_ < bounds_.min.y() || p.y() + robot_radius_ > bounds_.max.y()) {
    return true;
  }
  for (const Disk& d : disks_) {
    if ((p - d.center).norm() < d.radius + robot_radius_) return true;
  }
  for (const Rect& r : rects_) {
    if (strictly_inside(p, r) || distance_to_rect(p, r) < robot_radius_) return true;
  }
  return false;
}

Eigen::VectorXd World2D::q_min() const {
  return (bounds_.min.array() + robot_radius_).matrix();
}

Eigen::VectorXd World2D::q_max() const {
  return (bounds_.max.array() - robot_radius_).matrix();
}

World2D cluttered_world() {
  const Rect bounds{{-1.0, -1.0}, {1.0, 1.0}};
  std::vector<Rect> rects{{{0.0, -0.4}, {0.15, 0.4}}};
  std::vector<Disk> disks{
      {{-0.50, 0.60}, 0.12},
      {{-0.45, -0.60}, 0.12},
      {{0.55, 0.65}, 0.12},
      {{0.60, -0.60}, 0.12},
      {{0.50, 0.00}, 0.10},
  };
  return World2D(bounds, 0.05, std::move(disks), std::move(rects));
}

Eigen::Vector2d cluttered_start() { return {-0.8, -0.05}; }
Eigen::Vector2d cluttered_goal() { return {0.8, 0.05}; }

World2D single_obstacle_world() {
  return World2D({{-1.0, -1.0}, {1.0, 1.0}}, 0.05, {{{0.0, 0.1}, 0.4}});
}

Eigen::Vector2d single_obstacle_start() { return {-0.8, 0.0}; }
Eigen::Vector2d single_obstacle_goal() { return {0.8, 0.0}; }

std::vector<int> homotopy_signature(const World2D& world, const Eigen::MatrixXd& path) {
  if (path.cols() != 2 || path.rows() < 2) throw DimensionMismatch("path must be a K x 2 polyline");
  Eigen::MatrixXd straight(2, 2);
  straight.row(0) = path.row(0);
  straight.row(1) = path.row(path.rows() - 1);

  std::vector<Eigen::Vector2d> centers;
  for (const Disk& d : world.disks()) centers.push_back(d.center);
  for (const Rect& r : world.rects()) centers.push_back(0.5 * (r.min + r.max));

  std::vector<int> signature;
  signature.reserve(centers.size());
  for (const auto& c : centers) {
    const double delta = swept_angle(path, c) - swept_angle(straight, c);
    signature.push_back(static_cast<int>(std::lround(delta / (2.0 * std::numbers::pi))));
  }
  return signature;
}

Eigen::Vector2d push_box(const PushWorld& world, const Eigen::Vector2d& box, const Eigen::Vector2d& robot,
                         const Eigen::Vector2d& robot_prev) {
  const double contact = world.robot_radius + world.box_radius;
  const Eigen::Vector2d offset = box - robot;
  const double dist = offset.norm();
  if (dist >= contact) return box;
  Eigen::Vector2d dir;
  if (dist > 0.0) {
    dir = offset / dist;
  } else {
    dir = robot - robot_prev;
    if (dir.norm() == 0.0) return box;
    dir.normalize();
  }
  return box + (contact - dist) * dir;
}

std::vector<Eigen::Vector2d> simulate_push(const PushWorld& world, const Trajectory& robot,
                                           double step_dt) {
  if (!(step_dt > 0.0)) throw std::invalid_argument("push step must be positive");
  if (robot.dof() != 2) throw DimensionMismatch("push simulation expects a 2D robot");
  std::vector<Eigen::Vector2d> box{world.box};
  Eigen::Vector2d current = world.box;
  Eigen::Vector2d prev_robot = robot.position(0.0);

  const double duration = robot.duration();
  const auto steps = static_cast<long>(std::ceil(duration / step_dt - 1e-12));
  for (long i = 1; i <= steps; ++i) {
    const double t = std::min(duration, static_cast<double>(i) * step_dt);
    const Eigen::Vector2d p = robot.position_at(t);
    current = push_box(world, current, p, prev_robot);
    box.push_back(current);
    prev_robot = p;
  }
  return box;
}

double bang_bang_duration(double distance, double v_max, double a_max) {
  const double d = std::abs(distance);
  if (d >= v_max * v_max / a_max) return d / v_max + v_max / a_max;
  return 2.0 * std::sqrt(d / a_max);
}

Problem1D ablation_world_1d() {
  Problem1D p{BoundaryConditions::rest_to_rest(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)),
              KinodynamicLimits::symmetric(Eigen::VectorXd::Constant(1, 0.1),
                                           Eigen::VectorXd::Constant(1, 0.2)),
              0.0};
  p.bang_bang_duration = bang_bang_duration(1.0, 0.1, 0.2);
  return p;
}

}  // namespace vpsto
