#pragma once

#include "vpsto/spline.hpp"
#include "vpsto/timing.hpp"

#include <Eigen/Dense>

#include <vector>

namespace vpsto {

/// Binary collision query for a single configuration. Implementations must be
/// pure and deterministic for a given world state.
class CollisionChecker {
 public:
  virtual ~CollisionChecker() = default;
  virtual bool is_colliding(const Eigen::VectorXd& q) const = 0;
};

struct Disk {
  Eigen::Vector2d center;
  double radius = 0.0;
};

struct Rect {
  Eigen::Vector2d min;
  Eigen::Vector2d max;
};

/// Planar point-mass world: disk and axis-aligned rectangle obstacles inside a
/// rectangular workspace, checked against a robot disk of `robot_radius`.
/// Contact is an open set: exact tangency does not collide.
class World2D : public CollisionChecker {
 public:
  World2D(Rect bounds, double robot_radius, std::vector<Disk> disks = {}, std::vector<Rect> rects = {});

  bool is_colliding(const Eigen::VectorXd& q) const override;

  const Rect& bounds() const { return bounds_; }
  double robot_radius() const { return robot_radius_; }
  const std::vector<Disk>& disks() const { return disks_; }
  const std::vector<Rect>& rects() const { return rects_; }

  /// Joint limits equal to the workspace box shrunk by the robot radius.
  Eigen::VectorXd q_min() const;
  Eigen::VectorXd q_max() const;

 private:
  Rect bounds_;
  double robot_radius_;
  std::vector<Disk> disks_;
  std::vector<Rect> rects_;
};

/// The bundled cluttered world: a wall across the straight line from start to
/// goal, with disks scattered around it. Routes above and below the wall are
/// both admissible.
World2D cluttered_world();
Eigen::Vector2d cluttered_start();
Eigen::Vector2d cluttered_goal();

/// One large disk slightly above the start-goal line; used for the
/// covariance ablation.
World2D single_obstacle_world();
Eigen::Vector2d single_obstacle_start();
Eigen::Vector2d single_obstacle_goal();

/// Winding signature of a sampled path (rows are 2D points) against every
/// obstacle, relative to the straight segment between the path's endpoints.
/// Paths with equal endpoints share a signature iff they are homotopic in the
/// plane punctured at the obstacle centers.
std::vector<int> homotopy_signature(const World2D& world, const Eigen::MatrixXd& path);

/// Planar box pushed by the robot disk; quasi-static, no momentum.
struct PushWorld {
  Rect bounds;
  double robot_radius = 0.05;
  Eigen::Vector2d box;
  double box_radius = 0.1;
  Eigen::Vector2d target;
};

/// One quasi-static contact resolution: if the robot disk overlaps the box,
/// the box is moved out along the center-to-center direction (or along the
/// robot's motion when the centers coincide).
Eigen::Vector2d push_box(const PushWorld& world, const Eigen::Vector2d& box, const Eigen::Vector2d& robot,
                         const Eigen::Vector2d& robot_prev);

/// Box positions at t = 0, dt, ..., T (the last sample lands exactly on T).
/// At every step an overlapping robot disk pushes the box out along the
/// center-to-center direction by the overlap depth.
std::vector<Eigen::Vector2d> simulate_push(const PushWorld& world, const Trajectory& robot,
                                           double step_dt);

/// The 1D time-optimal instance: 0 -> 1 rest-to-rest, |qd| <= 0.1, |qdd| <= 0.2.
struct Problem1D {
  BoundaryConditions bc;
  KinodynamicLimits limits;
  double bang_bang_duration;
};
Problem1D ablation_world_1d();

/// Duration of the time-optimal bang-bang profile for a rest-to-rest move.
double bang_bang_duration(double distance, double v_max, double a_max);

}  // namespace vpsto
