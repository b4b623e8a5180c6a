#pragma once

#include "vpsto/spline.hpp"
#include "vpsto/timing.hpp"
#include "vpsto/worlds.hpp"

namespace vpsto {

struct CostWeights {
  double duration = 1.0;
  double smoothness = 0.02;
  double joint_limits = 1.0;
  double collision = 1.0;
  double push = 10.0;
  double invalid_penalty = 1e6;

  void validate() const;
};

struct TermCosts {
  double duration = 0.0;
  double smoothness = 0.0;
  double joint_limits = 0.0;
  double collision = 0.0;
  double push = 0.0;
};

/// total = sum_i w_i c_i + (valid ? 0 : invalid_penalty + violation_count)
struct CostReport {
  double total = 0.0;
  TermCosts terms;
  bool valid = true;
  int violation_count = 0;
};

struct PushContext {
  const PushWorld* world = nullptr;
  Eigen::Vector2d target;
  double step_dt = 0.01;
};

struct JointLimitCost {
  double cost = 0.0;
  int violations = 0;
};

struct CollisionCost {
  double cost = 0.0;
  int hits = 0;
};

struct PushCost {
  double cost = 1.0;
  bool valid = false;
};

double cost_duration(const Trajectory& traj);

/// Discontinuous joint-limit barrier summed over grid points and DoFs:
/// 1 + q - q_max above the upper limit, 1 + q_min - q below the lower one.
JointLimitCost cost_jla(const Eigen::MatrixXd& grid_positions, const KinodynamicLimits& limits);
JointLimitCost cost_jla(const Trajectory& traj, const KinodynamicLimits& limits, const PhaseGrid& grid);

/// Number of grid configurations in collision.
CollisionCost cost_collision(const Eigen::MatrixXd& grid_positions, const CollisionChecker& checker);
CollisionCost cost_collision(const Trajectory& traj, const CollisionChecker& checker,
                             const PhaseGrid& grid);

/// exp(e_T - e_0) with e the squared box-to-target distance before and after
/// the motion; valid only when the box ends strictly closer to the target.
PushCost push_cost_from_errors(double e_start, double e_end);
PushCost cost_push(const Trajectory& traj, const PushWorld& world, const Eigen::Vector2d& target,
                   double step_dt);

/// Aggregates every configured term on the same grid the duration was
/// synthesized on. Deterministic.
CostReport evaluate_total(const Trajectory& traj, const CostWeights& weights,
                          const KinodynamicLimits& limits, const CollisionChecker* checker,
                          const PushContext* push, const PhaseGrid& grid);

}  // namespace vpsto
