#include "vpsto/costs.hpp"

#include "vpsto/errors.hpp"

#include <cmath>

namespace vpsto {

void CostWeights::validate() const {
  for (double w : {duration, smoothness, joint_limits, collision, push, invalid_penalty}) {
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("cost weights must be finite and >= 0");
  }
}

double cost_duration(const Trajectory& traj) { return traj.duration(); }

JointLimitCost cost_jla(const Eigen::MatrixXd& grid_positions, const KinodynamicLimits& limits) {
  if (grid_positions.cols() != limits.dof()) throw DimensionMismatch("limits do not match trajectory");
  JointLimitCost out;
  for (Eigen::Index k = 0; k < grid_positions.rows(); ++k) {
    for (Eigen::Index i = 0; i < grid_positions.cols(); ++i) {
      const double q = grid_positions(k, i);
      if (q >= limits.q_max(i)) {
        out.cost += 1.0 + q - limits.q_max(i);
        ++out.violations;
      } else if (q <= limits.q_min(i)) {
        out.cost += 1.0 + limits.q_min(i) - q;
        ++out.violations;
      }
    }
  }
  return out;
}

JointLimitCost cost_jla(const Trajectory& traj, const KinodynamicLimits& limits, const PhaseGrid& grid) {
  return cost_jla(sample_on_grid(traj, grid).q, limits);
}

CollisionCost cost_collision(const Eigen::MatrixXd& grid_positions, const CollisionChecker& checker) {
  CollisionCost out;
  Eigen::VectorXd q(grid_positions.cols());
  for (Eigen::Index k = 0; k < grid_positions.rows(); ++k) {
    q = grid_positions.row(k).transpose();
    if (checker.is_colliding(q)) ++out.hits;
  }
  out.cost = out.hits;
  return out;
}

CollisionCost cost_collision(const Trajectory& traj, const CollisionChecker& checker,
                             const PhaseGrid& grid) {
  return cost_collision(sample_on_grid(traj, grid).q, checker);
}

PushCost push_cost_from_errors(double e_start, double e_end) {
  return {std::exp(e_end - e_start), e_end < e_start};
}

PushCost cost_push(const Trajectory& traj, const PushWorld& world, const Eigen::Vector2d& target,
                   double step_dt) {
  const auto box = simulate_push(world, traj, step_dt);
  return push_cost_from_errors((box.front() - target).squaredNorm(), (box.back() - target).squaredNorm());
}

CostReport evaluate_total(const Trajectory& traj, const CostWeights& weights,
                          const KinodynamicLimits& limits, const CollisionChecker* checker,
                          const PushContext* push, const PhaseGrid& grid) {
  const GridSamples samples = sample_on_grid(traj, grid);
  CostReport report;
  report.terms.duration = cost_duration(traj);
  report.terms.smoothness = traj.smoothness_cost();

  const JointLimitCost jla = cost_jla(samples.q, limits);
  report.terms.joint_limits = jla.cost;
  report.violation_count += jla.violations;

  if (checker != nullptr) {
    const CollisionCost col = cost_collision(samples.q, *checker);
    report.terms.collision = col.cost;
    report.violation_count += col.hits;
  }

  bool push_ok = true;
  if (push != nullptr && push->world != nullptr) {
    const PushCost pc = cost_push(traj, *push->world, push->target, push->step_dt);
    report.terms.push = pc.cost;
    push_ok = pc.valid;
    if (!push_ok) ++report.violation_count;
  }

  report.valid = report.violation_count == 0 && push_ok;
  const TermCosts& c = report.terms;
  report.total = weights.duration * c.duration + weights.smoothness * c.smoothness +
                 weights.joint_limits * c.joint_limits + weights.collision * c.collision +
                 weights.push * c.push;
  if (!report.valid) report.total += weights.invalid_penalty + report.violation_count;
  return report;
}

}  // namespace vpsto
