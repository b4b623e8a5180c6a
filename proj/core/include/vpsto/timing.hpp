#pragma once

#include "vpsto/spline.hpp"

#include <Eigen/Dense>

#include <memory>

namespace vpsto {

/// Per-DoF box limits on velocity, acceleration and joint position.
struct KinodynamicLimits {
  Eigen::VectorXd qd_min;
  Eigen::VectorXd qd_max;
  Eigen::VectorXd qdd_min;
  Eigen::VectorXd qdd_max;
  Eigen::VectorXd q_min;
  Eigen::VectorXd q_max;

  int dof() const { return static_cast<int>(qd_max.size()); }
  void validate() const;

  /// |qd| <= vel, |qdd| <= acc, unbounded joint range.
  static KinodynamicLimits symmetric(const Eigen::VectorXd& vel, const Eigen::VectorXd& acc);
  static KinodynamicLimits symmetric(const Eigen::VectorXd& vel, const Eigen::VectorXd& acc,
                                     const Eigen::VectorXd& q_min, const Eigen::VectorXd& q_max);
};

/// Uniform evaluation grid s_k = k / K, k = 0..K (both endpoints included).
class PhaseGrid {
 public:
  explicit PhaseGrid(int intervals);
  int intervals() const { return intervals_; }
  int size() const { return intervals_ + 1; }
  double step() const { return 1.0 / intervals_; }
  double point(int k) const { return static_cast<double>(k) / intervals_; }

 private:
  int intervals_;
};

/// Basis rows of orders 0..2 stacked at every grid point, cached per
/// (n_via, dof, K). Immutable and shareable.
struct GridTable {
  std::shared_ptr<const SplineBasis> basis;
  PhaseGrid grid;
  Eigen::MatrixXd rows[3];  // each (K+1) x (N+4)
};

std::shared_ptr<const GridTable> grid_table_for(int n_via, int dof, const PhaseGrid& grid);

/// Smallest T > 0 with qd_min <= a/T + b <= qd_max and
/// qdd_min <= c/T^2 + d/T <= qdd_max componentwise. Returns 0 when no
/// component constrains T. Throws InfeasibleError when b is outside the
/// velocity bounds.
double min_duration_at_point(const Eigen::Ref<const Eigen::VectorXd>& a,
                             const Eigen::Ref<const Eigen::VectorXd>& b,
                             const Eigen::Ref<const Eigen::VectorXd>& c,
                             const Eigen::Ref<const Eigen::VectorXd>& d,
                             const KinodynamicLimits& limits);

/// Smallest duration at which every grid point respects the limits. With
/// nonzero boundary velocities the admissible durations can form several
/// intervals; the lowest admissible value is returned. 0 means the trajectory
/// is the degenerate rest trajectory.
double min_duration(const SplineBasis& basis, const Eigen::MatrixXd& via,
                    const BoundaryConditions& bc, const KinodynamicLimits& limits,
                    const PhaseGrid& grid);
double min_duration(const GridTable& table, const Eigen::MatrixXd& via,
                    const BoundaryConditions& bc, const KinodynamicLimits& limits);

/// Minimal-duration admissible trajectory through the via-points.
Trajectory synthesize(std::shared_ptr<const SplineBasis> basis, const Eigen::MatrixXd& via,
                      const BoundaryConditions& bc, const KinodynamicLimits& limits,
                      const PhaseGrid& grid);
Trajectory synthesize(const GridTable& table, const Eigen::MatrixXd& via,
                      const BoundaryConditions& bc, const KinodynamicLimits& limits);

/// Positions, velocities and accelerations at every grid point, (K+1) x D each.
struct GridSamples {
  Eigen::MatrixXd q;
  Eigen::MatrixXd qd;
  Eigen::MatrixXd qdd;
};
GridSamples sample_on_grid(const Trajectory& traj, const GridTable& table);
GridSamples sample_on_grid(const Trajectory& traj, const PhaseGrid& grid);

/// Largest velocity/acceleration limit excess over the grid (<= 0 when admissible).
double max_limit_excess(const GridSamples& samples, const KinodynamicLimits& limits);

/// True when some grid point sits on a velocity or acceleration bound within
/// `rel_tol` relative to that bound.
bool saturates_limit(const GridSamples& samples, const KinodynamicLimits& limits,
                     double rel_tol = 1e-6);

}  // namespace vpsto
