#pragma once

#include <Eigen/Dense>

#include <memory>

namespace vpsto {

/// Start and goal state of a trajectory. Velocities are in time units; the
/// phase derivatives q'(0) = T * qd0 and q'(1) = T * qdT are derived from them
/// once the duration is known.
struct BoundaryConditions {
  Eigen::VectorXd q0;
  Eigen::VectorXd qd0;
  Eigen::VectorXd qT;
  Eigen::VectorXd qdT;

  int dof() const { return static_cast<int>(q0.size()); }

  /// Throws DimensionMismatch / std::invalid_argument on inconsistent or
  /// non-finite entries.
  void validate() const;

  static BoundaryConditions rest_to_rest(const Eigen::VectorXd& start,
                                         const Eigen::VectorXd& goal);
};

/// Indices of the boundary entries inside a scalar basis row, relative to the
/// first boundary column (which sits right after the N via-point columns).
enum BoundaryColumn : int { kStartPos = 0, kStartSlope = 1, kEndPos = 2, kEndSlope = 3 };

/// Minimum-effort cubic-spline basis on the phase interval [0, 1].
///
/// The via-points sit at uniform phases s_n = n / (N + 1). A scalar basis row
/// has N + 4 entries ordered as [via_1 .. via_N, q0, q'0, qT, q'T]; the same
/// row multiplies every degree of freedom, so the multi-DoF maps are the
/// Kronecker product of the scalar maps with the identity.
///
/// Internally the clamped C2 interpolation system is solved once per column,
/// giving linear maps from the weights to the knot positions and knot slopes.
/// Each of the N + 1 uniform segments is then a cubic Hermite polynomial.
class SplineBasis {
 public:
  SplineBasis(int n_via, int dof);

  int n_via() const { return n_via_; }
  int dof() const { return dof_; }
  int n_weights() const { return n_via_ + 4; }
  int boundary_column(BoundaryColumn c) const { return n_via_ + static_cast<int>(c); }
  double segment_length() const { return h_; }

  /// Phase of the n-th via-point, n in [1, N].
  double via_phase(int n) const { return n * h_; }

  /// Row r with q^(order)(s) = r * W for the (N+4) x D weight matrix W.
  /// order in {0, 1, 2}; s must lie in [0, 1].
  Eigen::RowVectorXd row(double s, int order) const;

  /// Scalar Gram matrix of second derivatives, int_0^1 phi''(s)^T phi''(s) ds,
  /// (N+4) x (N+4), integrated exactly segment by segment.
  const Eigen::MatrixXd& gram() const { return gram_; }

  /// G_via = int Phi_via''^T Phi_via'' ds over the stacked via vector (N*D).
  Eigen::MatrixXd gram_via() const;
  /// G_cross = int Phi_via''^T Phi_bc'' ds, (N*D) x (4*D), with the boundary
  /// vector ordered [q0, q'0, qT, q'T].
  Eigen::MatrixXd gram_cross() const;

  const Eigen::MatrixXd& knot_positions() const { return knot_pos_; }
  const Eigen::MatrixXd& knot_slopes() const { return knot_slope_; }

 private:
  int n_via_;
  int dof_;
  double h_;
  Eigen::MatrixXd knot_pos_;    // (N+2) x (N+4)
  Eigen::MatrixXd knot_slope_;  // (N+2) x (N+4)
  Eigen::MatrixXd gram_;
};

/// Shared, immutable basis for (n_via, dof). Thread-safe.
std::shared_ptr<const SplineBasis> basis_for(int n_via, int dof);

/// Stacked via vector (N*D, via-major) <-> N x D matrix.
Eigen::VectorXd stack_via(const Eigen::MatrixXd& via);
Eigen::MatrixXd unstack_via(const Eigen::VectorXd& stacked, int n_via, int dof);

/// (N+4) x D weight matrix with boundary slopes scaled by the duration.
Eigen::MatrixXd weight_matrix(const SplineBasis& basis, const Eigen::MatrixXd& via,
                              const BoundaryConditions& bc, double duration);

/// q(s), qd(s) or qdd(s). Velocities and accelerations require duration > 0.
Eigen::VectorXd evaluate(const SplineBasis& basis, const Eigen::MatrixXd& via,
                         const BoundaryConditions& bc, double duration, double s, int order);

/// 0.5 * int_0^1 q''(s)^T q''(s) ds. The boundary slopes are T * qd, so with
/// duration = 1 the velocities in `bc` are read as phase derivatives.
double smoothness_cost(const SplineBasis& basis, const Eigen::MatrixXd& via,
                       const BoundaryConditions& bc, double duration = 1.0);

/// A synthesized trajectory: via-points, boundary state and total duration.
/// A zero duration marks the degenerate rest trajectory (no motion needed).
class Trajectory {
 public:
  Trajectory(std::shared_ptr<const SplineBasis> basis, Eigen::MatrixXd via,
             BoundaryConditions bc, double duration);

  const SplineBasis& basis() const { return *basis_; }
  std::shared_ptr<const SplineBasis> basis_ptr() const { return basis_; }
  const Eigen::MatrixXd& via() const { return via_; }
  const BoundaryConditions& boundary() const { return bc_; }
  double duration() const { return duration_; }
  bool degenerate() const { return duration_ == 0.0; }
  int dof() const { return basis_->dof(); }
  const Eigen::MatrixXd& weights() const { return weights_; }

  // Phase-indexed evaluation.
  Eigen::VectorXd position(double s) const;
  Eigen::VectorXd velocity(double s) const;
  Eigen::VectorXd acceleration(double s) const;

  // Time-indexed evaluation; t is clamped to [0, T].
  Eigen::VectorXd position_at(double t) const;
  Eigen::VectorXd velocity_at(double t) const;
  Eigen::VectorXd acceleration_at(double t) const;

  double smoothness_cost() const;

 private:
  double phase_of(double t) const;

  std::shared_ptr<const SplineBasis> basis_;
  Eigen::MatrixXd via_;
  BoundaryConditions bc_;
  double duration_;
  Eigen::MatrixXd weights_;
};

}  // namespace vpsto
