#include "vpsto/spline.hpp"

#include "vpsto/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <utility>

namespace vpsto {

namespace {

// Solves the uniform tridiagonal system (1, 4, 1) X = rhs column-wise.
Eigen::MatrixXd solve_slope_system(const Eigen::MatrixXd& rhs) {
  const auto n = rhs.rows();
  Eigen::MatrixXd x = rhs;
  if (n == 0) return x;
  std::vector<double> c_prime(static_cast<std::size_t>(n), 0.0);
  double denom = 4.0;
  c_prime[0] = 1.0 / denom;
  x.row(0) /= denom;
  for (Eigen::Index i = 1; i < n; ++i) {
    denom = 4.0 - c_prime[static_cast<std::size_t>(i - 1)];
    c_prime[static_cast<std::size_t>(i)] = 1.0 / denom;
    x.row(i) = (x.row(i) - x.row(i - 1)) / denom;
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    x.row(i) -= c_prime[static_cast<std::size_t>(i)] * x.row(i + 1);
  }
  return x;
}

void check_finite(const Eigen::VectorXd& v, const char* name) {
  if (!v.allFinite()) throw std::invalid_argument(std::string("non-finite entry in ") + name);
}

}  // namespace

void BoundaryConditions::validate() const {
  const auto d = q0.size();
  if (d < 1) throw DimensionMismatch("boundary conditions need at least one degree of freedom");
  if (qd0.size() != d || qT.size() != d || qdT.size() != d) {
    throw DimensionMismatch("boundary condition vectors differ in dimension");
  }
  check_finite(q0, "q0");
  check_finite(qd0, "qd0");
  check_finite(qT, "qT");
  check_finite(qdT, "qdT");
}

BoundaryConditions BoundaryConditions::rest_to_rest(const Eigen::VectorXd& start,
                                                    const Eigen::VectorXd& goal) {
  return {start, Eigen::VectorXd::Zero(start.size()), goal, Eigen::VectorXd::Zero(goal.size())};
}

SplineBasis::SplineBasis(int n_via, int dof) : n_via_(n_via), dof_(dof), h_(1.0 / (n_via + 1)) {
  if (n_via < 0) throw std::invalid_argument("n_via must be non-negative");
  if (dof < 1) throw std::invalid_argument("dof must be at least 1");

  const int n_knots = n_via_ + 2;
  const int n_cols = n_weights();
  const int c_q0 = boundary_column(kStartPos);
  const int c_v0 = boundary_column(kStartSlope);
  const int c_qT = boundary_column(kEndPos);
  const int c_vT = boundary_column(kEndSlope);

  knot_pos_ = Eigen::MatrixXd::Zero(n_knots, n_cols);
  knot_pos_(0, c_q0) = 1.0;
  for (int n = 1; n <= n_via_; ++n) knot_pos_(n, n - 1) = 1.0;
  knot_pos_(n_knots - 1, c_qT) = 1.0;

  knot_slope_ = Eigen::MatrixXd::Zero(n_knots, n_cols);
  knot_slope_(0, c_v0) = 1.0;
  knot_slope_(n_knots - 1, c_vT) = 1.0;

  // C2 continuity at interior knots:
  //   m_{i-1} + 4 m_i + m_{i+1} = 3 (p_{i+1} - p_{i-1}) / h
  if (n_via_ > 0) {
    Eigen::MatrixXd rhs(n_via_, n_cols);
    for (int i = 1; i <= n_via_; ++i) {
      rhs.row(i - 1) = 3.0 / h_ * (knot_pos_.row(i + 1) - knot_pos_.row(i - 1));
    }
    rhs.row(0) -= knot_slope_.row(0);
    rhs.row(n_via_ - 1) -= knot_slope_.row(n_knots - 1);
    knot_slope_.middleRows(1, n_via_) = solve_slope_system(rhs);
  }

  // On segment i the second derivative is linear in the local coordinate u:
  // q'' = A + B u, so int_seg q''^T q'' ds = h (A^T A + (A^T B + B^T A) / 2 + B^T B / 3).
  gram_ = Eigen::MatrixXd::Zero(n_cols, n_cols);
  const double h2 = h_ * h_;
  for (int i = 0; i <= n_via_; ++i) {
    const Eigen::RowVectorXd a = (-6.0 * knot_pos_.row(i) + 6.0 * knot_pos_.row(i + 1)) / h2 +
                                 (-4.0 * knot_slope_.row(i) - 2.0 * knot_slope_.row(i + 1)) / h_;
    const Eigen::RowVectorXd b = (12.0 * knot_pos_.row(i) - 12.0 * knot_pos_.row(i + 1)) / h2 +
                                 (6.0 * knot_slope_.row(i) + 6.0 * knot_slope_.row(i + 1)) / h_;
    const Eigen::MatrixXd ab = a.transpose() * b;
    gram_ += h_ * (a.transpose() * a + 0.5 * (ab + ab.transpose()) + b.transpose() * b / 3.0);
  }
}

Eigen::RowVectorXd SplineBasis::row(double s, int order) const {
  if (!(s >= 0.0 && s <= 1.0)) throw std::out_of_range("phase outside [0, 1]");
  if (order < 0 || order > 2) throw std::invalid_argument("derivative order must be 0, 1 or 2");
  const int seg = std::min(static_cast<int>(s / h_), n_via_);
  const double u = (s - seg * h_) / h_;
  const auto p0 = knot_pos_.row(seg);
  const auto p1 = knot_pos_.row(seg + 1);
  const auto m0 = knot_slope_.row(seg);
  const auto m1 = knot_slope_.row(seg + 1);
  const double u2 = u * u;
  const double u3 = u2 * u;
  switch (order) {
    case 0:
      return (2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * h_ * m0 + (-2 * u3 + 3 * u2) * p1 +
             (u3 - u2) * h_ * m1;
    case 1:
      return ((6 * u2 - 6 * u) * p0 + (-6 * u2 + 6 * u) * p1) / h_ + (3 * u2 - 4 * u + 1) * m0 +
             (3 * u2 - 2 * u) * m1;
    default:
      return ((12 * u - 6) * p0 + (-12 * u + 6) * p1) / (h_ * h_) +
             ((6 * u - 4) * m0 + (6 * u - 2) * m1) / h_;
  }
}

Eigen::MatrixXd SplineBasis::gram_via() const {
  const int nd = n_via_ * dof_;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nd, nd);
  for (int n = 0; n < n_via_; ++n)
    for (int m = 0; m < n_via_; ++m)
      for (int d = 0; d < dof_; ++d) g(n * dof_ + d, m * dof_ + d) = gram_(n, m);
  return g;
}

Eigen::MatrixXd SplineBasis::gram_cross() const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n_via_ * dof_, 4 * dof_);
  for (int n = 0; n < n_via_; ++n)
    for (int j = 0; j < 4; ++j)
      for (int d = 0; d < dof_; ++d) g(n * dof_ + d, j * dof_ + d) = gram_(n, n_via_ + j);
  return g;
}

std::shared_ptr<const SplineBasis> basis_for(int n_via, int dof) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const SplineBasis>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{n_via, dof}];
  if (!slot) slot = std::make_shared<const SplineBasis>(n_via, dof);
  return slot;
}

Eigen::VectorXd stack_via(const Eigen::MatrixXd& via) {
  Eigen::VectorXd out(via.size());
  for (Eigen::Index n = 0; n < via.rows(); ++n)
    for (Eigen::Index d = 0; d < via.cols(); ++d) out(n * via.cols() + d) = via(n, d);
  return out;
}

Eigen::MatrixXd unstack_via(const Eigen::VectorXd& stacked, int n_via, int dof) {
  if (stacked.size() != static_cast<Eigen::Index>(n_via) * dof) {
    throw DimensionMismatch("stacked via vector has wrong length");
  }
  Eigen::MatrixXd via(n_via, dof);
  for (int n = 0; n < n_via; ++n)
    for (int d = 0; d < dof; ++d) via(n, d) = stacked(n * dof + d);
  return via;
}

Eigen::MatrixXd weight_matrix(const SplineBasis& basis, const Eigen::MatrixXd& via,
                              const BoundaryConditions& bc, double duration) {
  if (via.rows() != basis.n_via() || via.cols() != basis.dof() || bc.dof() != basis.dof()) {
    throw DimensionMismatch("via-points or boundary conditions do not match the basis");
  }
  Eigen::MatrixXd w(basis.n_weights(), basis.dof());
  w.topRows(basis.n_via()) = via;
  w.row(basis.boundary_column(kStartPos)) = bc.q0.transpose();
  w.row(basis.boundary_column(kStartSlope)) = duration * bc.qd0.transpose();
  w.row(basis.boundary_column(kEndPos)) = bc.qT.transpose();
  w.row(basis.boundary_column(kEndSlope)) = duration * bc.qdT.transpose();
  return w;
}

Eigen::VectorXd evaluate(const SplineBasis& basis, const Eigen::MatrixXd& via,
                         const BoundaryConditions& bc, double duration, double s, int order) {
  if (order >= 1 && !(duration > 0.0)) {
    throw std::invalid_argument("time derivatives need a positive duration");
  }
  const Eigen::MatrixXd w = weight_matrix(basis, via, bc, duration);
  Eigen::VectorXd out = (basis.row(s, order) * w).transpose();
  if (order == 1) out /= duration;
  if (order == 2) out /= duration * duration;
  return out;
}

double smoothness_cost(const SplineBasis& basis, const Eigen::MatrixXd& via,
                       const BoundaryConditions& bc, double duration) {
  const Eigen::MatrixXd w = weight_matrix(basis, via, bc, duration);
  return 0.5 * (w.transpose() * basis.gram() * w).trace();
}

Trajectory::Trajectory(std::shared_ptr<const SplineBasis> basis, Eigen::MatrixXd via,
                       BoundaryConditions bc, double duration)
    : basis_(std::move(basis)), via_(std::move(via)), bc_(std::move(bc)), duration_(duration) {
  if (!(duration_ >= 0.0) || !std::isfinite(duration_)) {
    throw std::invalid_argument("trajectory duration must be finite and non-negative");
  }
  weights_ = weight_matrix(*basis_, via_, bc_, duration_);
}

Eigen::VectorXd Trajectory::position(double s) const {
  return (basis_->row(s, 0) * weights_).transpose();
}

Eigen::VectorXd Trajectory::velocity(double s) const {
  if (degenerate()) return Eigen::VectorXd::Zero(dof());
  return (basis_->row(s, 1) * weights_).transpose() / duration_;
}

Eigen::VectorXd Trajectory::acceleration(double s) const {
  if (degenerate()) return Eigen::VectorXd::Zero(dof());
  return (basis_->row(s, 2) * weights_).transpose() / (duration_ * duration_);
}

double Trajectory::phase_of(double t) const {
  if (degenerate()) return 1.0;
  return std::clamp(t / duration_, 0.0, 1.0);
}

Eigen::VectorXd Trajectory::position_at(double t) const { return position(phase_of(t)); }
Eigen::VectorXd Trajectory::velocity_at(double t) const { return velocity(phase_of(t)); }
Eigen::VectorXd Trajectory::acceleration_at(double t) const { return acceleration(phase_of(t)); }

double Trajectory::smoothness_cost() const {
  return 0.5 * (weights_.transpose() * basis_->gram() * weights_).trace();
}

}  // namespace vpsto
