#include "vpsto/timing.hpp"

#include "vpsto/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>
#include <utility>
#include <vector>

namespace vpsto {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Closed intervals on x = 1/T >= 0, sorted and disjoint.
using IntervalSet = std::vector<std::pair<double, double>>;

// Positive roots of c x^2 + d x - level = 0 appended to `out`.
void positive_roots(double c, double d, double level, std::vector<double>& out) {
  if (c == 0.0) {
    if (d != 0.0 && level / d > 0.0) out.push_back(level / d);
    return;
  }
  const double disc = d * d + 4.0 * c * level;
  if (disc < 0.0) return;
  const double q = -0.5 * (d + std::copysign(std::sqrt(disc), d));
  if (q == 0.0) return;
  for (double r : {q / c, -level / q}) {
    if (r > 0.0) out.push_back(r);
  }
}

// Values of x >= 0 with lo <= c x^2 + d x <= hi. The band contains 0, so the
// set always starts with an interval at x = 0.
IntervalSet acceleration_set(double c, double d, double lo, double hi) {
  std::vector<double> cuts{0.0};
  positive_roots(c, d, hi, cuts);
  positive_roots(c, d, lo, cuts);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  auto inside = [&](double x) {
    const double f = (c * x + d) * x;
    return f >= lo && f <= hi;
  };
  IntervalSet out;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const double left = cuts[i];
    const double right = i + 1 < cuts.size() ? cuts[i + 1] : kInf;
    const double probe = std::isinf(right) ? left + 1.0 + left : 0.5 * (left + right);
    if (!inside(probe)) continue;
    if (!out.empty() && out.back().second == left) {
      out.back().second = right;
    } else {
      out.emplace_back(left, right);
    }
  }
  if (out.empty() || out.front().first > 0.0) out.insert(out.begin(), {0.0, 0.0});
  return out;
}

void intersect(IntervalSet& acc, const IntervalSet& other) {
  IntervalSet out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < acc.size() && j < other.size()) {
    const double lo = std::max(acc[i].first, other[j].first);
    const double hi = std::min(acc[i].second, other[j].second);
    if (lo <= hi) out.emplace_back(lo, hi);
    (acc[i].second < other[j].second ? i : j)++;
  }
  acc.swap(out);
}

// Narrows `admissible` to the x = 1/T values at which one DoF at one grid
// point respects its velocity and acceleration limits.
void restrict_row(IntervalSet& admissible, double a, double b, double c, double d, double v_lo, double v_hi,
                  double a_lo, double a_hi) {
  if (b > v_hi || b < v_lo) {
    std::ostringstream msg;
    msg << "boundary velocity contribution " << b << " outside [" << v_lo << ", " << v_hi << "]";
    throw InfeasibleError(msg.str());
  }
  // a x + b is monotone in x and starts inside the band.
  double x_vel = kInf;
  if (a > 0.0) x_vel = (v_hi - b) / a;
  if (a < 0.0) x_vel = (v_lo - b) / a;
  while (!admissible.empty() && admissible.back().first > x_vel) admissible.pop_back();
  if (!admissible.empty()) admissible.back().second = std::min(admissible.back().second, x_vel);
  if (c != 0.0 || d != 0.0) intersect(admissible, acceleration_set(c, d, a_lo, a_hi));
}

// Smallest admissible duration from the admissible set of x = 1/T.
double duration_from(const IntervalSet& admissible) {
  const double x = admissible.empty() ? 0.0 : admissible.back().second;
  if (x <= 0.0) throw InfeasibleError("boundary velocity sits on a limit and is driven outward");
  return std::isinf(x) ? 0.0 : 1.0 / x;
}

void require_size(const Eigen::VectorXd& v, int d, const char* name) {
  if (v.size() != d) throw DimensionMismatch(std::string("limit vector ") + name + " has wrong size");
}

}  // namespace

void KinodynamicLimits::validate() const {
  const int d = dof();
  if (d < 1) throw DimensionMismatch("limits need at least one degree of freedom");
  require_size(qd_min, d, "qd_min");
  require_size(qdd_min, d, "qdd_min");
  require_size(qdd_max, d, "qdd_max");
  require_size(q_min, d, "q_min");
  require_size(q_max, d, "q_max");
  for (int i = 0; i < d; ++i) {
    if (!(qd_min(i) < 0.0 && qd_max(i) > 0.0)) throw std::invalid_argument("velocity bounds must bracket 0");
    if (!(qdd_min(i) < 0.0 && qdd_max(i) > 0.0)) throw std::invalid_argument("acceleration bounds must bracket 0");
    if (!(q_min(i) < q_max(i))) throw std::invalid_argument("q_min must be below q_max");
  }
}

KinodynamicLimits KinodynamicLimits::symmetric(const Eigen::VectorXd& vel, const Eigen::VectorXd& acc) {
  const auto d = vel.size();
  return symmetric(vel, acc, Eigen::VectorXd::Constant(d, -kInf), Eigen::VectorXd::Constant(d, kInf));
}

KinodynamicLimits KinodynamicLimits::symmetric(const Eigen::VectorXd& vel, const Eigen::VectorXd& acc,
                                               const Eigen::VectorXd& q_min,
                                               const Eigen::VectorXd& q_max) {
  return {-vel, vel, -acc, acc, q_min, q_max};
}

PhaseGrid::PhaseGrid(int intervals) : intervals_(intervals) {
  if (intervals < 2) throw std::invalid_argument("phase grid needs K >= 2");
}

std::shared_ptr<const GridTable> grid_table_for(int n_via, int dof, const PhaseGrid& grid) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, std::shared_ptr<const GridTable>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{n_via, dof, grid.intervals()}];
  if (!slot) {
    auto table = std::make_shared<GridTable>(GridTable{basis_for(n_via, dof), grid, {}});
    for (int order = 0; order < 3; ++order) {
      table->rows[order].resize(grid.size(), table->basis->n_weights());
      for (int k = 0; k < grid.size(); ++k) {
        table->rows[order].row(k) = table->basis->row(grid.point(k), order);
      }
    }
    slot = std::move(table);
  }
  return slot;
}

double min_duration_at_point(const Eigen::Ref<const Eigen::VectorXd>& a,
                             const Eigen::Ref<const Eigen::VectorXd>& b,
                             const Eigen::Ref<const Eigen::VectorXd>& c,
                             const Eigen::Ref<const Eigen::VectorXd>& d,
                             const KinodynamicLimits& limits) {
  const auto n = a.size();
  if (b.size() != n || c.size() != n || d.size() != n || limits.dof() != n) {
    throw DimensionMismatch("per-point duration inputs differ in dimension");
  }
  IntervalSet admissible{{0.0, kInf}};
  for (Eigen::Index i = 0; i < n; ++i) {
    restrict_row(admissible, a(i), b(i), c(i), d(i), limits.qd_min(i), limits.qd_max(i), limits.qdd_min(i),
                 limits.qdd_max(i));
  }
  return duration_from(admissible);
}

double min_duration(const GridTable& table, const Eigen::MatrixXd& via,
                    const BoundaryConditions& bc, const KinodynamicLimits& limits) {
  const SplineBasis& basis = *table.basis;
  if (limits.dof() != basis.dof()) throw DimensionMismatch("limits do not match the basis");
  // q' = a + T b_vel and q'' = c + T d_vel, split into the duration-free part
  // and the part carried by the boundary velocities.
  const Eigen::MatrixXd w_pos = weight_matrix(basis, via, bc, 0.0);
  const Eigen::MatrixXd a = table.rows[1] * w_pos;
  const Eigen::MatrixXd c = table.rows[2] * w_pos;
  const int c_v0 = basis.boundary_column(kStartSlope);
  const int c_vT = basis.boundary_column(kEndSlope);
  const Eigen::MatrixXd b = table.rows[1].col(c_v0) * bc.qd0.transpose() +
                            table.rows[1].col(c_vT) * bc.qdT.transpose();
  const Eigen::MatrixXd d = table.rows[2].col(c_v0) * bc.qd0.transpose() +
                            table.rows[2].col(c_vT) * bc.qdT.transpose();
  IntervalSet admissible{{0.0, kInf}};
  admissible.reserve(8);
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
      restrict_row(admissible, a(k, i), b(k, i), c(k, i), d(k, i), limits.qd_min(i), limits.qd_max(i),
                   limits.qdd_min(i), limits.qdd_max(i));
    }
  }
  return duration_from(admissible);
}

double min_duration(const SplineBasis& basis, const Eigen::MatrixXd& via,
                    const BoundaryConditions& bc, const KinodynamicLimits& limits,
                    const PhaseGrid& grid) {
  return min_duration(*grid_table_for(basis.n_via(), basis.dof(), grid), via, bc, limits);
}

Trajectory synthesize(const GridTable& table, const Eigen::MatrixXd& via,
                      const BoundaryConditions& bc, const KinodynamicLimits& limits) {
  const double duration = min_duration(table, via, bc, limits);
  return Trajectory(table.basis, via, bc, duration);
}

Trajectory synthesize(std::shared_ptr<const SplineBasis> basis, const Eigen::MatrixXd& via,
                      const BoundaryConditions& bc, const KinodynamicLimits& limits,
                      const PhaseGrid& grid) {
  const double duration = min_duration(*basis, via, bc, limits, grid);
  return Trajectory(std::move(basis), via, bc, duration);
}

GridSamples sample_on_grid(const Trajectory& traj, const GridTable& table) {
  GridSamples out;
  const Eigen::MatrixXd& w = traj.weights();
  out.q = table.rows[0] * w;
  if (traj.degenerate()) {
    out.qd = Eigen::MatrixXd::Zero(out.q.rows(), out.q.cols());
    out.qdd = out.qd;
  } else {
    const double t = traj.duration();
    out.qd = table.rows[1] * w / t;
    out.qdd = table.rows[2] * w / (t * t);
  }
  return out;
}

GridSamples sample_on_grid(const Trajectory& traj, const PhaseGrid& grid) {
  return sample_on_grid(traj, *grid_table_for(traj.basis().n_via(), traj.dof(), grid));
}

double max_limit_excess(const GridSamples& samples, const KinodynamicLimits& limits) {
  double excess = -kInf;
  for (Eigen::Index k = 0; k < samples.qd.rows(); ++k) {
    for (Eigen::Index i = 0; i < samples.qd.cols(); ++i) {
      excess = std::max({excess, samples.qd(k, i) - limits.qd_max(i), limits.qd_min(i) - samples.qd(k, i),
                         samples.qdd(k, i) - limits.qdd_max(i), limits.qdd_min(i) - samples.qdd(k, i)});
    }
  }
  return excess;
}

bool saturates_limit(const GridSamples& samples, const KinodynamicLimits& limits, double rel_tol) {
  auto near = [rel_tol](double value, double bound) {
    return std::abs(value - bound) <= rel_tol * std::abs(bound);
  };
  for (Eigen::Index k = 0; k < samples.qd.rows(); ++k) {
    for (Eigen::Index i = 0; i < samples.qd.cols(); ++i) {
      if (near(samples.qd(k, i), limits.qd_max(i)) || near(samples.qd(k, i), limits.qd_min(i)) ||
          near(samples.qdd(k, i), limits.qdd_max(i)) || near(samples.qdd(k, i), limits.qdd_min(i))) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace vpsto
