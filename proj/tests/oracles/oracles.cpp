#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace vpsto::test {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::VectorXd uniform_vec(std::mt19937_64& rng, int n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(rng, lo, hi);
  return v;
}

// Basis rows at the grid points; the duration enters through the scaled
// boundary slopes and the 1/T, 1/T^2 factors.
struct GridRows {
  Eigen::MatrixXd vel;
  Eigen::MatrixXd acc;
};

GridRows grid_rows(const SplineBasis& basis, const PhaseGrid& grid) {
  GridRows r{Eigen::MatrixXd(grid.size(), basis.n_weights()), Eigen::MatrixXd(grid.size(), basis.n_weights())};
  for (int k = 0; k < grid.size(); ++k) {
    r.vel.row(k) = basis.row(grid.point(k), 1);
    r.acc.row(k) = basis.row(grid.point(k), 2);
  }
  return r;
}

bool admissible(const GridRows& rows, const Eigen::MatrixXd& via, const BoundaryConditions& bc,
                const KinodynamicLimits& limits, double duration) {
  const int n = static_cast<int>(via.rows());
  Eigen::MatrixXd w(n + 4, bc.dof());
  w.topRows(n) = via;
  w.row(n) = bc.q0.transpose();
  w.row(n + 1) = duration * bc.qd0.transpose();
  w.row(n + 2) = bc.qT.transpose();
  w.row(n + 3) = duration * bc.qdT.transpose();
  const Eigen::MatrixXd v = rows.vel * w / duration;
  const Eigen::MatrixXd a = rows.acc * w / (duration * duration);
  for (int k = 0; k < v.rows(); ++k) {
    for (int j = 0; j < v.cols(); ++j) {
      if (v(k, j) > limits.qd_max[j] || v(k, j) < limits.qd_min[j]) return false;
      if (a(k, j) > limits.qdd_max[j] || a(k, j) < limits.qdd_min[j]) return false;
    }
  }
  return true;
}

}  // namespace

Instance random_instance(std::mt19937_64& rng, int max_dof, int max_via, bool boundary_velocity) {
  Instance inst;
  const int dof = std::uniform_int_distribution<int>(1, max_dof)(rng);
  inst.n_via = std::uniform_int_distribution<int>(0, max_via)(rng);
  inst.limits.qd_max = uniform_vec(rng, dof, 0.2, 2.0);
  inst.limits.qd_min = -uniform_vec(rng, dof, 0.2, 2.0);
  inst.limits.qdd_max = uniform_vec(rng, dof, 0.2, 4.0);
  inst.limits.qdd_min = -uniform_vec(rng, dof, 0.2, 4.0);
  inst.limits.q_min = Eigen::VectorXd::Constant(dof, -1e9);
  inst.limits.q_max = Eigen::VectorXd::Constant(dof, 1e9);
  inst.bc.q0 = uniform_vec(rng, dof, -1.0, 1.0);
  inst.bc.qT = uniform_vec(rng, dof, -1.0, 1.0);
  inst.bc.qd0 = Eigen::VectorXd::Zero(dof);
  inst.bc.qdT = Eigen::VectorXd::Zero(dof);
  if (boundary_velocity) {
    for (Eigen::VectorXd* v : {&inst.bc.qd0, &inst.bc.qdT}) {
      if (uniform(rng, 0.0, 1.0) < 0.3) continue;
      for (int j = 0; j < dof; ++j) {
        (*v)[j] = uniform(rng, 0.8 * inst.limits.qd_min[j], 0.8 * inst.limits.qd_max[j]);
      }
    }
  }
  inst.via.resize(inst.n_via, dof);
  for (int n = 0; n < inst.n_via; ++n) inst.via.row(n) = uniform_vec(rng, dof, -1.5, 1.5).transpose();
  // The boundary velocities alone can overshoot the velocity limits between
  // the knots; such an instance has no admissible duration. Shrink them until
  // the long-duration velocity profile stays inside the limits.
  const SplineBasis basis(inst.n_via, dof);
  const int samples = 600;
  for (int attempt = 0; attempt < 60; ++attempt) {
    bool inside = true;
    for (int k = 0; k <= samples && inside; ++k) {
      const Eigen::VectorXd v = evaluate(basis, inst.via, inst.bc, 1e12, double(k) / samples, 1);
      inside = (v.array() <= 0.99 * inst.limits.qd_max.array()).all() &&
               (v.array() >= 0.99 * inst.limits.qd_min.array()).all();
    }
    if (inside) break;
    inst.bc.qd0 *= 0.5;
    inst.bc.qdT *= 0.5;
  }
  return inst;
}

int oracle_intervals(int n_via, int min_points) {
  const int seg = n_via + 1;
  const int per = (min_points - 1 + seg - 1) / seg;
  return seg * per;
}

Eigen::MatrixXd discrete_min_effort(const Eigen::MatrixXd& via, const BoundaryConditions& bc, int intervals) {
  const int n_via = static_cast<int>(via.rows());
  const int dof = bc.dof();
  if (intervals % (n_via + 1) != 0) throw std::invalid_argument("intervals must be a multiple of N + 1");
  const int m = intervals;
  const double h = 1.0 / m;
  const int nodes = m + 3;  // ghost nodes at index 0 and m + 2; node i sits at s = (i - 1) h
  const int n_cons = 4 + n_via;

  // Second differences at s_0 .. s_m, trapezoid weights (half at the ends).
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(m + 1, nodes);
  for (int i = 0; i <= m; ++i) {
    const double w = (i == 0 || i == m) ? std::sqrt(0.5) : 1.0;
    d2(i, i) = w;
    d2(i, i + 1) = -2.0 * w;
    d2(i, i + 2) = w;
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_cons, nodes);
  a(0, 1) = 1.0;
  a(1, m + 1) = 1.0;
  a(2, 0) = -1.0 / (2 * h);
  a(2, 2) = 1.0 / (2 * h);
  a(3, m) = -1.0 / (2 * h);
  a(3, m + 2) = 1.0 / (2 * h);
  const int stride = m / (n_via + 1);
  for (int n = 1; n <= n_via; ++n) a(3 + n, 1 + n * stride) = 1.0;

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nodes + n_cons, nodes + n_cons);
  kkt.topLeftCorner(nodes, nodes) = 2.0 * d2.transpose() * d2;
  kkt.topRightCorner(nodes, n_cons) = a.transpose();
  kkt.bottomLeftCorner(n_cons, nodes) = a;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);

  Eigen::MatrixXd out(m + 1, dof);
  for (int j = 0; j < dof; ++j) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nodes + n_cons);
    rhs[nodes + 0] = bc.q0[j];
    rhs[nodes + 1] = bc.qT[j];
    rhs[nodes + 2] = bc.qd0[j];
    rhs[nodes + 3] = bc.qdT[j];
    for (int n = 1; n <= n_via; ++n) rhs[nodes + 3 + n] = via(n - 1, j);
    const Eigen::VectorXd sol = lu.solve(rhs);
    out.col(j) = sol.segment(1, m + 1);
  }
  return out;
}

double bisection_duration(const SplineBasis& basis, const Eigen::MatrixXd& via, const BoundaryConditions& bc,
                          const KinodynamicLimits& limits, const PhaseGrid& grid, double tol) {
  // Scan the whole range downward on a fine log grid, remember the smallest
  // admissible duration seen and bisect against its inadmissible neighbour.
  const GridRows rows = grid_rows(basis, grid);
  double hi = 1e4;
  if (!admissible(rows, via, bc, limits, hi)) throw std::runtime_error("oracle: no admissible duration");
  const double factor = 1.002;
  double best = hi;
  double below = 0.0;
  for (double t = hi / factor; t > 1e-9; t /= factor) {
    if (admissible(rows, via, bc, limits, t)) {
      best = t;
      below = 0.0;
    } else if (below == 0.0) {
      below = t;
    }
  }
  if (below == 0.0) return 0.0;
  double lo = below;
  hi = best;
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (admissible(rows, via, bc, limits, mid) ? hi : lo) = mid;
  }
  return hi;
}

double grid_limit_excess(const Trajectory& traj, const KinodynamicLimits& limits, const PhaseGrid& grid) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid.size(); ++k) {
    const Eigen::VectorXd v = traj.velocity(grid.point(k));
    const Eigen::VectorXd a = traj.acceleration(grid.point(k));
    for (int j = 0; j < v.size(); ++j) {
      worst = std::max({worst, v[j] - limits.qd_max[j], limits.qd_min[j] - v[j], a[j] - limits.qdd_max[j],
                        limits.qdd_min[j] - a[j]});
    }
  }
  return worst;
}

bool grid_saturates(const Trajectory& traj, const KinodynamicLimits& limits, const PhaseGrid& grid,
                    double rel_tol) {
  auto near = [rel_tol](double x, double bound) { return std::abs(x - bound) <= rel_tol * std::abs(bound); };
  for (int k = 0; k < grid.size(); ++k) {
    const Eigen::VectorXd v = traj.velocity(grid.point(k));
    const Eigen::VectorXd a = traj.acceleration(grid.point(k));
    for (int j = 0; j < v.size(); ++j) {
      if (near(v[j], limits.qd_max[j]) || near(v[j], limits.qd_min[j]) || near(a[j], limits.qdd_max[j]) ||
          near(a[j], limits.qdd_min[j])) {
        return true;
      }
    }
  }
  return false;
}

namespace {

constexpr double kGaussNodes[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr double kGaussWeights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

}  // namespace

Eigen::MatrixXd quadrature_gram(const SplineBasis& basis) {
  const int w = basis.n_weights();
  const double h = basis.segment_length();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(w, w);
  for (int seg = 0; seg <= basis.n_via(); ++seg) {
    const double mid = (seg + 0.5) * h;
    for (int i = 0; i < 3; ++i) {
      const Eigen::RowVectorXd r = basis.row(mid + 0.5 * h * kGaussNodes[i], 2);
      g += 0.5 * h * kGaussWeights[i] * r.transpose() * r;
    }
  }
  return g;
}

double single_via_gram() {
  // On [0, h], q(s) = 3u^2 - 2u^3 with u = s / h, so q''(s) = (6 - 12u) / h^2.
  const double h = 0.5;
  double half = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double u = 0.5 + 0.5 * kGaussNodes[i];
    const double qdd = (6.0 - 12.0 * u) / (h * h);
    half += 0.5 * h * kGaussWeights[i] * qdd * qdd;
  }
  return 2.0 * half;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double mann_whitney_p(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  std::vector<std::pair<double, int>> all;
  for (double x : a) all.emplace_back(x, 0);
  for (double x : b) all.emplace_back(x, 1);
  std::sort(all.begin(), all.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  const std::size_t n = all.size();
  std::vector<double> rank(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && all[j + 1].first == all[i].first) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[k] = r;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  double r1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (all[i].second == 0) r1 += rank[i];
  }
  const double u1 = r1 - static_cast<double>(n1 * (n1 + 1)) / 2.0;
  const double mean = static_cast<double>(n1 * n2) / 2.0;
  const double nn = static_cast<double>(n);
  const double var = static_cast<double>(n1 * n2) / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0.0) return 1.0;
  // Continuity-corrected two-sided normal approximation.
  const double z = (std::abs(u1 - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, 2.0 * (1.0 - normal_cdf(std::max(z, 0.0))));
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
  }
  const double ne = std::sqrt(n1 * n2 / (n1 + n2));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  double p = 0.0;
  if (lambda < 1e-3) {
    p = 1.0;
  } else {
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
      p += sign * 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
      sign = -sign;
    }
    p = std::clamp(p, 0.0, 1.0);
  }
  return {d, p};
}

double linear_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (syy == 0.0) return 1.0;
  return sxy * sxy / (sxx * syy);
}

}  // namespace vpsto::test
