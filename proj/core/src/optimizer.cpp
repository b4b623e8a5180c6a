#include "vpsto/optimizer.hpp"

#include "vpsto/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vpsto {

namespace {

void refresh_eigensystem(OptimizerState& state) {
  Eigen::MatrixXd sym = 0.5 * (state.cov + state.cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  state.cov = sym;
  state.eig_vectors = eig.eigenvectors();
  state.eig_sqrt = eig.eigenvalues().cwiseMax(kSigmaFloor).cwiseSqrt();
}

}  // namespace

SmoothnessPrior SmoothnessPrior::identity(int dim) {
  return {Eigen::MatrixXd::Identity(dim, dim), Eigen::MatrixXd::Identity(dim, dim),
          Eigen::VectorXd::Zero(dim)};
}

SmoothnessPrior build_prior(const SplineBasis& basis, const BoundaryConditions& bc) {
  if (bc.dof() != basis.dof()) throw DimensionMismatch("boundary conditions do not match the basis");
  const int d = basis.dof();
  const Eigen::MatrixXd g_via = basis.gram_via();
  const Eigen::MatrixXd g_cross = basis.gram_cross();
  Eigen::VectorXd w_bc(4 * d);
  w_bc << bc.q0, bc.qd0, bc.qT, bc.qdT;

  SmoothnessPrior prior;
  const Eigen::LLT<Eigen::MatrixXd> g_llt(g_via);
  const auto n = g_via.rows();
  prior.sigma = g_llt.solve(Eigen::MatrixXd::Identity(n, n));
  prior.sigma = (0.5 * (prior.sigma + prior.sigma.transpose())).eval();
  prior.chol = Eigen::LLT<Eigen::MatrixXd>(prior.sigma).matrixL();
  // Stationarity of the smoothness form in q_via: G_via mu + G_cross w_bc = 0.
  prior.mean = -g_llt.solve(g_cross * w_bc);
  return prior;
}

EsParameters EsParameters::defaults(int dim, int lambda, CovarianceMode mode) {
  if (dim < 1) throw std::invalid_argument("search dimension must be positive");
  if (lambda < 2) throw std::invalid_argument("population size must be at least 2");
  EsParameters p;
  const double n = dim;
  p.lambda = lambda;
  p.mu = lambda / 2;
  p.weights.resize(p.mu);
  for (int i = 0; i < p.mu; ++i) p.weights(i) = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  p.weights /= p.weights.sum();
  p.mu_eff = 1.0 / p.weights.squaredNorm();

  p.c_sigma = (p.mu_eff + 2.0) / (n + p.mu_eff + 5.0);
  p.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((p.mu_eff - 1.0) / (n + 1.0)) - 1.0) + p.c_sigma;
  p.c_c = (4.0 + p.mu_eff / n) / (n + 4.0 + 2.0 * p.mu_eff / n);
  p.c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + p.mu_eff);
  p.c_mu = std::min(1.0 - p.c_1,
                    2.0 * (p.mu_eff - 2.0 + 1.0 / p.mu_eff) / ((n + 2.0) * (n + 2.0) + p.mu_eff));
  if (mode == CovarianceMode::Separable) {
    const double boost = (n + 2.0) / 3.0;
    p.c_1 = std::min(1.0, p.c_1 * boost);
    p.c_mu = std::min(1.0 - p.c_1, p.c_mu * boost);
  }
  p.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  return p;
}

OptimizerState init_optimizer(const Eigen::VectorXd& mean, const Eigen::VectorXd& sigma_diag,
                              CovarianceMode mode, std::uint64_t seed, double step_size) {
  if (mean.size() != sigma_diag.size()) throw DimensionMismatch("mean and sigma differ in length");
  if (!(step_size > 0.0)) throw std::invalid_argument("step size must be positive");
  OptimizerState s;
  s.mode = mode;
  s.mean = mean;
  s.sigma_diag = sigma_diag.cwiseMax(kSigmaFloor);
  s.step_size = step_size;
  s.path_sigma = Eigen::VectorXd::Zero(mean.size());
  s.path_c = Eigen::VectorXd::Zero(mean.size());
  s.rng.seed(seed);
  if (mode == CovarianceMode::Full) {
    s.cov = s.sigma_diag.asDiagonal();
    refresh_eigensystem(s);
  }
  return s;
}

double sigma_diag_for_scale(const SmoothnessPrior& prior, double scale) {
  const double mean_var = prior.chol.rowwise().squaredNorm().mean();
  return scale * scale / mean_var;
}

Eigen::MatrixXd sample_population(OptimizerState& state, const SmoothnessPrior& prior, int pop_size) {
  const int n = state.dim();
  if (prior.dim() != n) throw DimensionMismatch("prior and optimizer state differ in dimension");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(pop_size, n);
  Eigen::VectorXd z(n);
  Eigen::VectorXd u(n);
  const auto lower = prior.chol.triangularView<Eigen::Lower>();
  for (int m = 0; m < pop_size; ++m) {
    for (int i = 0; i < n; ++i) z(i) = normal(state.rng);
    if (state.mode == CovarianceMode::Separable) {
      u = state.sigma_diag.cwiseSqrt().cwiseProduct(z);
    } else {
      u = state.eig_vectors * state.eig_sqrt.cwiseProduct(z);
    }
    const Eigen::VectorXd step = lower * u;
    out.row(m) = (state.mean + state.step_size * step).transpose();
  }
  return out;
}

Eigen::MatrixXd shaped_steps(const OptimizerState& state, const SmoothnessPrior& prior,
                             const Eigen::MatrixXd& candidates) {
  Eigen::MatrixXd diff = (candidates.rowwise() - state.mean.transpose()).transpose();
  prior.chol.triangularView<Eigen::Lower>().solveInPlace(diff);
  return diff.transpose() / state.step_size;
}

std::vector<int> rank_costs(const std::vector<double>& costs) {
  std::vector<int> order(costs.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&costs](int i) {
    return std::isnan(costs[static_cast<std::size_t>(i)]) ? std::numeric_limits<double>::infinity()
                                                          : costs[static_cast<std::size_t>(i)];
  };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
  return order;
}

void update(OptimizerState& state, const SmoothnessPrior& prior, const Eigen::MatrixXd& candidates,
            const std::vector<double>& costs) {
  const int n = state.dim();
  const auto lambda = static_cast<int>(candidates.rows());
  if (candidates.cols() != n || static_cast<int>(costs.size()) != lambda || prior.dim() != n) {
    throw DimensionMismatch("candidates, costs and state disagree in size");
  }
  const EsParameters p = EsParameters::defaults(n, lambda, state.mode);
  const std::vector<int> order = rank_costs(costs);
  const Eigen::MatrixXd y = shaped_steps(state, prior, candidates);

  Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < p.mu; ++i) y_w += p.weights(i) * y.row(order[static_cast<std::size_t>(i)]).transpose();

  const Eigen::VectorXd mean_shift = prior.chol.triangularView<Eigen::Lower>() * y_w;
  state.mean += state.step_size * mean_shift;

  // C^(-1/2) y_w
  Eigen::VectorXd whitened;
  if (state.mode == CovarianceMode::Separable) {
    whitened = y_w.cwiseQuotient(state.sigma_diag.cwiseSqrt());
  } else {
    whitened = state.eig_vectors *
               (state.eig_vectors.transpose() * y_w).cwiseQuotient(state.eig_sqrt);
  }
  state.path_sigma = (1.0 - p.c_sigma) * state.path_sigma +
                     std::sqrt(p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff) * whitened;

  const double norm_ps = state.path_sigma.norm();
  const double damp = std::sqrt(1.0 - std::pow(1.0 - p.c_sigma, 2.0 * (state.iteration + 1)));
  const bool h_sigma = norm_ps / damp < (1.4 + 2.0 / (n + 1.0)) * p.chi_n;
  state.path_c = (1.0 - p.c_c) * state.path_c +
                 (h_sigma ? std::sqrt(p.c_c * (2.0 - p.c_c) * p.mu_eff) : 0.0) * y_w;
  const double delta_h = h_sigma ? 0.0 : p.c_c * (2.0 - p.c_c);

  if (state.mode == CovarianceMode::Separable) {
    Eigen::VectorXd rank_mu = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < p.mu; ++i) {
      rank_mu += p.weights(i) * y.row(order[static_cast<std::size_t>(i)]).transpose().cwiseAbs2();
    }
    state.sigma_diag = (1.0 - p.c_1 - p.c_mu) * state.sigma_diag +
                       p.c_1 * (state.path_c.cwiseAbs2() + delta_h * state.sigma_diag) + p.c_mu * rank_mu;
    state.sigma_diag = state.sigma_diag.cwiseMax(kSigmaFloor);
  } else {
    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < p.mu; ++i) {
      const Eigen::VectorXd yi = y.row(order[static_cast<std::size_t>(i)]).transpose();
      rank_mu += p.weights(i) * yi * yi.transpose();
    }
    state.cov = (1.0 - p.c_1 - p.c_mu) * state.cov +
                p.c_1 * (state.path_c * state.path_c.transpose() + delta_h * state.cov) + p.c_mu * rank_mu;
    refresh_eigensystem(state);
    state.sigma_diag = state.cov.diagonal().cwiseMax(kSigmaFloor);
  }

  state.step_size *= std::exp((p.c_sigma / p.d_sigma) * (norm_ps / p.chi_n - 1.0));
  ++state.iteration;
}

bool converged(const std::vector<double>& cost_history, double tol) {
  if (cost_history.size() < 2) return false;
  const double last = cost_history[cost_history.size() - 1];
  const double prev = cost_history[cost_history.size() - 2];
  return std::abs(last - prev) < tol;
}

}  // namespace vpsto
