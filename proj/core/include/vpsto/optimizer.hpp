#pragma once

#include "vpsto/spline.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace vpsto {

enum class CovarianceMode { Separable, Full };

/// Gaussian smoothness prior over the stacked via vector, conditioned on the
/// boundary parameters: covariance G_via^-1 and the mean minimizing the
/// smoothness quadratic form.
struct SmoothnessPrior {
  Eigen::MatrixXd sigma;  // N*D x N*D
  Eigen::MatrixXd chol;   // lower triangular, sigma = chol * chol^T
  Eigen::VectorXd mean;   // N*D

  int dim() const { return static_cast<int>(chol.rows()); }

  /// Unit prior (chol = I): plain CMA-ES sampling without the smoothness shape.
  static SmoothnessPrior identity(int dim);
};

/// Boundary slopes in `bc` are taken as phase derivatives (duration 1).
SmoothnessPrior build_prior(const SplineBasis& basis, const BoundaryConditions& bc);

/// Strategy constants; standard CMA-ES defaults, with the separable variant's
/// covariance learning rates enlarged by (n + 2) / 3.
struct EsParameters {
  int lambda = 0;
  int mu = 0;
  Eigen::VectorXd weights;
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double chi_n = 0.0;

  static EsParameters defaults(int dim, int lambda, CovarianceMode mode);
};

/// Search distribution N(mean, step^2 * L * C * L^T). C is diag(sigma_diag)
/// in separable mode and the dense `cov` in full mode.
struct OptimizerState {
  CovarianceMode mode = CovarianceMode::Separable;
  Eigen::VectorXd mean;
  Eigen::VectorXd sigma_diag;
  Eigen::MatrixXd cov;
  double step_size = 1.0;
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd path_c;
  int iteration = 0;
  std::mt19937_64 rng;

  // Full mode: cov = eig_vectors * diag(eig_sqrt^2) * eig_vectors^T.
  Eigen::MatrixXd eig_vectors;
  Eigen::VectorXd eig_sqrt;

  int dim() const { return static_cast<int>(mean.size()); }
};

inline constexpr double kSigmaFloor = 1e-12;

OptimizerState init_optimizer(const Eigen::VectorXd& mean, const Eigen::VectorXd& sigma_diag,
                              CovarianceMode mode, std::uint64_t seed, double step_size = 1.0);

/// Diagonal value that makes the average marginal standard deviation of
/// L * diag(sigma) * L^T equal to `scale`.
double sigma_diag_for_scale(const SmoothnessPrior& prior, double scale);

/// M x (N*D) candidates: mean + step * L * C^(1/2) * z, z ~ N(0, I).
Eigen::MatrixXd sample_population(OptimizerState& state, const SmoothnessPrior& prior, int pop_size);

/// Maps candidates back to the normalized coordinates L^-1 (x - mean) / step.
Eigen::MatrixXd shaped_steps(const OptimizerState& state, const SmoothnessPrior& prior,
                             const Eigen::MatrixXd& candidates);

/// Stable ascending ranking; equal costs keep candidate order, NaN sorts last.
std::vector<int> rank_costs(const std::vector<double>& costs);

/// One generation of rank-based mean, step-size and covariance adaptation.
void update(OptimizerState& state, const SmoothnessPrior& prior, const Eigen::MatrixXd& candidates,
            const std::vector<double>& costs);

/// True iff the last two recorded costs differ by less than `tol`.
bool converged(const std::vector<double>& cost_history, double tol = 1e-6);

}  // namespace vpsto
