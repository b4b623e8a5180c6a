#pragma once

#include "vpsto/costs.hpp"
#include "vpsto/optimizer.hpp"
#include "vpsto/spline.hpp"
#include "vpsto/timing.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace vpsto {

/// Offline via-point optimization problem: minimize the task cost over the
/// via-points while every candidate is synthesized at its minimal admissible
/// duration.
struct VpstoProblem {
  BoundaryConditions bc;
  KinodynamicLimits limits;
  int n_via = 5;
  int pop_size = 16;
  PhaseGrid grid{50};
  CostWeights weights;
  const CollisionChecker* checker = nullptr;
  const PushContext* push = nullptr;
  int max_iterations = 300;
  double max_seconds = 0.0;  // 0 disables the wall-clock budget
  double tol = 1e-6;
  bool stop_on_convergence = true;
  std::uint64_t seed = 0;
  CovarianceMode mode = CovarianceMode::Separable;
  bool smoothness_factor = true;

  void validate() const;
};

/// Straight segment from q0 to qT sampled at the via phases, stacked.
Eigen::VectorXd straight_line_init(const BoundaryConditions& bc, int n_via);

struct Evaluation {
  std::optional<Trajectory> trajectory;  // empty when synthesis was infeasible
  CostReport report;
};

/// Generation-by-generation driver: sample, synthesize, evaluate, update.
/// The caller owns the stopping rule (iteration count, convergence or clock).
class VpstoSolver {
 public:
  /// `init_sigma_scale` is the average marginal standard deviation of the
  /// first population in configuration units.
  VpstoSolver(const VpstoProblem& problem, const Eigen::VectorXd& init_mean, double init_sigma_scale);

  void step();

  int iterations() const { return state_.iteration; }
  bool converged() const { return vpsto::converged(best_costs_, problem_.tol); }
  bool any_feasible() const { return any_feasible_; }
  /// 1-based generation that first produced a valid candidate, -1 if none yet.
  int first_valid_generation() const { return first_valid_generation_; }

  const OptimizerState& state() const { return state_; }
  const SmoothnessPrior& prior() const { return prior_; }
  const std::vector<double>& generation_best() const { return best_costs_; }

  Evaluation evaluate(const Eigen::VectorXd& stacked_via) const;
  Evaluation evaluate_mean() const { return evaluate(state_.mean); }

  /// Best candidate evaluated so far (empty before any feasible candidate).
  const std::optional<Trajectory>& best_trajectory() const { return best_traj_; }
  const CostReport& best_report() const { return best_report_; }

 private:
  VpstoProblem problem_;
  std::shared_ptr<const GridTable> table_;
  SmoothnessPrior prior_;
  OptimizerState state_;
  std::vector<double> best_costs_;
  std::optional<Trajectory> best_traj_;
  CostReport best_report_;
  bool any_feasible_ = false;
  int first_valid_generation_ = -1;
};

struct SolveResult {
  Trajectory trajectory;  // synthesized from the final mean
  CostReport report;
  std::optional<Trajectory> best_trajectory;
  CostReport best_report;
  std::vector<double> generation_best;  // best candidate cost per generation
  std::vector<double> best_so_far;
  std::vector<double> mean_costs;  // cost of the mean after j updates, j = 0..iterations
  int iterations = 0;
  bool converged = false;
  int first_valid_iteration = -1;   // first j whose mean is valid
  int first_valid_generation = -1;  // first generation with a valid candidate
};

/// Runs generations until convergence (|c_k - c_{k-1}| < tol on the
/// generation-best cost) or the iteration / wall-clock budget is spent.
SolveResult solve(const VpstoProblem& problem, const Eigen::VectorXd& init_mean, double init_sigma_scale);

}  // namespace vpsto
