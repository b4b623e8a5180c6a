#include "vpsto/vpsto.hpp"

#include "vpsto/errors.hpp"

#include <chrono>
#include <limits>

namespace vpsto {

void VpstoProblem::validate() const {
  bc.validate();
  limits.validate();
  weights.validate();
  if (bc.dof() != limits.dof()) throw DimensionMismatch("boundary conditions and limits differ in dof");
  if (n_via < 1) throw std::invalid_argument("the stochastic loop needs at least one via-point");
  if (pop_size < 4) throw std::invalid_argument("population size must be at least 4");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
}

Eigen::VectorXd straight_line_init(const BoundaryConditions& bc, int n_via) {
  const double h = 1.0 / (n_via + 1);
  Eigen::MatrixXd via(n_via, bc.dof());
  for (int n = 1; n <= n_via; ++n) via.row(n - 1) = (bc.q0 + (bc.qT - bc.q0) * (n * h)).transpose();
  return stack_via(via);
}

VpstoSolver::VpstoSolver(const VpstoProblem& problem, const Eigen::VectorXd& init_mean,
                         double init_sigma_scale)
    : problem_(problem), table_(grid_table_for(problem.n_via, problem.bc.dof(), problem.grid)) {
  problem_.validate();
  const int dim = problem_.n_via * problem_.bc.dof();
  if (init_mean.size() != dim) throw DimensionMismatch("initial mean must have N*D entries");
  if (!(init_sigma_scale > 0.0)) throw std::invalid_argument("initial sigma scale must be positive");
  prior_ = problem_.smoothness_factor ? build_prior(*table_->basis, problem_.bc)
                                      : SmoothnessPrior::identity(dim);
  const double diag = sigma_diag_for_scale(prior_, init_sigma_scale);
  state_ = init_optimizer(init_mean, Eigen::VectorXd::Constant(dim, diag), problem_.mode, problem_.seed);
}

Evaluation VpstoSolver::evaluate(const Eigen::VectorXd& stacked_via) const {
  Evaluation out;
  const Eigen::MatrixXd via = unstack_via(stacked_via, problem_.n_via, problem_.bc.dof());
  try {
    out.trajectory = synthesize(*table_, via, problem_.bc, problem_.limits);
  } catch (const InfeasibleError&) {
    out.report.valid = false;
    out.report.total = std::numeric_limits<double>::infinity();
    return out;
  }
  out.report = evaluate_total(*out.trajectory, problem_.weights, problem_.limits, problem_.checker,
                              problem_.push, problem_.grid);
  return out;
}

void VpstoSolver::step() {
  const Eigen::MatrixXd candidates = sample_population(state_, prior_, problem_.pop_size);
  std::vector<double> costs(static_cast<std::size_t>(candidates.rows()));
  double gen_best = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < candidates.rows(); ++m) {
    Evaluation e = evaluate(candidates.row(m).transpose());
    costs[static_cast<std::size_t>(m)] = e.report.total;
    if (!e.trajectory) continue;
    any_feasible_ = true;
    gen_best = std::min(gen_best, e.report.total);
    if (e.report.valid && first_valid_generation_ < 0) first_valid_generation_ = state_.iteration + 1;
    if (!best_traj_ || e.report.total < best_report_.total) {
      best_traj_ = std::move(e.trajectory);
      best_report_ = e.report;
    }
  }
  best_costs_.push_back(gen_best);
  update(state_, prior_, candidates, costs);
}

SolveResult solve(const VpstoProblem& problem, const Eigen::VectorXd& init_mean, double init_sigma_scale) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  VpstoSolver solver(problem, init_mean, init_sigma_scale);

  std::vector<double> mean_costs;
  int first_valid = -1;
  auto record_mean = [&] {
    const Evaluation e = solver.evaluate_mean();
    mean_costs.push_back(e.report.total);
    if (first_valid < 0 && e.report.valid) first_valid = static_cast<int>(mean_costs.size()) - 1;
  };
  record_mean();

  bool done = false;
  while (!done) {
    solver.step();
    record_mean();
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    done = solver.iterations() >= problem.max_iterations ||
           (problem.max_seconds > 0.0 && elapsed >= problem.max_seconds) ||
           (problem.stop_on_convergence && solver.converged());
  }
  if (!solver.any_feasible()) {
    throw InfeasibleError("no candidate in any generation admitted a finite duration");
  }

  Evaluation final_eval = solver.evaluate_mean();
  if (!final_eval.trajectory) {
    final_eval.trajectory = solver.best_trajectory();
    final_eval.report = solver.best_report();
  }

  SolveResult result{*final_eval.trajectory, final_eval.report, solver.best_trajectory(),
                     solver.best_report(), solver.generation_best(), {}, std::move(mean_costs),
                     solver.iterations(), solver.converged(), first_valid,
                     solver.first_valid_generation()};
  double best = std::numeric_limits<double>::infinity();
  for (double c : result.generation_best) {
    best = std::min(best, c);
    result.best_so_far.push_back(best);
  }
  return result;
}

}  // namespace vpsto
