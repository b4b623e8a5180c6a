#include "vpsto/costs.hpp"
#include "vpsto/optimizer.hpp"
#include "vpsto/timing.hpp"
#include "vpsto/vpsto.hpp"
#include "vpsto/worlds.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace vpsto;

namespace {

BoundaryConditions cluttered_bc() { return BoundaryConditions::rest_to_rest(cluttered_start(), cluttered_goal()); }

Eigen::MatrixXd random_via(int n_via, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  Eigen::MatrixXd via(n_via, 2);
  for (int i = 0; i < via.size(); ++i) via(i) = u(rng);
  return via;
}

void BM_Synthesize(benchmark::State& state) {
  const int n_via = static_cast<int>(state.range(0));
  const auto table = grid_table_for(n_via, 2, PhaseGrid(50));
  const BoundaryConditions bc = cluttered_bc();
  const KinodynamicLimits lim = KinodynamicLimits::symmetric(Eigen::Vector2d(1, 1), Eigen::Vector2d(2, 2));
  const Eigen::MatrixXd via = random_via(n_via, 1);
  for (auto _ : state) benchmark::DoNotOptimize(synthesize(*table, via, bc, lim));
}
BENCHMARK(BM_Synthesize)->Arg(1)->Arg(5)->Arg(16);

void BM_EvaluateTotal(benchmark::State& state) {
  const World2D world = cluttered_world();
  const auto table = grid_table_for(5, 2, PhaseGrid(50));
  const KinodynamicLimits lim =
      KinodynamicLimits::symmetric(Eigen::Vector2d(1, 1), Eigen::Vector2d(2, 2), world.q_min(), world.q_max());
  const Trajectory traj = synthesize(*table, random_via(5, 2), cluttered_bc(), lim);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_total(traj, CostWeights{}, lim, &world, nullptr, PhaseGrid(50)));
}
BENCHMARK(BM_EvaluateTotal);

void BM_SampleAndUpdate(benchmark::State& state) {
  const auto mode = state.range(0) == 0 ? CovarianceMode::Separable : CovarianceMode::Full;
  const SmoothnessPrior prior = build_prior(SplineBasis(5, 2), cluttered_bc());
  OptimizerState s = init_optimizer(prior.mean, Eigen::VectorXd::Constant(prior.dim(), sigma_diag_for_scale(prior, 0.5)), mode, 3);
  std::vector<double> costs(32);
  for (auto _ : state) {
    const Eigen::MatrixXd x = sample_population(s, prior, 32);
    for (int m = 0; m < 32; ++m) costs[static_cast<std::size_t>(m)] = (x.row(m).transpose() - prior.mean).squaredNorm();
    update(s, prior, x, costs);
  }
}
BENCHMARK(BM_SampleAndUpdate)->Arg(0)->Arg(1);

void BM_SolveCluttered(benchmark::State& state) {
  const World2D world = cluttered_world();
  VpstoProblem problem;
  problem.bc = cluttered_bc();
  problem.limits =
      KinodynamicLimits::symmetric(Eigen::Vector2d(1, 1), Eigen::Vector2d(2, 2), world.q_min(), world.q_max());
  problem.n_via = 5;
  problem.pop_size = 32;
  problem.checker = &world;
  problem.max_iterations = 100;
  for (auto _ : state) benchmark::DoNotOptimize(solve(problem, straight_line_init(problem.bc, 5), 0.5));
}
BENCHMARK(BM_SolveCluttered)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
