#include "vpsto/mpc.hpp"

#include "vpsto/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace vpsto {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Eigen::VectorXd clamp_velocity(const Eigen::VectorXd& qd, const KinodynamicLimits& limits) {
  return qd.cwiseMax(limits.qd_min).cwiseMin(limits.qd_max);
}

// Reference samples of `traj` on [offset, min(offset + dt_mpc, T)].
ShortHorizon sample_reference(const Trajectory& traj, double offset, double dt_mpc, double plant_dt) {
  const int d = traj.dof();
  const double end = std::min(offset + dt_mpc, traj.duration());
  const double span = std::max(0.0, end - offset);
  auto count = static_cast<Eigen::Index>(std::floor(span / plant_dt + 1e-9)) + 1;
  const bool append_end = count == 1;
  if (append_end) count = 2;

  ShortHorizon out;
  out.t.resize(static_cast<std::size_t>(count));
  out.q.resize(count, d);
  out.qd.resize(count, d);
  out.qdd.resize(count, d);
  for (Eigen::Index k = 0; k < count; ++k) {
    const double local = (append_end && k == 1) ? span : static_cast<double>(k) * plant_dt;
    const double t = offset + local;
    out.t[static_cast<std::size_t>(k)] = local;
    out.q.row(k) = traj.position_at(t).transpose();
    out.qd.row(k) = traj.velocity_at(t).transpose();
    out.qdd.row(k) = traj.acceleration_at(t).transpose();
  }
  return out;
}

ShortHorizon hold_reference(const Eigen::VectorXd& q) {
  ShortHorizon out;
  out.t = {0.0};
  out.q = q.transpose();
  out.qd = Eigen::RowVectorXd::Zero(q.size());
  out.qdd = Eigen::RowVectorXd::Zero(q.size());
  return out;
}

CostReport direct_report(const Trajectory& traj, const MpcTask& task, const MpcConfig& config) {
  return evaluate_total(traj, config.weights, task.limits, task.checker, task.push, config.grid);
}

// Runs generations within the configured budget. `begin` is the step start.
template <typename StepFn>
void run_budget(const MpcConfig& config, Clock::time_point begin, MpcStepResult& out, StepFn&& step) {
  const double budget_ms = config.dt_mpc * 1000.0;
  while (config.budget == BudgetMode::WallClock ? ms_since(begin) < budget_ms
                                                : out.iterations_run < config.generations) {
    const auto gen_start = Clock::now();
    step();
    out.max_generation_ms = std::max(out.max_generation_ms, ms_since(gen_start));
    ++out.iterations_run;
  }
}

// Tries the direct trajectory; fills `out` and returns true if it is accepted.
bool try_direct(const BoundaryConditions& bc, const MpcTask& task, const MpcConfig& config,
                MpcStepResult& out) {
  try {
    Trajectory direct = direct_trajectory(bc.q0, bc.qd0, bc.qT, bc.qdT, task.limits, config.grid);
    const CostReport report = direct_report(direct, task, config);
    if (report.valid && direct.duration() <= config.t_stop) {
      out.mode = MpcMode::Direct;
      out.valid = true;
      out.report = report;
      out.solution = std::move(direct);
      return true;
    }
  } catch (const InfeasibleError&) {
  }
  return false;
}

}  // namespace

std::string to_string(MpcMode mode) {
  switch (mode) {
    case MpcMode::Direct: return "direct";
    case MpcMode::WarmStart: return "warmstart";
    case MpcMode::Explore: return "explore";
  }
  return "unknown";
}

void MpcConfig::validate() const {
  if (!(dt_mpc > 0.0)) throw std::invalid_argument("dt_mpc must be positive");
  if (!(t_stop > 0.0)) throw std::invalid_argument("T_stop must be positive");
  if (n_max < 1) throw std::invalid_argument("N_max must be at least 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (pop_size < 4) throw std::invalid_argument("population size must be at least 4");
  if (!(warmstart_sigma > 0.0) || !(explore_sigma > warmstart_sigma)) {
    throw std::invalid_argument("need explore_sigma > warmstart_sigma > 0");
  }
  if (!(plant_dt > 0.0) || plant_dt > dt_mpc) {
    throw std::invalid_argument("plant_dt must be positive and at most dt_mpc");
  }
  if (budget == BudgetMode::Generations && generations < 1) {
    throw std::invalid_argument("generation budget must be at least 1");
  }
  weights.validate();
}

void MpcConfig::set_default_sigmas(const Eigen::VectorXd& q0, const Eigen::VectorXd& qT) {
  const double dist = std::max((qT - q0).norm(), 1e-6);
  if (explore_sigma <= 0.0) explore_sigma = 0.5 * dist;
  if (warmstart_sigma <= 0.0) warmstart_sigma = 0.05 * dist;
}

ShortHorizon extract_short_horizon(const Trajectory& traj, double dt_mpc, double plant_dt) {
  if (!(plant_dt > 0.0) || plant_dt > dt_mpc) {
    throw std::invalid_argument("plant_dt must be positive and at most dt_mpc");
  }
  return sample_reference(traj, 0.0, dt_mpc, plant_dt);
}

Trajectory direct_trajectory(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& qT,
                             const Eigen::VectorXd& qdT, const KinodynamicLimits& limits,
                             const PhaseGrid& grid) {
  const BoundaryConditions bc{q, qd, qT, qdT};
  bc.validate();
  const auto table = grid_table_for(0, bc.dof(), grid);
  return synthesize(*table, Eigen::MatrixXd(0, bc.dof()), bc, limits);
}

int select_n_via(double duration, double alpha, int n_max) {
  if (duration < 0.0) throw std::invalid_argument("duration must be non-negative");
  const double raw = std::ceil(alpha * duration);
  const double clamped = std::min(raw, static_cast<double>(n_max));
  return std::max(1, static_cast<int>(clamped));
}

InitGuess warm_start(const Trajectory& prev, double elapsed, const BoundaryConditions& new_bc, double alpha,
                     int n_max, double warmstart_sigma) {
  if (new_bc.dof() != prev.dof()) throw DimensionMismatch("warm start changes the dof");
  const double remaining = prev.duration() - elapsed;
  if (!(remaining > 0.0)) throw ExpiredError("previous solution has been fully executed");
  InitGuess g;
  g.n_via = select_n_via(remaining, alpha, n_max);
  g.sigma_scale = warmstart_sigma;
  Eigen::MatrixXd via(g.n_via, prev.dof());
  for (int n = 1; n <= g.n_via; ++n) {
    const double s = static_cast<double>(n) / (g.n_via + 1);
    via.row(n - 1) = prev.position_at(elapsed + s * remaining).transpose();
  }
  g.mean = stack_via(via);
  return g;
}

InitGuess explore_init(const BoundaryConditions& bc, int n_max, double explore_sigma) {
  return {straight_line_init(bc, n_max), explore_sigma, n_max};
}

MpcStepResult mpc_step(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const MpcTask& task,
                       const MpcStepResult* prev, const MpcConfig& config, std::uint64_t step_seed) {
  const auto begin = Clock::now();
  MpcStepResult out;
  const BoundaryConditions bc{q, clamp_velocity(qd, task.limits), task.qT, task.qdT};

  if (!try_direct(bc, task, config, out)) {
    InitGuess guess;
    out.mode = MpcMode::Explore;
    if (prev != nullptr && prev->valid && prev->solution) {
      try {
        guess = warm_start(*prev->solution, config.dt_mpc, bc, config.alpha, config.n_max,
                           config.warmstart_sigma);
        out.mode = MpcMode::WarmStart;
      } catch (const ExpiredError&) {
      }
    }
    if (out.mode == MpcMode::Explore) guess = explore_init(bc, config.n_max, config.explore_sigma);
    out.n_via = guess.n_via;

    VpstoProblem problem;
    problem.bc = bc;
    problem.limits = task.limits;
    problem.n_via = guess.n_via;
    problem.pop_size = config.pop_size;
    problem.grid = config.grid;
    problem.weights = config.weights;
    problem.checker = task.checker;
    problem.push = task.push;
    problem.seed = step_seed;
    problem.mode = config.mode;
    VpstoSolver solver(problem, guess.mean, guess.sigma_scale);
    run_budget(config, begin, out, [&] { solver.step(); });

    Evaluation final_eval = solver.evaluate_mean();
    if (final_eval.trajectory) {
      out.report = final_eval.report;
      out.valid = final_eval.report.valid;
      out.solution = std::move(final_eval.trajectory);
    } else {
      out.report = final_eval.report;
      out.valid = false;
    }
  }

  if (out.solution) out.short_horizon = sample_reference(*out.solution, 0.0, config.dt_mpc, config.plant_dt);
  out.elapsed_ms = ms_since(begin);
  return out;
}

MpcStepResult greedy_step(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const MpcTask& task,
                          const MpcStepResult* prev, const MpcConfig& config, const GreedyConfig& greedy,
                          std::uint64_t step_seed) {
  if (!(greedy.horizon > 0.0) || greedy.n_via < 1) throw std::invalid_argument("invalid greedy configuration");
  const auto begin = Clock::now();
  MpcStepResult out;
  const int d = task.dof();
  const BoundaryConditions bc{q, clamp_velocity(qd, task.limits), task.qT, task.qdT};
  if (try_direct(bc, task, config, out)) {
    out.short_horizon = sample_reference(*out.solution, 0.0, config.dt_mpc, config.plant_dt);
    out.elapsed_ms = ms_since(begin);
    return out;
  }

  const int n = greedy.n_via;
  const auto table = grid_table_for(n, d, config.grid);
  CostWeights weights = config.weights;
  weights.duration = 0.0;

  // Decision vector: n via-points followed by the free endpoint, stacked.
  auto decode = [&](const Eigen::VectorXd& x) {
    return std::pair<Eigen::MatrixXd, Eigen::VectorXd>{unstack_via(x.head(n * d), n, d), x.tail(d)};
  };
  auto evaluate = [&](const Eigen::VectorXd& x) {
    Evaluation e;
    auto [via, end] = decode(x);
    const BoundaryConditions local{bc.q0, bc.qd0, end, Eigen::VectorXd::Zero(d)};
    try {
      e.trajectory = synthesize(*table, via, local, task.limits);
    } catch (const InfeasibleError&) {
      e.report.valid = false;
      e.report.total = std::numeric_limits<double>::infinity();
      return e;
    }
    e.report = evaluate_total(*e.trajectory, weights, task.limits, task.checker, nullptr, config.grid);
    e.report.total += (end - task.qT).norm();
    const double over = e.trajectory->duration() - greedy.horizon;
    if (over > 0.0) {
      if (e.report.valid) e.report.total += weights.invalid_penalty;
      e.report.valid = false;
      e.report.total += over;
    }
    return e;
  };

  const double reach = 0.25 * greedy.horizon * task.limits.qd_max.cwiseMin(-task.limits.qd_min).minCoeff();
  Eigen::VectorXd mean(n * d + d);
  double sigma = 0.5 * reach;
  out.mode = MpcMode::Explore;
  if (prev != nullptr && prev->valid && prev->solution && prev->mode != MpcMode::Direct &&
      prev->solution->duration() > config.dt_mpc) {
    const Trajectory& p = *prev->solution;
    const double remaining = p.duration() - config.dt_mpc;
    for (int k = 1; k <= n; ++k) {
      const double s = static_cast<double>(k) / (n + 1);
      mean.segment(static_cast<Eigen::Index>(k - 1) * d, d) = p.position_at(config.dt_mpc + s * remaining);
    }
    mean.tail(d) = p.boundary().qT;
    sigma = 0.1 * reach;
    out.mode = MpcMode::WarmStart;
  } else {
    const Eigen::VectorXd delta = task.qT - q;
    const double dist = delta.norm();
    const Eigen::VectorXd end = dist > reach ? Eigen::VectorXd(q + delta * (reach / dist)) : task.qT;
    for (int k = 1; k <= n; ++k) {
      const double s = static_cast<double>(k) / (n + 1);
      mean.segment(static_cast<Eigen::Index>(k - 1) * d, d) = q + s * (end - q);
    }
    mean.tail(d) = end;
  }
  out.n_via = n;

  const SmoothnessPrior prior = SmoothnessPrior::identity(static_cast<int>(mean.size()));
  OptimizerState state = init_optimizer(mean, Eigen::VectorXd::Constant(mean.size(), sigma * sigma),
                                        config.mode, step_seed);
  run_budget(config, begin, out, [&] {
    const Eigen::MatrixXd candidates = sample_population(state, prior, config.pop_size);
    std::vector<double> costs(static_cast<std::size_t>(candidates.rows()));
    for (Eigen::Index m = 0; m < candidates.rows(); ++m) {
      costs[static_cast<std::size_t>(m)] = evaluate(candidates.row(m).transpose()).report.total;
    }
    update(state, prior, candidates, costs);
  });

  Evaluation final_eval = evaluate(state.mean);
  out.report = final_eval.report;
  out.valid = final_eval.trajectory.has_value() && final_eval.report.valid;
  if (final_eval.trajectory) {
    out.solution = std::move(final_eval.trajectory);
    out.short_horizon = sample_reference(*out.solution, 0.0, config.dt_mpc, config.plant_dt);
  }
  out.elapsed_ms = ms_since(begin);
  return out;
}

Episode run_closed_loop(const MpcTask& task, const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                        const MpcConfig& config_in, const PlantConfig& plant, int max_steps, Planner planner,
                        const GreedyConfig& greedy) {
  MpcConfig config = config_in;
  config.set_default_sigmas(q0, task.qT);
  config.validate();
  task.limits.validate();
  if (q0.size() != task.dof() || qd0.size() != task.dof() || task.qdT.size() != task.dof() ||
      task.limits.dof() != task.dof()) {
    throw DimensionMismatch("task, limits and initial state differ in dof");
  }
  if (plant.lag_tau < 0.0) throw std::invalid_argument("plant lag must be non-negative");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be non-negative");

  // Push tasks plan against a private copy of the world whose box moves.
  PushWorld push_world;
  PushContext push_ctx;
  MpcTask live = task;
  if (task.push != nullptr) {
    if (task.push->world == nullptr || task.dof() != 2) throw std::invalid_argument("push task needs a 2D world");
    push_world = *task.push->world;
    push_ctx = *task.push;
    push_ctx.world = &push_world;
    live.push = &push_ctx;
  }

  Episode ep;
  Eigen::VectorXd q = q0;
  Eigen::VectorXd qd = qd0;
  double t = 0.0;
  std::optional<MpcStepResult> prev;
  std::optional<Trajectory> last_valid;
  double last_valid_offset = 0.0;
  const auto ticks = static_cast<int>(std::lround(config.dt_mpc / config.plant_dt));

  auto at_goal = [&] {
    return (q - task.qT).norm() < kGoalTolerance && qd.norm() < kVelocityTolerance;
  };

  for (int k = 0; k < max_steps && !at_goal(); ++k) {
    for (const Disturbance& dist : plant.disturbances) {
      if (dist.step != k) continue;
      if (dist.dq.size() == q.size()) q += dist.dq;
      if (dist.dqd.size() == qd.size()) qd += dist.dqd;
    }

    const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(k));
    MpcStepResult res = planner == Planner::FullHorizon
                            ? mpc_step(q, qd, live, prev ? &*prev : nullptr, config, seed)
                            : greedy_step(q, qd, live, prev ? &*prev : nullptr, config, greedy, seed);

    EpisodeStep row{k, t, q, qd, res.mode, res.report.total, res.elapsed_ms, res.valid, res.iterations_run,
                    res.max_generation_ms};
    ep.steps.push_back(row);

    ShortHorizon ref;
    if (res.valid && res.solution) {
      ref = res.short_horizon;
      last_valid = res.solution;
      last_valid_offset = config.dt_mpc;
    } else if (last_valid && last_valid_offset < last_valid->duration()) {
      ref = sample_reference(*last_valid, last_valid_offset, config.dt_mpc, config.plant_dt);
      last_valid_offset += config.dt_mpc;
    } else {
      ref = hold_reference(q);
    }

    // Advance the plant over one MPC period.
    Eigen::VectorXd robot_prev = q;
    const auto last = static_cast<Eigen::Index>(ref.size()) - 1;
    for (int i = 1; i <= ticks; ++i) {
      const Eigen::Index idx = std::min<Eigen::Index>(i, last);
      const Eigen::VectorXd q_ref = ref.q.row(idx).transpose();
      const Eigen::VectorXd qd_ref = ref.qd.row(idx).transpose();
      if (plant.lag_tau > 0.0) {
        const double gain = 1.0 - std::exp(-config.plant_dt / plant.lag_tau);
        const Eigen::VectorXd next = q + gain * (q_ref - q);
        qd = (next - q) / config.plant_dt;
        q = next;
      } else {
        q = q_ref;
        qd = qd_ref;
      }
      if (live.push != nullptr) push_world.box = push_box(push_world, push_world.box, q, robot_prev);
      robot_prev = q;
    }
    t += config.dt_mpc;
    if (live.push != nullptr) ep.box.push_back(push_world.box);
    prev = std::move(res);
    ep.steps_run = k + 1;
  }

  ep.goal_reached = at_goal();
  ep.final_time = t;
  ep.final_q = q;
  ep.final_qd = qd;
  return ep;
}

}  // namespace vpsto
