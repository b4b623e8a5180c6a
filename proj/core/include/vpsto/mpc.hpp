#pragma once

#include "vpsto/costs.hpp"
#include "vpsto/optimizer.hpp"
#include "vpsto/spline.hpp"
#include "vpsto/timing.hpp"
#include "vpsto/vpsto.hpp"
#include "vpsto/worlds.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vpsto {

enum class MpcMode { Direct, WarmStart, Explore };
std::string to_string(MpcMode mode);

/// How long each step may optimize. `WallClock` runs generations while the
/// step's elapsed time is below dt_mpc; `Generations` runs a fixed count and
/// is fully deterministic.
enum class BudgetMode { WallClock, Generations };

struct MpcConfig {
  double dt_mpc = 0.08;
  double plant_dt = 1e-3;  // resolution of the short-horizon reference
  double t_stop = 0.5;
  int n_max = 4;
  double alpha = 2.0;
  int pop_size = 32;
  PhaseGrid grid{50};
  double explore_sigma = 0.0;
  double warmstart_sigma = 0.0;
  CostWeights weights;
  std::uint64_t seed = 0;
  CovarianceMode mode = CovarianceMode::Separable;
  BudgetMode budget = BudgetMode::WallClock;
  int generations = 20;  // per step, Generations budget only

  double rate() const { return 1.0 / dt_mpc; }
  void validate() const;
  /// Fills unset sigmas with 0.5 and 0.05 times |qT - q0|.
  void set_default_sigmas(const Eigen::VectorXd& q0, const Eigen::VectorXd& qT);
};

/// Static part of the task an MPC step plans against.
struct MpcTask {
  Eigen::VectorXd qT;
  Eigen::VectorXd qdT;
  KinodynamicLimits limits;
  const CollisionChecker* checker = nullptr;
  const PushContext* push = nullptr;

  int dof() const { return static_cast<int>(qT.size()); }
};

/// Reference sampled at plant resolution: t = 0, dt, ..., min(dt_mpc, T).
struct ShortHorizon {
  std::vector<double> t;
  Eigen::MatrixXd q;
  Eigen::MatrixXd qd;
  Eigen::MatrixXd qdd;

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
  double duration() const { return t.empty() ? 0.0 : t.back(); }
};

ShortHorizon extract_short_horizon(const Trajectory& traj, double dt_mpc, double plant_dt);

struct MpcStepResult {
  std::optional<Trajectory> solution;
  bool valid = false;
  MpcMode mode = MpcMode::Explore;
  int iterations_run = 0;
  int n_via = 0;
  CostReport report;
  ShortHorizon short_horizon;  // empty iff solution is empty
  double elapsed_ms = 0.0;
  double max_generation_ms = 0.0;
};

/// The no-via-point cubic between the two states at its minimal duration.
Trajectory direct_trajectory(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& qT,
                             const Eigen::VectorXd& qdT, const KinodynamicLimits& limits,
                             const PhaseGrid& grid);

/// max(1, min(ceil(alpha * T), n_max))
int select_n_via(double duration, double alpha, int n_max);

struct InitGuess {
  Eigen::VectorXd mean;
  double sigma_scale = 0.0;
  int n_via = 0;
};

/// Shifts `prev` forward by `elapsed` and resamples its tail at the via phases
/// of the new via count. Throws ExpiredError if nothing remains of `prev`.
InitGuess warm_start(const Trajectory& prev, double elapsed, const BoundaryConditions& new_bc, double alpha,
                     int n_max, double warmstart_sigma);

InitGuess explore_init(const BoundaryConditions& bc, int n_max, double explore_sigma);

/// One online step: accept the direct trajectory if it is valid and shorter
/// than T_stop, otherwise warm-start (if `prev` is valid) or explore, and
/// optimize within the budget. `step_seed` seeds this step's sampler.
MpcStepResult mpc_step(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const MpcTask& task,
                       const MpcStepResult* prev, const MpcConfig& config, std::uint64_t step_seed);

/// Short-horizon baseline: optimizes via-points and a free endpoint that must
/// be reached within `horizon` seconds, minimizing the endpoint's distance to
/// the goal. Uses the same direct-trajectory stopping rule and budget.
struct GreedyConfig {
  double horizon = 0.5;
  int n_via = 2;
};

MpcStepResult greedy_step(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const MpcTask& task,
                          const MpcStepResult* prev, const MpcConfig& config, const GreedyConfig& greedy,
                          std::uint64_t step_seed);

struct Disturbance {
  int step = 0;
  Eigen::VectorXd dq;
  Eigen::VectorXd dqd;  // may be empty
};

struct PlantConfig {
  double lag_tau = 0.0;  // 0 tracks the reference exactly
  std::vector<Disturbance> disturbances;
};

enum class Planner { FullHorizon, Greedy };

struct EpisodeStep {
  int step = 0;
  double t = 0.0;
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  MpcMode mode = MpcMode::Explore;
  double step_cost = 0.0;
  double step_ms = 0.0;
  bool valid = false;
  int iterations = 0;
  double max_generation_ms = 0.0;
};

struct Episode {
  std::vector<EpisodeStep> steps;
  bool goal_reached = false;
  int steps_run = 0;
  double final_time = 0.0;
  Eigen::VectorXd final_q;
  Eigen::VectorXd final_qd;
  std::vector<Eigen::Vector2d> box;  // box position after each step, push tasks only
};

inline constexpr double kGoalTolerance = 1e-3;
inline constexpr double kVelocityTolerance = 1e-3;

/// Steps the planner at 1 / dt_mpc and moves the plant along each step's
/// short-horizon reference until the goal is reached or `max_steps` run out.
/// If a step finds no valid solution the plant continues on the previous valid
/// solution, or holds position when none remains. Push tasks advance the box
/// along the executed motion and plan against the current box position.
Episode run_closed_loop(const MpcTask& task, const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                        const MpcConfig& config, const PlantConfig& plant, int max_steps,
                        Planner planner = Planner::FullHorizon, const GreedyConfig& greedy = {});

}  // namespace vpsto
