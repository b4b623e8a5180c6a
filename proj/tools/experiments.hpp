#pragma once

#include "vpsto/costs.hpp"
#include "vpsto/mpc.hpp"
#include "vpsto/spline.hpp"
#include "vpsto/timing.hpp"
#include "vpsto/vpsto.hpp"
#include "vpsto/worlds.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpsto::cli {

/// Invalid or unknown configuration entry; `key()` is the dotted path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class WorldType { None, World2D, Push };

struct WorldSpec {
  WorldType type = WorldType::None;
  std::optional<World2D> world;  // World2D and Push (push uses its bounds only)
  PushWorld push;
  double push_step_dt = 0.01;
};

struct OptimizerSpec {
  std::vector<int> n_via{5};
  int pop_size = 16;
  int runs = 1;
  std::uint64_t seed = 0;
  int max_iterations = 300;
  double max_seconds = 0.0;
  double sigma = 0.5;
  double tol = 1e-6;
  int grid = 50;
  CovarianceMode mode = CovarianceMode::Separable;
  bool smoothness_factor = true;
  bool stop_on_convergence = true;
};

struct MpcSpec {
  MpcConfig config;
  PlantConfig plant;
  GreedyConfig greedy;
  int max_steps = 200;
};

struct ExperimentConfig {
  BoundaryConditions bc;
  KinodynamicLimits limits;
  OptimizerSpec optimizer;
  CostWeights weights;
  WorldSpec world;
  std::optional<MpcSpec> mpc;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Parses "step=40 dq=(0.3,0)" with an optional "dqd=(..)".
Disturbance parse_disturbance(const std::string& text, int dof);

struct RunOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool greedy = false;
  std::vector<std::string> disturbances;
  bool quiet = false;
};

/// Task hooks derived from a config; owns the push context.
class TaskHooks {
 public:
  explicit TaskHooks(const ExperimentConfig& config);
  TaskHooks(const TaskHooks&) = delete;
  TaskHooks& operator=(const TaskHooks&) = delete;

  const CollisionChecker* checker() const { return checker_; }
  const PushContext* push() const { return push_ ? &*push_ : nullptr; }

 private:
  const CollisionChecker* checker_ = nullptr;
  std::optional<PushContext> push_;
};

VpstoProblem make_problem(const ExperimentConfig& config, const TaskHooks& hooks, int n_via,
                          std::uint64_t seed);

struct PlanRun {
  std::uint64_t seed = 0;
  SolveResult result;
};
std::vector<PlanRun> run_plan(const ExperimentConfig& config, std::uint64_t base_seed);

struct NviaRow {
  int n_via = 0;
  std::vector<double> durations;   // one per seed
  std::vector<int> iterations;     // one per seed
  std::vector<bool> converged;     // one per seed
  double median_duration = 0.0;
  double median_iterations = 0.0;
};
std::vector<NviaRow> run_ablate_nvia(const ExperimentConfig& config, std::uint64_t base_seed);

struct CholeskyRun {
  std::string setup;
  std::uint64_t seed = 0;
  std::vector<double> best_so_far;  // per generation, 1-based in CSV
  int first_valid = -1;
  double final_best = 0.0;
};
std::vector<CholeskyRun> run_ablate_cholesky(const ExperimentConfig& config, std::uint64_t base_seed);

Episode run_mpc(const ExperimentConfig& config, std::uint64_t seed, bool greedy,
                const std::vector<Disturbance>& extra = {});

// CSV writers. All numbers use the shortest round-trip form with '.' decimals.
std::string format_number(double value);
void write_plan_csv(const std::filesystem::path& dir, const std::vector<PlanRun>& runs);
void write_trajectory_csv(const std::filesystem::path& file, const Trajectory& traj, int samples = 201);
void write_episode_csv(const std::filesystem::path& file, const Episode& ep, bool record_timing);
void write_summary_csv(const std::filesystem::path& file, const Episode& ep, bool greedy, bool record_timing,
                       const ExperimentConfig& config);
void write_nvia_csv(const std::filesystem::path& file, const std::vector<NviaRow>& rows);
void write_cholesky_csv(const std::filesystem::path& file, const std::vector<CholeskyRun>& runs);

// Subcommands. Return the process exit code (0 ok, 1 experiment failure,
// 2 usage or configuration error).
int cmd_plan(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& out,
             std::ostream& err);
int cmd_mpc(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& out,
            std::ostream& err);
int cmd_ablate_nvia(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& out,
                    std::ostream& err);
int cmd_ablate_cholesky(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& out,
                        std::ostream& err);

double median(std::vector<double> values);

}  // namespace vpsto::cli
