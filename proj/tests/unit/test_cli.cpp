#include "experiments.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace vpsto::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = VPSTO_CONFIG_DIR;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("vpsto_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  return line;
}

int count_lines(const fs::path& p) {
  std::ifstream f(p);
  int n = 0;
  for (std::string line; std::getline(f, line);) ++n;
  return n;
}

fs::path write_config(const TempDir& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

const char* kSmallPlan = R"({
  "problem": { "q0": [-0.8, -0.05], "qT": [0.8, 0.05], "limits": { "qd_max": [1, 1], "qdd_max": [2, 2] } },
  "optimizer": { "n_via": 3, "pop_size": 16, "runs": 2, "seed": 5, "max_iterations": 30 },
  "world": { "type": "world2d", "bounds": { "min": [-1, -1], "max": [1, 1] },
             "disks": [ { "center": [0, 0], "radius": 0.3 } ] }
})";

const char* kSmallMpc = R"({
  "problem": { "q0": [-0.5, -0.2], "qT": [0.5, 0.3], "limits": { "qd_max": [1, 1], "qdd_max": [2, 2] } },
  "optimizer": { "pop_size": 16, "seed": 1 },
  "mpc": { "budget": "generations", "generations": 5, "max_steps": 60 }
})";

struct Outcome {
  int code;
  std::string err;
};

template <typename Cmd>
Outcome run(Cmd cmd, const fs::path& config, const RunOptions& opts) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cmd(config, opts, out, err);
  return {code, err.str()};
}

RunOptions quiet_in(const fs::path& dir) {
  RunOptions o;
  o.out_dir = dir;
  o.quiet = true;
  return o;
}

// Runs `cmd` twice into separate directories and compares every file.
template <typename Cmd>
void check_reproducible(Cmd cmd, const fs::path& config, RunOptions opts = {}) {
  TempDir a;
  TempDir b;
  std::ostringstream sink;
  opts.quiet = true;
  opts.out_dir = a.path();
  REQUIRE(cmd(config, opts, sink, sink) <= 1);
  opts.out_dir = b.path();
  REQUIRE(cmd(config, opts, sink, sink) <= 1);
  int files = 0;
  for (const auto& entry : fs::directory_iterator(a.path())) {
    CAPTURE(entry.path().filename().string());
    CHECK(read_file(entry.path()) == read_file(b.path() / entry.path().filename()));
    ++files;
  }
  CHECK(files > 0);
}

#ifdef VPSTO_CLI_PATH
int run_binary(const std::string& args) {
  const std::string command = std::string(VPSTO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("plan writes run and trajectory CSVs") {
  TempDir dir;
  const fs::path config = write_config(dir, "plan.json", kSmallPlan);
  const Outcome o = run(cmd_plan, config, quiet_in(dir.path()));
  CHECK(o.code == 0);
  CHECK(first_line(dir / "plan_runs.csv") == "seed,final_cost,T,valid,iterations");
  CHECK(count_lines(dir / "plan_runs.csv") == 3);
  CHECK(first_line(dir / "trajectory_5.csv") == "t,q0,q1,qd0,qd1,qdd0,qdd1");
  CHECK(count_lines(dir / "trajectory_6.csv") == 202);
}

TEST_CASE("plan exit codes") {
  TempDir dir;
  const Outcome bad = run(cmd_plan, write_config(dir, "bad.json", R"({"problem": {"q0": [0]}})"), quiet_in(dir.path()));
  CHECK(bad.code == 2);
  CHECK(bad.err.find("problem.qT") != std::string::npos);

  CHECK(run(cmd_plan, dir / "absent.json", quiet_in(dir.path())).code == 2);

  const Outcome unknown = run(cmd_plan, write_config(dir, "unknown.json", R"({
    "problem": { "q0": [0], "qT": [1], "limits": { "qd_max": [1], "qdd_max": [1] } },
    "optimizer": { "n_vias": 3 } })"), quiet_in(dir.path()));
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("optimizer.n_vias") != std::string::npos);

  // Goal inside an obstacle: every run ends invalid.
  const Outcome none_valid = run(cmd_plan, write_config(dir, "blocked.json", R"({
    "problem": { "q0": [-0.8, 0], "qT": [0, 0], "limits": { "qd_max": [1, 1], "qdd_max": [2, 2] } },
    "optimizer": { "n_via": 2, "runs": 2, "max_iterations": 10 },
    "world": { "type": "world2d", "bounds": { "min": [-1, -1], "max": [1, 1] },
               "disks": [ { "center": [0, 0], "radius": 0.2 } ] } })"), quiet_in(dir.path()));
  CHECK(none_valid.code == 1);

  const Outcome infeasible = run(cmd_plan, write_config(dir, "fast.json", R"({
    "problem": { "q0": [0], "qT": [1], "qd0": [2], "limits": { "qd_max": [1], "qdd_max": [1] } },
    "optimizer": { "n_via": 2, "max_iterations": 3 } })"), quiet_in(dir.path()));
  CHECK(infeasible.code == 1);
}

TEST_CASE("mpc writes episode and summary CSVs") {
  TempDir dir;
  const fs::path config = write_config(dir, "mpc.json", kSmallMpc);
  CHECK(run(cmd_mpc, config, quiet_in(dir.path())).code == 0);
  CHECK(first_line(dir / "episode.csv") == "step,t,q0,q1,qd0,qd1,mode,step_cost,step_ms,valid");
  CHECK(first_line(dir / "summary.csv") ==
        "planner,goal_reached,steps,final_time,goal_distance,final_speed,invalid_steps,direct_steps,max_step_ms,"
        "max_generation_ms");
  const std::string summary = read_file(dir / "summary.csv");
  CHECK(summary.find("full_horizon,true,") != std::string::npos);

  RunOptions greedy = quiet_in(dir.path());
  greedy.greedy = true;
  CHECK(run(cmd_mpc, config, greedy).code == 0);
  CHECK(read_file(dir / "summary.csv").find("greedy,") != std::string::npos);

  RunOptions disturbed = quiet_in(dir.path());
  disturbed.disturbances = {"step=2 dq=(0.1,0)"};
  CHECK(run(cmd_mpc, config, disturbed).code == 0);
  disturbed.disturbances = {"step=2 dq=(0.1)"};
  CHECK(run(cmd_mpc, config, disturbed).code == 2);

  CHECK(run(cmd_mpc, write_config(dir, "nompc.json", kSmallPlan), quiet_in(dir.path())).code == 2);
}

TEST_CASE("push episode reports the box error") {
  TempDir dir;
  const fs::path config = write_config(dir, "push.json", R"({
    "problem": { "q0": [-0.6, 0], "qT": [0, 0.5], "limits": { "qd_max": [1, 1], "qdd_max": [2, 2] } },
    "optimizer": { "pop_size": 16 },
    "world": { "type": "push", "bounds": { "min": [-1, -1], "max": [1, 1] },
               "box": [-0.2, 0], "target": [0.3, 0] },
    "mpc": { "generations": 5, "max_steps": 40 } })");
  CHECK(run(cmd_mpc, config, quiet_in(dir.path())).code <= 1);
  CHECK(first_line(dir / "summary.csv").find(",box_error") != std::string::npos);
}

TEST_CASE("ablation commands write their CSVs") {
  TempDir dir;
  const fs::path nvia = write_config(dir, "nvia.json", R"({
    "problem": { "q0": [0], "qT": [1], "limits": { "qd_max": [0.1], "qdd_max": [0.2] } },
    "optimizer": { "n_via": [1, 2], "runs": 2, "sigma": 0.1, "max_iterations": 50 } })");
  CHECK(run(cmd_ablate_nvia, nvia, quiet_in(dir.path())).code == 0);
  CHECK(first_line(dir / "ablate_nvia.csv") == "N,T_final,iterations");
  CHECK(count_lines(dir / "ablate_nvia.csv") == 3);

  const fs::path chol = write_config(dir, "chol.json", R"({
    "problem": { "q0": [-0.8, 0], "qT": [0.8, 0], "limits": { "qd_max": [1, 1], "qdd_max": [2, 2] } },
    "optimizer": { "n_via": 3, "runs": 2, "max_iterations": 10, "stop_on_convergence": false },
    "world": { "type": "world2d", "bounds": { "min": [-1, -1], "max": [1, 1] },
               "disks": [ { "center": [0, 0.1], "radius": 0.4 } ] } })");
  CHECK(run(cmd_ablate_cholesky, chol, quiet_in(dir.path())).code == 0);
  CHECK(first_line(dir / "ablate_chol.csv") == "setup,seed,iteration,best_cost,first_valid_iter");
  CHECK(count_lines(dir / "ablate_chol.csv") == 1 + 4 * 2 * 10);
  CHECK(read_file(dir / "ablate_chol.csv").find("\nsep_noL,1,10,") != std::string::npos);
}

TEST_CASE("identical config and seed give byte-identical CSV") {
  TempDir dir;
  check_reproducible(cmd_plan, write_config(dir, "plan.json", kSmallPlan));
  check_reproducible(cmd_mpc, write_config(dir, "mpc.json", kSmallMpc));
  RunOptions seeded;
  seeded.seed = 77;
  check_reproducible(cmd_plan, write_config(dir, "plan2.json", kSmallPlan), seeded);
}

#ifdef VPSTO_CLI_PATH
TEST_CASE("binary exit codes") {
  TempDir dir;
  const fs::path mpc = write_config(dir, "mpc.json", kSmallMpc);
  const std::string out = " --out-dir " + dir.path().string() + " --quiet";
  CHECK(run_binary("--help") == 0);
  CHECK(run_binary("") == 2);
  CHECK(run_binary("launch") == 2);
  CHECK(run_binary("plan " + (dir / "absent.json").string() + out) == 2);
  CHECK(run_binary("mpc " + mpc.string() + out) == 0);
  CHECK(run_binary("mpc " + mpc.string() + out + " --baseline greedy") == 0);
  CHECK(run_binary("mpc " + mpc.string() + out + " --baseline bogus") == 2);
  CHECK(run_binary("mpc " + mpc.string() + out + " --disturb 'step=1 dq=(0.1,0)'") == 0);
  CHECK(run_binary("mpc " + mpc.string() + out + " --disturb 'dq=(0.1,0)'") == 2);
  CHECK(run_binary("mpc " + mpc.string() + out + " --seed 3") == 0);
}
#endif

}  // TEST_SUITE
