#include "experiments.hpp"

#include "vpsto/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

namespace vpsto::cli {

namespace {

using nlohmann::json;
constexpr double kInf = std::numeric_limits<double>::infinity();

// JSON object view that records which keys were read so unknown keys can be
// reported with their full path.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    if (!has(key)) throw ConfigError(key_path(key), "missing required key");
    return j_.at(key);
  }

  Section section(const std::string& key) { return Section(raw(key), key_path(key)); }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(key_path(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(key_path(key), "expected a finite number");
    return x;
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
    return v.get<int>();
  }
  int integer(const std::string& key, int fallback) { return has(key) ? integer(key) : fallback; }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) throw ConfigError(key_path(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(key_path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(key_path(key), "expected a string");
    return v.get<std::string>();
  }

  Eigen::VectorXd vector(const std::string& key, int dim = -1) {
    return to_vector(raw(key), key_path(key), dim);
  }
  Eigen::VectorXd vector(const std::string& key, const Eigen::VectorXd& fallback) {
    return has(key) ? vector(key, static_cast<int>(fallback.size())) : fallback;
  }

  static Eigen::VectorXd to_vector(const json& v, const std::string& where, int dim) {
    if (!v.is_array() || v.empty()) throw ConfigError(where, "expected a non-empty array of numbers");
    if (dim >= 0 && static_cast<int>(v.size()) != dim) {
      throw ConfigError(where, "expected " + std::to_string(dim) + " entries");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(where, "expected a non-empty array of numbers");
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Eigen::Vector2d vec2(Section& s, const std::string& key) { return s.vector(key, 2); }

Rect parse_rect(const json& j, const std::string& path) {
  Section s(j, path);
  Rect r{vec2(s, "min"), vec2(s, "max")};
  s.finish();
  if (!(r.min.array() < r.max.array()).all()) throw ConfigError(path, "rectangle min must be below max");
  return r;
}

WorldSpec parse_world(Section s) {
  WorldSpec w;
  const std::string type = s.string("type", "none");
  if (type == "none") {
    w.type = WorldType::None;
  } else if (type == "world2d" || type == "push") {
    w.type = type == "push" ? WorldType::Push : WorldType::World2D;
    const Rect bounds = parse_rect(s.raw("bounds"), s.key_path("bounds"));
    const double robot_radius = s.number("robot_radius", 0.05);
    std::vector<Disk> disks;
    std::vector<Rect> rects;
    if (s.has("disks")) {
      const json& arr = s.raw("disks");
      if (!arr.is_array()) throw ConfigError(s.key_path("disks"), "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Section d(arr[i], s.key_path("disks") + "[" + std::to_string(i) + "]");
        Disk disk{vec2(d, "center"), d.number("radius")};
        d.finish();
        if (!(disk.radius > 0.0)) throw ConfigError(d.key_path("radius"), "must be positive");
        disks.push_back(disk);
      }
    }
    if (s.has("rects")) {
      const json& arr = s.raw("rects");
      if (!arr.is_array()) throw ConfigError(s.key_path("rects"), "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        rects.push_back(parse_rect(arr[i], s.key_path("rects") + "[" + std::to_string(i) + "]"));
      }
    }
    if (robot_radius < 0.0) throw ConfigError(s.key_path("robot_radius"), "must be non-negative");
    w.world.emplace(bounds, robot_radius, std::move(disks), std::move(rects));
    if (w.type == WorldType::Push) {
      w.push.bounds = bounds;
      w.push.robot_radius = robot_radius;
      w.push.box = vec2(s, "box");
      w.push.box_radius = s.number("box_radius", 0.1);
      w.push.target = vec2(s, "target");
      w.push_step_dt = s.number("push_step_dt", 0.01);
      if (!(w.push.box_radius > 0.0)) throw ConfigError(s.key_path("box_radius"), "must be positive");
      if (!(w.push_step_dt > 0.0)) throw ConfigError(s.key_path("push_step_dt"), "must be positive");
    }
  } else {
    throw ConfigError(s.key_path("type"), "expected one of none, world2d, push");
  }
  s.finish();
  return w;
}

CostWeights parse_weights(Section s) {
  CostWeights w;
  w.duration = s.number("duration", w.duration);
  w.smoothness = s.number("smoothness", w.smoothness);
  w.joint_limits = s.number("joint_limits", w.joint_limits);
  w.collision = s.number("collision", w.collision);
  w.push = s.number("push", w.push);
  w.invalid_penalty = s.number("invalid_penalty", w.invalid_penalty);
  s.finish();
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.path(), e.what());
  }
  return w;
}

CovarianceMode parse_mode(Section& s, const std::string& key, CovarianceMode fallback) {
  if (!s.has(key)) return fallback;
  const std::string m = s.string(key, "");
  if (m == "sep") return CovarianceMode::Separable;
  if (m == "full") return CovarianceMode::Full;
  throw ConfigError(s.key_path(key), "expected sep or full");
}

OptimizerSpec parse_optimizer(Section s) {
  OptimizerSpec o;
  if (s.has("n_via")) {
    const json& v = s.raw("n_via");
    if (v.is_number_integer()) {
      o.n_via = {v.get<int>()};
    } else if (v.is_array() && !v.empty()) {
      o.n_via.clear();
      for (const json& x : v) {
        if (!x.is_number_integer()) throw ConfigError(s.key_path("n_via"), "expected integers");
        o.n_via.push_back(x.get<int>());
      }
    } else {
      throw ConfigError(s.key_path("n_via"), "expected an integer or an array of integers");
    }
    for (int n : o.n_via) {
      if (n < 1) throw ConfigError(s.key_path("n_via"), "via count must be at least 1");
    }
  }
  o.pop_size = s.integer("pop_size", o.pop_size);
  o.runs = s.integer("runs", o.runs);
  o.seed = s.unsigned_integer("seed", o.seed);
  o.max_iterations = s.integer("max_iterations", o.max_iterations);
  o.max_seconds = s.number("max_seconds", o.max_seconds);
  o.sigma = s.number("sigma", o.sigma);
  o.tol = s.number("tol", o.tol);
  o.grid = s.integer("grid", o.grid);
  o.mode = parse_mode(s, "mode", o.mode);
  o.smoothness_factor = s.boolean("smoothness_factor", o.smoothness_factor);
  o.stop_on_convergence = s.boolean("stop_on_convergence", o.stop_on_convergence);
  s.finish();
  if (o.pop_size < 4) throw ConfigError(s.key_path("pop_size"), "must be at least 4");
  if (o.runs < 1) throw ConfigError(s.key_path("runs"), "must be at least 1");
  if (o.max_iterations < 1) throw ConfigError(s.key_path("max_iterations"), "must be at least 1");
  if (o.max_seconds < 0.0) throw ConfigError(s.key_path("max_seconds"), "must be non-negative");
  if (!(o.sigma > 0.0)) throw ConfigError(s.key_path("sigma"), "must be positive");
  if (!(o.tol >= 0.0)) throw ConfigError(s.key_path("tol"), "must be non-negative");
  if (o.grid < 2) throw ConfigError(s.key_path("grid"), "must be at least 2");
  return o;
}

MpcSpec parse_mpc(Section s, int dof) {
  MpcSpec m;
  MpcConfig& c = m.config;
  c.dt_mpc = s.number("dt_mpc", c.dt_mpc);
  c.plant_dt = s.number("plant_dt", c.plant_dt);
  c.t_stop = s.number("t_stop", c.t_stop);
  c.alpha = s.number("alpha", c.alpha);
  c.n_max = s.integer("n_max", c.n_max);
  c.explore_sigma = s.number("explore_sigma", 0.0);
  c.warmstart_sigma = s.number("warmstart_sigma", 0.0);
  const std::string budget = s.string("budget", "generations");
  if (budget == "wallclock") {
    c.budget = BudgetMode::WallClock;
  } else if (budget == "generations") {
    c.budget = BudgetMode::Generations;
  } else {
    throw ConfigError(s.key_path("budget"), "expected wallclock or generations");
  }
  c.generations = s.integer("generations", c.generations);
  m.max_steps = s.integer("max_steps", m.max_steps);
  m.plant.lag_tau = s.number("lag_tau", 0.0);
  m.greedy.horizon = s.number("greedy_horizon", m.greedy.horizon);
  m.greedy.n_via = s.integer("greedy_n_via", m.greedy.n_via);
  if (s.has("disturbances")) {
    const json& arr = s.raw("disturbances");
    if (!arr.is_array()) throw ConfigError(s.key_path("disturbances"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section d(arr[i], s.key_path("disturbances") + "[" + std::to_string(i) + "]");
      Disturbance dist;
      dist.step = d.integer("step");
      dist.dq = d.vector("dq", dof);
      if (d.has("dqd")) dist.dqd = d.vector("dqd", dof);
      d.finish();
      if (dist.step < 0) throw ConfigError(d.key_path("step"), "must be non-negative");
      m.plant.disturbances.push_back(dist);
    }
  }
  s.finish();
  auto positive = [&](double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(s.key_path(key), "must be positive");
  };
  positive(c.dt_mpc, "dt_mpc");
  positive(c.plant_dt, "plant_dt");
  positive(c.t_stop, "t_stop");
  positive(c.alpha, "alpha");
  positive(m.greedy.horizon, "greedy_horizon");
  if (c.plant_dt > c.dt_mpc) throw ConfigError(s.key_path("plant_dt"), "must not exceed dt_mpc");
  if (c.n_max < 1) throw ConfigError(s.key_path("n_max"), "must be at least 1");
  if (c.generations < 1) throw ConfigError(s.key_path("generations"), "must be at least 1");
  if (m.max_steps < 1) throw ConfigError(s.key_path("max_steps"), "must be at least 1");
  if (m.plant.lag_tau < 0.0) throw ConfigError(s.key_path("lag_tau"), "must be non-negative");
  if (m.greedy.n_via < 1) throw ConfigError(s.key_path("greedy_n_via"), "must be at least 1");
  if (c.explore_sigma < 0.0) throw ConfigError(s.key_path("explore_sigma"), "must be positive");
  if (c.warmstart_sigma < 0.0) throw ConfigError(s.key_path("warmstart_sigma"), "must be positive");
  return m;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::ofstream open_csv(const std::filesystem::path& file) {
  std::ofstream f(file, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + file.string());
  return f;
}

std::string header_columns(const std::string& prefix, int dof) {
  std::string out;
  for (int i = 0; i < dof; ++i) out += "," + prefix + std::to_string(i);
  return out;
}

std::string row_values(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += "," + format_number(v(i));
  return out;
}

// Two-sided statistics used only for console summaries.
double median_int(const std::vector<int>& v) {
  std::vector<double> d(v.begin(), v.end());
  return median(d);
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  Section s(root, "");
  ExperimentConfig cfg;

  cfg.world = s.has("world") ? parse_world(s.section("world")) : WorldSpec{};

  Section p = s.section("problem");
  const Eigen::VectorXd q0 = p.vector("q0");
  const int dof = static_cast<int>(q0.size());
  cfg.bc.q0 = q0;
  cfg.bc.qT = p.vector("qT", dof);
  cfg.bc.qd0 = p.vector("qd0", Eigen::VectorXd::Zero(dof));
  cfg.bc.qdT = p.vector("qdT", Eigen::VectorXd::Zero(dof));
  {
    Section l = p.section("limits");
    const Eigen::VectorXd qd_max = l.vector("qd_max", dof);
    const Eigen::VectorXd qdd_max = l.vector("qdd_max", dof);
    cfg.limits.qd_max = qd_max;
    cfg.limits.qdd_max = qdd_max;
    cfg.limits.qd_min = l.vector("qd_min", Eigen::VectorXd(-qd_max));
    cfg.limits.qdd_min = l.vector("qdd_min", Eigen::VectorXd(-qdd_max));
    Eigen::VectorXd q_min = Eigen::VectorXd::Constant(dof, -kInf);
    Eigen::VectorXd q_max = Eigen::VectorXd::Constant(dof, kInf);
    if (cfg.world.world && dof == 2) {
      q_min = cfg.world.world->q_min();
      q_max = cfg.world.world->q_max();
    }
    cfg.limits.q_min = l.vector("q_min", q_min);
    cfg.limits.q_max = l.vector("q_max", q_max);
    l.finish();
    try {
      cfg.limits.validate();
    } catch (const std::exception& e) {
      throw ConfigError(l.path(), e.what());
    }
  }
  p.finish();
  try {
    cfg.bc.validate();
  } catch (const std::exception& e) {
    throw ConfigError("problem", e.what());
  }
  if (cfg.world.type != WorldType::None && dof != 2) throw ConfigError("world.type", "2D worlds need a 2-DoF problem");

  if (s.has("optimizer")) cfg.optimizer = parse_optimizer(s.section("optimizer"));
  if (s.has("costs")) cfg.weights = parse_weights(s.section("costs"));
  if (s.has("mpc")) cfg.mpc = parse_mpc(s.section("mpc"), dof);
  s.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("<file>", "cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

Disturbance parse_disturbance(const std::string& text, int dof) {
  static const std::regex step_re(R"(step\s*=\s*(\d+))");
  static const std::regex vec_re(R"((dqd|dq)\s*=\s*\(([^)]*)\))");
  Disturbance d;
  std::smatch m;
  if (!std::regex_search(text, m, step_re)) throw ConfigError("--disturb", "missing step=<index>");
  d.step = std::stoi(m[1].str());
  for (auto it = std::sregex_iterator(text.begin(), text.end(), vec_re); it != std::sregex_iterator(); ++it) {
    std::vector<double> vals;
    std::stringstream items((*it)[2].str());
    std::string item;
    while (std::getline(items, item, ',')) {
      double x = 0.0;
      const auto first = item.find_first_not_of(' ');
      const auto last = item.find_last_not_of(' ');
      if (first == std::string::npos) throw ConfigError("--disturb", "empty vector entry");
      const std::string trimmed = item.substr(first, last - first + 1);
      const auto res = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), x);
      if (res.ec != std::errc() || res.ptr != trimmed.data() + trimmed.size()) {
        throw ConfigError("--disturb", "cannot parse number '" + trimmed + "'");
      }
      vals.push_back(x);
    }
    if (static_cast<int>(vals.size()) != dof) {
      throw ConfigError("--disturb", "vector needs " + std::to_string(dof) + " entries");
    }
    const Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(vals.data(), dof);
    ((*it)[1].str() == "dq" ? d.dq : d.dqd) = v;
  }
  if (d.dq.size() == 0) throw ConfigError("--disturb", "missing dq=(...)");
  return d;
}

TaskHooks::TaskHooks(const ExperimentConfig& config) {
  if (config.world.world) checker_ = &*config.world.world;
  if (config.world.type == WorldType::Push) {
    push_ = PushContext{&config.world.push, config.world.push.target, config.world.push_step_dt};
  }
}

VpstoProblem make_problem(const ExperimentConfig& config, const TaskHooks& hooks, int n_via,
                          std::uint64_t seed) {
  const OptimizerSpec& o = config.optimizer;
  VpstoProblem p;
  p.bc = config.bc;
  p.limits = config.limits;
  p.n_via = n_via;
  p.pop_size = o.pop_size;
  p.grid = PhaseGrid(o.grid);
  p.weights = config.weights;
  p.checker = hooks.checker();
  p.push = hooks.push();
  p.max_iterations = o.max_iterations;
  p.max_seconds = o.max_seconds;
  p.tol = o.tol;
  p.stop_on_convergence = o.stop_on_convergence;
  p.seed = seed;
  p.mode = o.mode;
  p.smoothness_factor = o.smoothness_factor;
  return p;
}

std::vector<PlanRun> run_plan(const ExperimentConfig& config, std::uint64_t base_seed) {
  if (config.optimizer.n_via.size() != 1) throw ConfigError("optimizer.n_via", "plan needs a single via count");
  const TaskHooks hooks(config);
  const int n = config.optimizer.n_via.front();
  std::vector<PlanRun> runs;
  for (int i = 0; i < config.optimizer.runs; ++i) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    const VpstoProblem problem = make_problem(config, hooks, n, seed);
    runs.push_back({seed, solve(problem, straight_line_init(config.bc, n), config.optimizer.sigma)});
  }
  return runs;
}

std::vector<NviaRow> run_ablate_nvia(const ExperimentConfig& config, std::uint64_t base_seed) {
  const TaskHooks hooks(config);
  std::vector<NviaRow> rows;
  for (int n : config.optimizer.n_via) {
    NviaRow row;
    row.n_via = n;
    for (int i = 0; i < config.optimizer.runs; ++i) {
      const VpstoProblem problem = make_problem(config, hooks, n, base_seed + static_cast<std::uint64_t>(i));
      const SolveResult r = solve(problem, straight_line_init(config.bc, n), config.optimizer.sigma);
      row.durations.push_back(r.trajectory.duration());
      row.iterations.push_back(r.iterations);
      row.converged.push_back(r.converged);
    }
    row.median_duration = median(row.durations);
    row.median_iterations = median_int(row.iterations);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CholeskyRun> run_ablate_cholesky(const ExperimentConfig& config, std::uint64_t base_seed) {
  if (config.optimizer.n_via.size() != 1) {
    throw ConfigError("optimizer.n_via", "ablate-cholesky needs a single via count");
  }
  const TaskHooks hooks(config);
  const int n = config.optimizer.n_via.front();
  struct Setup {
    const char* name;
    CovarianceMode mode;
    bool factor;
  };
  const Setup setups[] = {{"cma_L", CovarianceMode::Full, true},
                          {"sep_L", CovarianceMode::Separable, true},
                          {"cma_noL", CovarianceMode::Full, false},
                          {"sep_noL", CovarianceMode::Separable, false}};
  std::vector<CholeskyRun> runs;
  for (const Setup& setup : setups) {
    for (int i = 0; i < config.optimizer.runs; ++i) {
      const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
      VpstoProblem problem = make_problem(config, hooks, n, seed);
      problem.mode = setup.mode;
      problem.smoothness_factor = setup.factor;
      const SolveResult r = solve(problem, straight_line_init(config.bc, n), config.optimizer.sigma);
      CholeskyRun run{setup.name, seed, r.best_so_far, r.first_valid_generation,
                      r.best_so_far.empty() ? kInf : r.best_so_far.back()};
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

Episode run_mpc(const ExperimentConfig& config, std::uint64_t seed, bool greedy,
                const std::vector<Disturbance>& extra) {
  if (!config.mpc) throw ConfigError("mpc", "missing required section");
  const TaskHooks hooks(config);
  MpcSpec spec = *config.mpc;
  spec.config.seed = seed;
  spec.config.pop_size = config.optimizer.pop_size;
  spec.config.grid = PhaseGrid(config.optimizer.grid);
  spec.config.weights = config.weights;
  spec.config.mode = config.optimizer.mode;
  spec.plant.disturbances.insert(spec.plant.disturbances.end(), extra.begin(), extra.end());
  MpcTask task{config.bc.qT, config.bc.qdT, config.limits, hooks.checker(), hooks.push()};
  return run_closed_loop(task, config.bc.q0, config.bc.qd0, spec.config, spec.plant, spec.max_steps,
                         greedy ? Planner::Greedy : Planner::FullHorizon, spec.greedy);
}

void write_plan_csv(const std::filesystem::path& dir, const std::vector<PlanRun>& runs) {
  auto f = open_csv(dir / "plan_runs.csv");
  f << "seed,final_cost,T,valid,iterations\n";
  for (const PlanRun& r : runs) {
    f << r.seed << ',' << format_number(r.result.report.total) << ','
      << format_number(r.result.trajectory.duration()) << ',' << bool_str(r.result.report.valid) << ','
      << r.result.iterations << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& file, const Trajectory& traj, int samples) {
  auto f = open_csv(file);
  const int d = traj.dof();
  f << "t" << header_columns("q", d) << header_columns("qd", d) << header_columns("qdd", d) << '\n';
  const int count = traj.degenerate() ? 1 : samples;
  for (int k = 0; k < count; ++k) {
    const double s = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    f << format_number(s * traj.duration()) << row_values(traj.position(s)) << row_values(traj.velocity(s))
      << row_values(traj.acceleration(s)) << '\n';
  }
}

void write_episode_csv(const std::filesystem::path& file, const Episode& ep, bool record_timing) {
  auto f = open_csv(file);
  const int d = ep.final_q.size();
  f << "step,t" << header_columns("q", d) << header_columns("qd", d) << ",mode,step_cost,step_ms,valid\n";
  for (const EpisodeStep& s : ep.steps) {
    f << s.step << ',' << format_number(s.t) << row_values(s.q) << row_values(s.qd) << ',' << to_string(s.mode)
      << ',' << format_number(s.step_cost) << ',' << format_number(record_timing ? s.step_ms : 0.0) << ','
      << bool_str(s.valid) << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& file, const Episode& ep, bool greedy, bool record_timing,
                       const ExperimentConfig& config) {
  int invalid = 0;
  int direct = 0;
  double max_step = 0.0;
  double max_gen = 0.0;
  for (const EpisodeStep& s : ep.steps) {
    invalid += !s.valid;
    direct += s.mode == MpcMode::Direct;
    max_step = std::max(max_step, s.step_ms);
    max_gen = std::max(max_gen, s.max_generation_ms);
  }
  if (!record_timing) max_step = max_gen = 0.0;
  auto f = open_csv(file);
  f << "planner,goal_reached,steps,final_time,goal_distance,final_speed,invalid_steps,direct_steps,"
       "max_step_ms,max_generation_ms";
  const bool push = !ep.box.empty();
  if (push) f << ",box_error";
  f << '\n';
  f << (greedy ? "greedy" : "full_horizon") << ',' << bool_str(ep.goal_reached) << ',' << ep.steps_run << ','
    << format_number(ep.final_time) << ',' << format_number((ep.final_q - config.bc.qT).norm()) << ','
    << format_number(ep.final_qd.norm()) << ',' << invalid << ',' << direct << ',' << format_number(max_step)
    << ',' << format_number(max_gen);
  if (push) f << ',' << format_number((ep.box.back() - config.world.push.target).norm());
  f << '\n';
}

void write_nvia_csv(const std::filesystem::path& file, const std::vector<NviaRow>& rows) {
  auto f = open_csv(file);
  f << "N,T_final,iterations\n";
  for (const NviaRow& r : rows) {
    f << r.n_via << ',' << format_number(r.median_duration) << ',' << format_number(r.median_iterations) << '\n';
  }
}

void write_cholesky_csv(const std::filesystem::path& file, const std::vector<CholeskyRun>& runs) {
  auto f = open_csv(file);
  f << "setup,seed,iteration,best_cost,first_valid_iter\n";
  for (const CholeskyRun& r : runs) {
    for (std::size_t j = 0; j < r.best_so_far.size(); ++j) {
      f << r.setup << ',' << r.seed << ',' << j + 1 << ',' << format_number(r.best_so_far[j]) << ','
        << r.first_valid << '\n';
    }
  }
}

namespace {

// Shared prologue: load the config and prepare the output directory.
template <typename Body>
int run_command(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& err,
                Body&& body) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  }
  try {
    std::filesystem::create_directories(opts.out_dir);
    return body(config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int cmd_plan(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& out,
             std::ostream& err) {
  return run_command(config_path, opts, err, [&](const ExperimentConfig& config) {
    const std::uint64_t base = opts.seed.value_or(config.optimizer.seed);
    const std::vector<PlanRun> runs = run_plan(config, base);
    write_plan_csv(opts.out_dir, runs);
    int valid = 0;
    for (const PlanRun& r : runs) {
      valid += r.result.report.valid;
      write_trajectory_csv(opts.out_dir / ("trajectory_" + std::to_string(r.seed) + ".csv"), r.result.trajectory);
    }
    if (!opts.quiet) out << "plan: " << valid << "/" << runs.size() << " runs valid\n";
    return valid > 0 ? 0 : 1;
  });
}

int cmd_mpc(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& out,
            std::ostream& err) {
  return run_command(config_path, opts, err, [&](const ExperimentConfig& config) {
    if (!config.mpc) throw ConfigError("mpc", "missing required section");
    std::vector<Disturbance> extra;
    for (const std::string& d : opts.disturbances) extra.push_back(parse_disturbance(d, config.bc.dof()));
    const std::uint64_t seed = opts.seed.value_or(config.optimizer.seed);
    const Episode ep = run_mpc(config, seed, opts.greedy, extra);
    const bool timing = config.mpc->config.budget == BudgetMode::WallClock;
    write_episode_csv(opts.out_dir / "episode.csv", ep, timing);
    write_summary_csv(opts.out_dir / "summary.csv", ep, opts.greedy, timing, config);
    if (!opts.quiet) {
      out << "mpc (" << (opts.greedy ? "greedy" : "full horizon") << "): goal "
          << (ep.goal_reached ? "reached" : "not reached") << " after " << ep.steps_run << " steps\n";
    }
    // A greedy baseline that stalls is an expected outcome, not a failure.
    return ep.goal_reached || opts.greedy ? 0 : 1;
  });
}

int cmd_ablate_nvia(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& out,
                    std::ostream& err) {
  return run_command(config_path, opts, err, [&](const ExperimentConfig& config) {
    const std::vector<NviaRow> rows = run_ablate_nvia(config, opts.seed.value_or(config.optimizer.seed));
    write_nvia_csv(opts.out_dir / "ablate_nvia.csv", rows);
    if (!opts.quiet) {
      for (const NviaRow& r : rows) {
        out << "N=" << r.n_via << " median T=" << format_number(r.median_duration)
            << " median iterations=" << format_number(r.median_iterations) << '\n';
      }
    }
    return 0;
  });
}

int cmd_ablate_cholesky(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& out,
                        std::ostream& err) {
  return run_command(config_path, opts, err, [&](const ExperimentConfig& config) {
    const std::vector<CholeskyRun> runs = run_ablate_cholesky(config, opts.seed.value_or(config.optimizer.seed));
    write_cholesky_csv(opts.out_dir / "ablate_chol.csv", runs);
    if (!opts.quiet) {
      for (const char* setup : {"cma_L", "sep_L", "cma_noL", "sep_noL"}) {
        std::vector<double> first;
        std::vector<double> final_cost;
        for (const CholeskyRun& r : runs) {
          if (r.setup != setup) continue;
          first.push_back(r.first_valid < 0 ? kInf : r.first_valid);
          final_cost.push_back(r.final_best);
        }
        out << setup << ": median first valid iteration " << format_number(median(first))
            << ", median final cost " << format_number(median(final_cost)) << '\n';
      }
    }
    return 0;
  });
}

}  // namespace vpsto::cli
