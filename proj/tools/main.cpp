#include "experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Via-point stochastic trajectory optimization experiments"};
  app.require_subcommand(1);

  vpsto::cli::RunOptions opts;
  std::string config;
  std::uint64_t seed = 0;
  std::string baseline = "none";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "JSON experiment configuration")->required();
    sub->add_option("--seed", seed, "Base seed (overrides optimizer.seed)");
    sub->add_option("--out-dir", opts.out_dir, "Directory for CSV output");
    sub->add_flag("--quiet", opts.quiet, "Suppress the console summary");
  };

  CLI::App* plan = app.add_subcommand("plan", "Offline planning over seeded runs");
  CLI::App* mpc = app.add_subcommand("mpc", "Closed-loop MPC episode");
  CLI::App* nvia = app.add_subcommand("ablate-nvia", "Via-point count ablation");
  CLI::App* chol = app.add_subcommand("ablate-cholesky", "Covariance factorization ablation");
  for (CLI::App* sub : {plan, mpc, nvia, chol}) add_common(sub);
  mpc->add_option("--baseline", baseline, "Planner: none (full horizon) or greedy")
      ->check(CLI::IsMember({"none", "greedy"}));
  mpc->add_option("--disturb", opts.disturbances, "State disturbance, e.g. \"step=40 dq=(0.3,0)\"");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (CLI::App* sub : {plan, mpc, nvia, chol}) {
    if (sub->parsed() && sub->count("--seed") > 0) opts.seed = seed;
  }
  opts.greedy = baseline == "greedy";

  if (plan->parsed()) return vpsto::cli::cmd_plan(config, opts, std::cout, std::cerr);
  if (mpc->parsed()) return vpsto::cli::cmd_mpc(config, opts, std::cout, std::cerr);
  if (nvia->parsed()) return vpsto::cli::cmd_ablate_nvia(config, opts, std::cout, std::cerr);
  return vpsto::cli::cmd_ablate_cholesky(config, opts, std::cout, std::cerr);
}
