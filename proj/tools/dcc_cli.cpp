#include <CLI11.hpp>
#include <iostream>

#include "dcc/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Carbon-aware data center cluster simulator"};
  app.set_version_flag("--version", dcc::kVersion);
  app.require_subcommand(1);

  dcc::SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run one episode with a fixed controller");
  simulate->add_option("config", sim.scenario, "Scenario JSON")->required();
  simulate->add_option("--seed", sim.seed, "Episode seed");
  simulate->add_option("--out", sim.out_dir, "Output directory")->required();
  simulate->add_option("--controller", sim.controller, "baseline or greedy");

  dcc::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train and evaluate one configuration");
  train_cmd->add_option("config", train.scenario, "Scenario JSON")->required();
  train_cmd->add_option("--configuration", train.configuration,
                        "baseline, top_only, top_plus_pretrained_low or joint_hrl");
  train_cmd->add_option("--algo", train.algo, "ppo or a2c");
  train_cmd->add_option("--seeds", train.seeds, "Seed list, e.g. 1,2,3 or 1-10");
  train_cmd->add_option("--total-steps", train.total_steps, "Env steps per training phase");
  train_cmd->add_option("--out", train.out_dir, "Output directory")->required();
  train_cmd->add_flag("--quiet", train.quiet, "Suppress progress messages");

  dcc::EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate trained policies or a fixed controller");
  eval_cmd->add_option("config", eval.scenario, "Scenario JSON")->required();
  eval_cmd->add_option("--policies", eval.policy_dir, "Output directory of a train run");
  eval_cmd->add_option("--controller", eval.controller, "baseline or greedy");
  eval_cmd->add_option("--seeds", eval.seeds, "Seed list");
  eval_cmd->add_option("--out", eval.out_dir, "Output directory")->required();

  dcc::CompareOptions cmp;
  auto* compare = app.add_subcommand("compare", "Tabulate CO2 across run directories");
  compare->add_option("runs", cmp.runs, "Run directories; the first is the reference")->required();
  compare->add_option("--out", cmp.out, "Path of comparison.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dcc::kExitConfig;
  }

  if (*simulate) return dcc::cli_simulate(sim, std::cout, std::cerr);
  if (*train_cmd) return dcc::cli_train(train, std::cout, std::cerr);
  if (*eval_cmd) return dcc::cli_evaluate(eval, std::cout, std::cerr);
  return dcc::cli_compare(cmp, std::cout, std::cerr);
}
