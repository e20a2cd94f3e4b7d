#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli.hpp"

namespace {

void add_experiment_flags(CLI::App* cmd, autotune::cli::ExperimentConfig& c) {
  cmd->add_option("--space", c.space_path, "configuration space JSON")->required();
  cmd->add_option("--surface", c.surface_path, "simulator surface JSON");
  cmd->add_option("--replay", c.replay_path, "trial log to replay as the target");
  cmd->add_option("--tc", c.tc_ms, "time constraint in ms")->required();
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output file");
  cmd->add_option("--production-nm", c.production_nm, "override the production machine count");
}

}  // namespace

int main(int argc, char** argv) {
  namespace ac = autotune::cli;
  CLI::App app{"Black-box configuration tuner with testbed planning"};
  app.require_subcommand(1);

  ac::ExperimentConfig plan_cfg;
  auto* plan = app.add_subcommand("plan-testbed", "choose a reduced-scale testbed setting");
  add_experiment_flags(plan, plan_cfg);
  plan->add_option("--scale-factor", plan_cfg.scale_factor, "testbed / production time ratio");
  plan->add_option("--delta", plan_cfg.delta, "settings sampled per round");
  plan->add_option("--rc-max-nm", plan_cfg.rc_max_nm, "largest machine count allowed");
  plan->add_option("--rc-max-ds", plan_cfg.rc_max_ds, "largest data scale allowed");

  ac::ExperimentConfig tune_cfg;
  auto* tune = app.add_subcommand("tune", "search for the fastest configuration");
  add_experiment_flags(tune, tune_cfg);
  tune->add_option("--alpha", tune_cfg.alpha, "initialization share of the budget");
  tune->add_option("--beta", tune_cfg.beta, "validation share of the budget");
  tune->add_option("--gamma", tune_cfg.gamma, "exploration/exploitation share of the budget");
  tune->add_option("--iters", tune_cfg.iters, "planned search iterations");
  tune->add_option("--trees", tune_cfg.trees, "random-forest size");
  tune->add_option("--algorithm", tune_cfg.algorithm, "autotune | random | rbs")
      ->check(CLI::IsMember({"autotune", "random", "rbs"}));
  tune->add_option("--parallel", tune_cfg.parallel, "concurrent executions per batch");
  tune->add_option("--resume", tune_cfg.resume, "trial log to resume from");
  tune->add_option("--tb-ds", tune_cfg.tb_ds, "testbed data scale");
  tune->add_option("--tb-nm", tune_cfg.tb_nm, "testbed machine count");

  std::string report_space, report_table, report_out;
  std::vector<std::string> report_logs;
  auto* report = app.add_subcommand("report", "compare trial logs");
  report->add_option("--space", report_space, "configuration space JSON")->required();
  report->add_option("--published", report_table, "published results fixture (CSV)");
  report->add_option("--out", report_out, "machine-readable report (JSON)");
  report->add_option("logs", report_logs, "trial logs; the first is the baseline");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ac::kOk : ac::kUsage;
  }

  if (plan->parsed()) return ac::cmd_plan_testbed(plan_cfg, std::cout, std::cerr);
  if (tune->parsed()) return ac::cmd_tune(tune_cfg, std::cout, std::cerr);
  return ac::cmd_report(report_space, report_logs, report_table, report_out, std::cout,
                        std::cerr);
}
