// Batch driver for the two-agent collaborative estimation simulator.
//
// Subcommands:
//   run         execute the estimation loop, write trace + model files
//   validate    classify the configured data stream (valid / diverging)
//   norm-sweep  operator-norm sweep over a rho grid, write CSV + plot data
//   diagnose    spectral, perturbation, convergence and bound checks
//
// Exit codes: 0 ok, 1 negative verdict or module error, 2 usage, 3 inconclusive.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "maea/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"two-agent collaborative RKHS estimation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  int horizon = 50;
  std::string operator_name = "agent1";
  int decades = 6;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file")->required();
    cmd->add_option("--seed", seed, "override the config seed");
  };

  CLI::App* sub_run = app.add_subcommand("run", "run the estimation loop");
  add_common(sub_run);
  sub_run->add_option("--out", out_dir, "output directory override");

  CLI::App* sub_validate = app.add_subcommand("validate", "classify the data stream");
  add_common(sub_validate);
  sub_validate->add_option("--horizon", horizon, "number of data points to examine");

  CLI::App* sub_sweep = app.add_subcommand("norm-sweep", "operator norm sweep");
  add_common(sub_sweep);
  sub_sweep->add_option("--operator", operator_name, "agent1 | agent2 | multiagent | fusion");
  sub_sweep->add_option("--decades", decades, "grid spans 1e0 .. 1e<decades>");
  sub_sweep->add_option("--out", out_dir, "output directory override");

  CLI::App* sub_diag = app.add_subcommand("diagnose", "run the diagnostic battery");
  add_common(sub_diag);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(sub_run))
      return maea::cmd_run(config_path, out_dir, std::cout, seed);
    if (app.got_subcommand(sub_validate))
      return maea::cmd_validate(config_path, horizon, std::cout, seed);
    if (app.got_subcommand(sub_sweep))
      return maea::cmd_norm_sweep(config_path, operator_name, decades, out_dir, std::cout, seed);
    if (app.got_subcommand(sub_diag))
      return maea::cmd_diagnose(config_path, std::cout, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
