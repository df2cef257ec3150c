// pctl: command line front end for the periodic stochastic control library.

#include <CLI11.hpp>

#include <iostream>

#include "pctl/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Periodic stochastic control with affine decision rules"};
  app.require_subcommand(1);

  pctl::CliOptions opt;
  std::string config;
  std::string out;
  std::string solution;
  std::string history;
  std::uint64_t seed = 0;
  std::vector<double> state;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override the configured seed");
    cmd->add_option("--out", out, "output directory (overrides output_dir)");
    cmd->add_option("--override", opt.overrides, "dotted.key=value, repeatable");
  };

  auto* offline = app.add_subcommand("solve-offline", "optimize the periodic rule over one full period");
  common(offline);
  auto* transient = app.add_subcommand("solve-transient", "re-plan from an observed state");
  common(transient);
  transient->add_option("--solution", solution, "offline solution file");
  transient->add_option("--state", state, "observed state")->delimiter(',');
  transient->add_option("--time", opt.time, "current time step");
  transient->add_option("--history", history, "observed noise CSV (simulate-noise format)");
  auto* evaluate = app.add_subcommand("evaluate", "closed-loop evaluation on held-out noise");
  common(evaluate);
  evaluate->add_option("--solution", solution, "offline solution file");
  auto* baseline = app.add_subcommand("baseline", "scenario-tree enumeration baseline");
  common(baseline);
  auto* simulate = app.add_subcommand("simulate-noise", "sample the noise process to CSV");
  common(simulate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    (void)app.exit(e);
    return pctl::kExitConfig;
  }

  const CLI::App* cmd = app.get_subcommands().front();
  opt.command = cmd->get_name();
  opt.config = config;
  if (cmd->count("--seed") > 0) opt.seed = seed;
  if (!out.empty()) opt.out = out;
  if (!solution.empty()) opt.solution = solution;
  if (!history.empty()) opt.history = history;
  if (!state.empty()) opt.state = state;
  return pctl::run(opt, std::cerr);
}
