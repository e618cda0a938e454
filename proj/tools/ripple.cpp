#include "ripple/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Saturation-triggered distributed control over monotone network plants"};
  app.require_subcommand(1);

  std::string scenario;
  ripple::SimulateOptions sim;
  long budget = 0;
  long decimate = 0;
  std::string output_dir = ".";
  int probe_points = 5;
  double scale_min = 1.0;
  double scale_max = 2.0;
  int steps = 20;

  auto* simulate = app.add_subcommand("simulate", "run the protocol and write trace files");
  simulate->add_option("scenario", scenario, "scenario JSON file")->required();
  simulate->add_option("--output-dir,-o", output_dir, "directory for trace.csv and summary.json");
  auto* budget_opt = simulate->add_option("--budget", budget, "round budget")
                         ->check(CLI::PositiveNumber);
  auto* decimate_opt = simulate->add_option("--decimate", decimate, "keep every k-th round")
                           ->check(CLI::PositiveNumber);
  simulate->add_flag("--override-gain-check", sim.override_gain_check,
                     "run even when the spectral gain condition fails");

  auto* gains = app.add_subcommand("check-gains", "report the spectral gain condition");
  gains->add_option("scenario", scenario)->required();

  auto* mono = app.add_subcommand("check-monotonicity", "finite-difference monotonicity probe");
  mono->add_option("scenario", scenario)->required();
  mono->add_option("--points", probe_points, "number of probe points (first is u0)")
      ->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "scale load reactive demand and record lambda_min");
  sweep->add_option("scenario", scenario)->required();
  sweep->add_option("--scale-min", scale_min);
  sweep->add_option("--scale-max", scale_max);
  sweep->add_option("--steps", steps)->check(CLI::PositiveNumber);
  sweep->add_option("--output-dir,-o", output_dir);

  auto* feas = app.add_subcommand("feasibility", "check feasibility at maximum control effort");
  feas->add_option("scenario", scenario)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ripple::kExitInvalid;
  }

  if (simulate->parsed()) {
    sim.output_dir = output_dir;
    if (budget_opt->count()) sim.budget = budget;
    if (decimate_opt->count()) sim.decimate = decimate;
    return ripple::cmd_simulate(scenario, sim, std::cout, std::cerr);
  }
  if (gains->parsed()) {
    return ripple::cmd_check_gains(scenario, std::cout, std::cerr);
  }
  if (mono->parsed()) {
    return ripple::cmd_check_monotonicity(scenario, probe_points, std::cout, std::cerr);
  }
  if (sweep->parsed()) {
    return ripple::cmd_sweep(scenario, scale_min, scale_max, steps, output_dir, std::cout,
                             std::cerr);
  }
  return ripple::cmd_feasibility(scenario, std::cout, std::cerr);
}
