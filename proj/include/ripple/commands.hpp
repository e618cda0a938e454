#pragma once

#include "ripple/sim.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ripple {

// Exit statuses shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNotConverged = 1;  // Stalled, BudgetExceeded or a failed verdict
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitSolverFailure = 3;

struct SimulateOptions {
  std::filesystem::path output_dir = ".";
  std::optional<long> budget;
  std::optional<long> decimate;
  bool override_gain_check = false;
};

/// Writes trace.csv, summary.json, effort.csv and margin.csv into
/// `output_dir` (created if missing). The trace is written even when the
/// run ends in SolverFailure.
int cmd_simulate(const std::filesystem::path& scenario, const SimulateOptions& opts,
                 std::ostream& out, std::ostream& err);

int cmd_check_gains(const std::filesystem::path& scenario, std::ostream& out, std::ostream& err);

/// Probes at u0 and at `probe_points - 1` seeded random points between u0
/// and the upper limits.
int cmd_check_monotonicity(const std::filesystem::path& scenario, int probe_points,
                           std::ostream& out, std::ostream& err);

/// Power plants only. Exits 0 whatever the sweep finds.
int cmd_sweep(const std::filesystem::path& scenario, double scale_min, double scale_max,
              int steps, const std::filesystem::path& output_dir, std::ostream& out,
              std::ostream& err);

int cmd_feasibility(const std::filesystem::path& scenario, std::ostream& out, std::ostream& err);

/// round, u_<label>..., y_<label>... (measured only), f_<label>...,
/// lambda_<label>..., messages. One row per retained record.
void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace,
                     const std::vector<std::string>& labels, const std::vector<Index>& measured);

/// (u_n(t) - u_n(0)) / (u_upper_n - u_n(0)) for agents with headroom.
void write_effort_csv(std::ostream& os, const std::vector<TraceRecord>& trace,
                      const std::vector<std::string>& labels, const Eigen::VectorXd& u_upper);

/// y - y_lower per measured node.
void write_margin_csv(std::ostream& os, const std::vector<TraceRecord>& trace,
                      const std::vector<std::string>& labels, const std::vector<Index>& measured,
                      const Eigen::VectorXd& y_lower);

std::vector<double> linspace(double lo, double hi, int steps);

} // namespace ripple
