#pragma once

#include "ripple/graph.hpp"
#include "ripple/scenario.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ripple {

struct TraceRecord {
  long round = 0;
  Eigen::VectorXd u;
  Eigen::VectorXd y;
  Eigen::VectorXd f;
  Eigen::VectorXd lambda;
  long messages_sent = 0;
  double wall_time = 0.0;  // seconds since the run started; not part of determinism
};

struct Outcome {
  enum class Kind { Converged, Stalled, SolverFailure, BudgetExceeded };

  Kind kind = Kind::BudgetExceeded;
  long rounds = 0;
  double max_violation = 0.0;  // |f|_inf at termination
  bool feasible = false;
  std::string detail;
};

const char* to_string(Outcome::Kind k);

/// 0 converged, 1 stalled or out of budget, 3 solver failure.
int exit_code(const Outcome& o);

struct RunResult {
  Outcome outcome;
  std::vector<TraceRecord> trace;  // possibly decimated; always holds round 0 and the last round
  long total_messages = 0;
  double wall_time = 0.0;
};

/// Plant solve -> protocol round, until equilibrium, stall or budget.
///
/// Equilibrium with a feasible terminal control is Converged; equilibrium
/// without it, or all controls pinned at the upper limit with an unchanged
/// positive violation for `stall_window` rounds, is Stalled. Solver errors
/// end the run as SolverFailure with the trace so far.
RunResult run(const PreparedRun& pr);

RunResult run(const Scenario& s);

/// Independent runs executed in parallel. Results are in input order and
/// identical to `run_batch_serial` except for wall-clock fields.
std::vector<RunResult> run_batch(const std::vector<PreparedRun>& runs);
std::vector<RunResult> run_batch_serial(const std::vector<PreparedRun>& runs);

struct MessageStats {
  std::vector<long> per_round;
  std::vector<long> cumulative;
  /// Per agent: first round in which a neighbour's positive beacon is sent to it.
  std::vector<std::optional<long>> first_assistance;
};

MessageStats message_stats(const std::vector<TraceRecord>& trace, const Graph& comm);

/// Post-hoc protocol invariants on a full (undecimated) trace: u
/// nondecreasing and <= u_upper exactly, lambda >= 0, lambda > 0 only at
/// saturated agents, message counts equal the beaconing agents' degrees.
/// Returns human-readable violations; empty means the trace is clean.
std::vector<std::string> check_trace(const std::vector<TraceRecord>& trace, const Graph& comm,
                                     const Eigen::VectorXd& u_upper);

/// Agents that never see a local violation must not move before some
/// communication neighbour has emitted a positive beacon in an earlier
/// round. Returns offending agent indices.
std::vector<Index> activation_order_violations(const std::vector<TraceRecord>& trace,
                                               const Graph& comm);

} // namespace ripple
