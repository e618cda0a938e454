#include "ripple/sim.hpp"

#include "ripple/errors.hpp"

#include <chrono>
#include <sstream>

namespace ripple {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool saturated_everywhere(const Eigen::VectorXd& u, const Eigen::VectorXd& u_upper, double eps) {
  return ((u_upper - u).array() <= eps).all();
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

} // namespace

const char* to_string(Outcome::Kind k) {
  switch (k) {
  case Outcome::Kind::Converged:
    return "Converged";
  case Outcome::Kind::Stalled:
    return "Stalled";
  case Outcome::Kind::SolverFailure:
    return "SolverFailure";
  case Outcome::Kind::BudgetExceeded:
    return "BudgetExceeded";
  }
  return "Unknown";
}

int exit_code(const Outcome& o) {
  switch (o.kind) {
  case Outcome::Kind::Converged:
    return 0;
  case Outcome::Kind::Stalled:
  case Outcome::Kind::BudgetExceeded:
    return 1;
  case Outcome::Kind::SolverFailure:
    return 3;
  }
  return 1;
}

RunResult run(const PreparedRun& pr) {
  const auto t0 = Clock::now();
  const PlantModel& plant = *pr.built.plant;
  const Index n = plant.control_dim();
  const ProtocolContext ctx{pr.comm, pr.gains, plant.u_upper(), plant.y_lower(),
                            plant.measured()};
  const auto& cfg = pr.run;

  RunResult res;
  auto keep = [&](long round) { return round % cfg.trace_decimation == 0; };
  auto fail = [&](long round, const SolverFailure& e) {
    res.outcome.kind = Outcome::Kind::SolverFailure;
    res.outcome.rounds = round;
    res.outcome.detail = e.what();
    res.wall_time = seconds_since(t0);
    return res;
  };

  ProtocolState state = ProtocolState::initial(pr.u0);
  Eigen::VectorXd y;
  try {
    y = plant.solve(state.u);
  } catch (const SolverFailure& e) {
    return fail(0, e);
  }
  Eigen::VectorXd f = violation(y, plant.y_lower(), plant.measured(), n);
  res.trace.push_back({0, state.u, y, f, state.lambda, 0, seconds_since(t0)});

  long unchanged = 0;
  for (long t = 0; t < cfg.budget; ++t) {
    auto [next, msgs] = protocol_round(state, y, ctx);
    Eigen::VectorXd y_next;
    try {
      y_next = plant.solve(next.u);
    } catch (const SolverFailure& e) {
      return fail(t + 1, e);
    }
    Eigen::VectorXd f_next = violation(y_next, plant.y_lower(), plant.measured(), n);
    const long sent = static_cast<long>(msgs.size());
    res.total_messages += sent;

    const double viol = inf_norm(f_next);
    // On a connected overlay a violated fixed point has every agent saturated,
    // so small steps with headroom left are slow progress, not a stop.
    const bool creeping =
        viol > cfg.eps_feas && !saturated_everywhere(next.u, plant.u_upper(), cfg.eps_eq);
    const bool equilibrium = is_equilibrium(state, next, cfg.eps_eq) && !creeping;
    if (saturated_everywhere(next.u, plant.u_upper(), cfg.eps_eq) && viol > cfg.eps_feas &&
        inf_norm(f_next - f) <= cfg.eps_eq) {
      ++unchanged;
    } else {
      unchanged = 0;
    }
    const bool stalled = unchanged >= cfg.stall_window;
    const bool last = equilibrium || stalled || t + 1 == cfg.budget;

    if (keep(t + 1) || last) {
      res.trace.push_back({t + 1, next.u, y_next, f_next, next.lambda, sent, seconds_since(t0)});
    }
    state = std::move(next);
    y = std::move(y_next);
    f = std::move(f_next);

    if (equilibrium || stalled) {
      res.outcome.rounds = t + 1;
      res.outcome.max_violation = viol;
      const bool in_box =
          ((state.u - plant.u_lower()).array() >= -cfg.eps_feas).all() &&
          ((state.u - plant.u_upper()).array() <= cfg.eps_feas).all();
      res.outcome.feasible = in_box && viol <= cfg.eps_feas;
      if (equilibrium && res.outcome.feasible) {
        res.outcome.kind = Outcome::Kind::Converged;
      } else {
        res.outcome.kind = Outcome::Kind::Stalled;
        std::ostringstream os;
        os << (equilibrium ? "equilibrium" : "saturated") << " with residual violation " << viol;
        res.outcome.detail = os.str();
      }
      res.wall_time = seconds_since(t0);
      return res;
    }
  }
  res.outcome.kind = Outcome::Kind::BudgetExceeded;
  res.outcome.rounds = cfg.budget;
  res.outcome.max_violation = inf_norm(f);
  res.wall_time = seconds_since(t0);
  return res;
}

RunResult run(const Scenario& s) { return run(prepare(s)); }

MessageStats message_stats(const std::vector<TraceRecord>& trace, const Graph& comm) {
  MessageStats st;
  st.first_assistance.assign(comm.node_count(), std::nullopt);
  long total = 0;
  for (const auto& rec : trace) {
    long count = 0;
    for (Index n = 0; n < comm.node_count(); ++n) {
      if (rec.lambda[static_cast<Eigen::Index>(n)] > 0.0) {
        count += static_cast<long>(comm.degree(n));
        for (Index m : comm.neighbors(n)) {
          if (!st.first_assistance[m]) {
            st.first_assistance[m] = rec.round;
          }
        }
      }
    }
    total += count;
    st.per_round.push_back(count);
    st.cumulative.push_back(total);
  }
  return st;
}

std::vector<std::string> check_trace(const std::vector<TraceRecord>& trace, const Graph& comm,
                                     const Eigen::VectorXd& u_upper) {
  std::vector<std::string> issues;
  auto report = [&](long round, const std::string& what) {
    issues.push_back("round " + std::to_string(round) + ": " + what);
  };
  for (Index k = 0; k < trace.size(); ++k) {
    const auto& rec = trace[k];
    if (k > 0 && ((rec.u - trace[k - 1].u).array() < 0.0).any()) {
      report(rec.round, "control decreased");
    }
    if (((rec.u - u_upper).array() > 0.0).any()) {
      report(rec.round, "control above upper limit");
    }
    if ((rec.lambda.array() < 0.0).any()) {
      report(rec.round, "negative beacon");
    }
    long expected = 0;
    for (Eigen::Index n = 0; n < rec.lambda.size(); ++n) {
      if (rec.lambda[n] > 0.0) {
        expected += static_cast<long>(comm.degree(static_cast<Index>(n)));
        if (rec.u[n] != u_upper[n]) {
          report(rec.round, "beacon from unsaturated agent " + std::to_string(n));
        }
      }
    }
    if (rec.messages_sent != expected) {
      report(rec.round, "message count " + std::to_string(rec.messages_sent) + " != " +
                            std::to_string(expected));
    }
  }
  return issues;
}

std::vector<Index> activation_order_violations(const std::vector<TraceRecord>& trace,
                                               const Graph& comm) {
  std::vector<Index> bad;
  const Index n = comm.node_count();
  std::vector<std::optional<long>> first_beacon(n);
  std::vector<std::optional<long>> first_move(n);
  std::vector<bool> ever_violated(n, false);
  for (Index k = 0; k < trace.size(); ++k) {
    const auto& rec = trace[k];
    for (Index a = 0; a < n; ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      if (rec.f[ai] > 0.0) {
        ever_violated[a] = true;
      }
      if (rec.lambda[ai] > 0.0 && !first_beacon[a]) {
        first_beacon[a] = rec.round;
      }
      if (k > 0 && rec.u[ai] != trace[k - 1].u[ai] && !first_move[a]) {
        first_move[a] = rec.round;
      }
    }
  }
  for (Index a = 0; a < n; ++a) {
    if (ever_violated[a] || !first_move[a]) {
      continue;
    }
    bool assisted = false;
    for (Index m : comm.neighbors(a)) {
      if (first_beacon[m] && *first_beacon[m] < *first_move[a]) {
        assisted = true;
      }
    }
    if (!assisted) {
      bad.push_back(a);
    }
  }
  return bad;
}

} // namespace ripple
