#include "ripple/commands.hpp"

#include "ripple/errors.hpp"
#include "ripple/power.hpp"
#include "ripple/scenario_io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>

namespace ripple {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest text that reads back to the same double.
std::string fmt(double x) {
  if (std::isnan(x)) {
    return "nan";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) {
    throw std::runtime_error("cannot write '" + p.string() + "'");
  }
  return os;
}

json labelled(const Eigen::VectorXd& v, const std::vector<std::string>& labels,
              const std::vector<Index>* slots = nullptr) {
  json j = json::object();
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const Index node = slots ? (*slots)[static_cast<Index>(k)] : static_cast<Index>(k);
    j[labels[node]] = v[k];
  }
  return j;
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const InvalidScenario& e) {
    err << "invalid scenario: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitSolverFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

} // namespace

std::vector<double> linspace(double lo, double hi, int steps) {
  std::vector<double> out;
  if (steps <= 0) {
    return out;
  }
  if (steps == 1) {
    return {lo};
  }
  for (int k = 0; k < steps; ++k) {
    out.push_back(lo + (hi - lo) * k / (steps - 1));
  }
  return out;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace,
                     const std::vector<std::string>& labels, const std::vector<Index>& measured) {
  os << "round";
  for (const auto& l : labels) os << ",u_" << l;
  for (Index m : measured) os << ",y_" << labels[m];
  for (const auto& l : labels) os << ",f_" << l;
  for (const auto& l : labels) os << ",lambda_" << l;
  os << ",messages\n";
  for (const auto& r : trace) {
    os << r.round;
    for (double x : r.u) os << ',' << fmt(x);
    for (double x : r.y) os << ',' << fmt(x);
    for (double x : r.f) os << ',' << fmt(x);
    for (double x : r.lambda) os << ',' << fmt(x);
    os << ',' << r.messages_sent << '\n';
  }
}

void write_effort_csv(std::ostream& os, const std::vector<TraceRecord>& trace,
                      const std::vector<std::string>& labels, const Eigen::VectorXd& u_upper) {
  if (trace.empty()) {
    return;
  }
  const Eigen::VectorXd& u0 = trace.front().u;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index k = 0; k < u0.size(); ++k) {
    if (u_upper[k] > u0[k]) {
      cols.push_back(k);
    }
  }
  os << "round";
  for (auto k : cols) os << ',' << labels[static_cast<Index>(k)];
  os << '\n';
  for (const auto& r : trace) {
    os << r.round;
    for (auto k : cols) os << ',' << fmt((r.u[k] - u0[k]) / (u_upper[k] - u0[k]));
    os << '\n';
  }
}

void write_margin_csv(std::ostream& os, const std::vector<TraceRecord>& trace,
                      const std::vector<std::string>& labels, const std::vector<Index>& measured,
                      const Eigen::VectorXd& y_lower) {
  os << "round";
  for (Index m : measured) os << ',' << labels[m];
  os << '\n';
  for (const auto& r : trace) {
    os << r.round;
    for (Eigen::Index k = 0; k < r.y.size(); ++k) os << ',' << fmt(r.y[k] - y_lower[k]);
    os << '\n';
  }
}

int cmd_simulate(const fs::path& scenario, const SimulateOptions& opts, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    Scenario s = load_scenario(scenario);
    if (opts.budget) s.run.budget = *opts.budget;
    if (opts.decimate) s.run.trace_decimation = *opts.decimate;
    if (opts.override_gain_check) s.run.override_gain_check = true;
    const PreparedRun pr = prepare(s);
    const PlantModel& plant = *pr.built.plant;
    const auto& labels = pr.built.labels;

    const RunResult res = run(pr);

    fs::create_directories(opts.output_dir);
    {
      auto os = open_out(opts.output_dir / "trace.csv");
      write_trace_csv(os, res.trace, labels, plant.measured());
    }
    {
      auto os = open_out(opts.output_dir / "effort.csv");
      write_effort_csv(os, res.trace, labels, plant.u_upper());
    }
    {
      auto os = open_out(opts.output_dir / "margin.csv");
      write_margin_csv(os, res.trace, labels, plant.measured(), plant.y_lower());
    }

    const auto& last = res.trace.back();
    const auto stats = message_stats(res.trace, pr.comm);
    json summary;
    summary["scenario"] = pr.name;
    summary["outcome"] = {{"kind", to_string(res.outcome.kind)},
                          {"rounds", res.outcome.rounds},
                          {"feasible", res.outcome.feasible},
                          {"max_violation", res.outcome.max_violation},
                          {"detail", res.outcome.detail}};
    summary["gain_condition"] = pr.gain_norm;
    summary["gains"] = {{"eta1", labelled(pr.gains.eta1, labels)},
                        {"eta2", labelled(pr.gains.eta2, labels)},
                        {"eta3", labelled(pr.gains.eta3, labels)}};
    summary["terminal"] = {{"round", last.round},
                           {"u", labelled(last.u, labels)},
                           {"y", labelled(last.y, labels, &plant.measured())},
                           {"lambda", labelled(last.lambda, labels)}};
    json first = json::object();
    for (Index k = 0; k < labels.size(); ++k) {
      first[labels[k]] = stats.first_assistance[k] ? json(*stats.first_assistance[k]) : json();
    }
    summary["messages"] = {{"total", res.total_messages}, {"first_assistance_round", first}};
    summary["trace_records"] = res.trace.size();
    summary["wall_time_s"] = res.wall_time;
    {
      auto os = open_out(opts.output_dir / "summary.json");
      os << summary.dump(2) << '\n';
    }

    out << pr.name << ": " << to_string(res.outcome.kind) << " after " << res.outcome.rounds
        << " rounds, " << res.total_messages << " messages, max violation "
        << fmt(res.outcome.max_violation) << '\n';
    if (!res.outcome.detail.empty()) {
      out << "  " << res.outcome.detail << '\n';
    }
    return exit_code(res.outcome);
  });
}

int cmd_check_gains(const fs::path& scenario, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario s = load_scenario(scenario);
    const PreparedRun pr = assemble(s);
    if (!s.gains) {
      const auto& l = pr.built.labels;
      out << "auto gains:\n";
      for (Index k = 0; k < l.size(); ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        out << "  " << l[k] << ": eta1=" << fmt(pr.gains.eta1[ki]) << " eta2="
            << fmt(pr.gains.eta2[ki]) << " eta3=" << fmt(pr.gains.eta3[ki]) << '\n';
      }
    }
    const bool pass = pr.gain_norm < 1.0;
    out << "gain condition ||diag(eta2) diag(eta3) A||_2 = " << fmt(pr.gain_norm) << ": "
        << (pass ? "pass" : "fail") << '\n';
    if (!is_connected(pr.comm)) {
      err << "comm_graph is not connected\n";
      return kExitInvalid;
    }
    return pass ? kExitOk : kExitInvalid;
  });
}

int cmd_check_monotonicity(const fs::path& scenario, int probe_points, std::ostream& out,
                           std::ostream& err) {
  return guarded(err, [&] {
    const Scenario s = load_scenario(scenario);
    const PreparedRun pr = assemble(s);
    const PlantModel& plant = *pr.built.plant;
    const auto* grid_plant = dynamic_cast<const power::PowerPlant*>(&plant);

    std::mt19937_64 rng(s.run.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    bool all_pass = true;
    bool solver_failed = false;
    for (int p = 0; p < std::max(1, probe_points); ++p) {
      Eigen::VectorXd u = pr.u0;
      if (p > 0) {
        for (Eigen::Index k = 0; k < u.size(); ++k) {
          u[k] += unit(rng) * (plant.u_upper()[k] - pr.u0[k]);
        }
      }
      out << "point " << p << ": ";
      try {
        const auto probe = monotonicity_probe(plant, u);
        out << "min dy/du = " << fmt(probe.min_entry) << ' '
            << (probe.monotone ? "monotone" : "NOT monotone");
        all_pass = all_pass && probe.monotone;
        if (grid_plant) {
          const auto sol = grid_plant->solve_full(u);
          const double lmin = power::prop1_condition(sol, grid_plant->q_L(u), grid_plant->grid());
          out << ", lambda_min = " << fmt(lmin);
        }
        out << '\n';
      } catch (const SolverFailure& e) {
        out << "solver failure: " << e.what() << '\n';
        solver_failed = true;
      }
    }
    out << (all_pass && !solver_failed ? "pass" : "fail") << '\n';
    if (solver_failed) {
      return kExitSolverFailure;
    }
    return all_pass ? kExitOk : kExitNotConverged;
  });
}

int cmd_sweep(const fs::path& scenario, double scale_min, double scale_max, int steps,
              const fs::path& output_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (steps < 1) {
      throw InvalidScenario("sweep needs at least one step");
    }
    const Scenario s = load_scenario(scenario);
    const PreparedRun pr = assemble(s);
    const auto* grid_plant = dynamic_cast<const power::PowerPlant*>(pr.built.plant.get());
    if (!grid_plant) {
      throw InvalidScenario("sweep requires a power plant");
    }
    const auto scales = linspace(scale_min, scale_max, steps);
    const auto rows = power::loadability_sweep(grid_plant->grid(), grid_plant->q_L(pr.u0),
                                               grid_plant->v_G(pr.u0), scales);
    fs::create_directories(output_dir);
    auto os = open_out(output_dir / "sweep.csv");
    os << "scale,solved,lambda_min,iterations\n";
    long solved = 0;
    for (const auto& r : rows) {
      os << fmt(r.scale) << ',' << (r.solved ? 1 : 0) << ',' << fmt(r.lambda_min) << ','
         << r.iterations << '\n';
      solved += r.solved ? 1 : 0;
    }
    out << "sweep: " << solved << " of " << rows.size() << " scales solved, written to "
        << (output_dir / "sweep.csv").string() << '\n';
    return kExitOk;
  });
}

int cmd_feasibility(const fs::path& scenario, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario s = load_scenario(scenario);
    const PreparedRun pr = assemble(s);
    const PlantModel& plant = *pr.built.plant;
    const Eigen::VectorXd y = plant.solve(plant.u_upper());
    const auto& labels = pr.built.labels;
    for (Index k = 0; k < plant.output_dim(); ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      out << "  " << labels[plant.measured()[k]] << ": y(u_upper) = " << fmt(y[ki])
          << ", y_lower = " << fmt(plant.y_lower()[ki]) << '\n';
    }
    const bool ok = max_effort_feasibility(plant, s.run.eps_feas);
    out << "max-effort feasibility: " << (ok ? "feasible" : "infeasible") << '\n';
    return ok ? kExitOk : kExitNotConverged;
  });
}

} // namespace ripple
