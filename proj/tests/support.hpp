#pragma once

// Independent oracles and random instance generators shared by the unit
// tests, the acceptance runner and the benchmark. Nothing here calls into
// the code it is used to check, except for constructing inputs.

#include "ripple/graph.hpp"
#include "ripple/power.hpp"
#include "ripple/protocol.hpp"
#include "ripple/scenario.hpp"
#include "ripple/water.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

using ripple::Index;
using Rng = std::mt19937_64;

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(RIPPLE_SOURCE_DIR) / rel;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Index uniform_index(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

/// Random spanning tree (each node attaches to an earlier one) plus extra
/// edges with probability `extra`.
inline std::vector<ripple::Edge> random_connected_edges(Rng& rng, Index n, double extra) {
  std::vector<ripple::Edge> edges;
  for (Index k = 1; k < n; ++k) {
    edges.push_back({uniform_index(rng, 0, k - 1), k});
  }
  for (Index a = 0; a < n; ++a) {
    for (Index b = a + 1; b < n; ++b) {
      const bool present = std::any_of(edges.begin(), edges.end(), [&](const ripple::Edge& e) {
        return (e.from == a && e.to == b) || (e.from == b && e.to == a);
      });
      if (!present && coin(rng, extra)) {
        edges.push_back({a, b});
      }
    }
  }
  return edges;
}

/// Arbitrary (possibly disconnected) edge set.
inline std::vector<ripple::Edge> random_edges(Rng& rng, Index n, double p) {
  std::vector<ripple::Edge> edges;
  for (Index a = 0; a < n; ++a) {
    for (Index b = a + 1; b < n; ++b) {
      if (coin(rng, p)) {
        edges.push_back({a, b});
      }
    }
  }
  return edges;
}

/// Connectivity by repeated squaring of (I + A) reachability; no BFS.
inline bool reachability_connected(Index n, const std::vector<ripple::Edge>& edges) {
  if (n == 0) {
    return false;
  }
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (Index k = 0; k < n; ++k) r[k][k] = true;
  for (const auto& e : edges) r[e.from][e.to] = r[e.to][e.from] = true;
  for (Index m = 0; m < n; ++m) {
    for (Index a = 0; a < n; ++a) {
      for (Index b = 0; b < n; ++b) {
        if (r[a][m] && r[m][b]) r[a][b] = true;
      }
    }
  }
  for (Index b = 0; b < n; ++b) {
    if (!r[0][b]) return false;
  }
  return true;
}

/// Largest singular value via a full SVD.
inline double svd_gain_norm(const Eigen::VectorXd& eta2, const Eigen::VectorXd& eta3,
                            const Eigen::MatrixXd& a) {
  if (a.size() == 0) {
    return 0.0;
  }
  const Eigen::MatrixXd m = eta2.cwiseProduct(eta3).asDiagonal() * a;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

/// Larger root of b v (v - v_G) = q for one generator feeding one load over
/// a line of susceptance b; NaN past the discriminant.
inline double two_bus_voltage(double q, double v_g, double b) {
  const double disc = b * b * v_g * v_g + 4.0 * b * q;
  if (disc < 0.0) {
    return std::nan("");
  }
  return (b * v_g + std::sqrt(disc)) / (2.0 * b);
}

/// Reactive demand at which the two-bus discriminant vanishes.
inline double two_bus_critical_q(double v_g, double b) { return -b * v_g * v_g / 4.0; }

/// Literal transcription of the four protocol steps with a dense
/// adjacency matrix, for hand-checkable multi-round oracles.
struct OracleState {
  Eigen::VectorXd u;
  Eigen::VectorXd lambda;
  long messages = 0;
};

inline OracleState oracle_round(const OracleState& s, const Eigen::VectorXd& y_full,
                                const Eigen::VectorXd& y_lower_full,
                                const std::vector<bool>& measured, const Eigen::MatrixXd& a,
                                const Eigen::VectorXd& eta1, const Eigen::VectorXd& eta2,
                                const Eigen::VectorXd& eta3, const Eigen::VectorXd& u_upper) {
  const Eigen::Index n = s.u.size();
  OracleState next;
  next.u.resize(n);
  next.lambda.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double f = 0.0;
    if (measured[static_cast<Index>(i)] && y_lower_full[i] >= y_full[i]) {
      f = y_lower_full[i] - y_full[i];
    }
    double help = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) help += a(i, j) * s.lambda[j];
    const double target = s.u[i] + eta1[i] * f + eta2[i] * help;
    next.lambda[i] = target > u_upper[i] ? eta3[i] * (target - u_upper[i]) : 0.0;
    next.u[i] = target < u_upper[i] ? target : u_upper[i];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (next.lambda[i] > 0.0) {
      next.messages += static_cast<long>(a.row(i).sum());
    }
  }
  return next;
}

/// Synthetic monotone linear plant: nonnegative gain, all controls start at
/// their lower limit, max effort feasible by construction with at least one
/// violated output at u0. `tighten` < 1 shrinks the box so that max effort
/// becomes infeasible.
struct LinearInstance {
  ripple::Scenario scenario;
  bool feasible = true;
};

inline LinearInstance random_linear_instance(Rng& rng, Index n_max = 10) {
  const Index n = uniform_index(rng, 1, n_max);
  ripple::LinearCase lc;
  for (Index k = 0; k < n; ++k) {
    if (coin(rng, 0.6)) lc.measured.push_back(k);
  }
  if (lc.measured.empty()) {
    lc.measured.push_back(uniform_index(rng, 0, n - 1));
  }
  lc.u_nominal.assign(n, 0.0);
  lc.u_lower.assign(n, 0.0);
  lc.u_upper.resize(n);
  for (auto& x : lc.u_upper) x = uniform(rng, 0.5, 2.0);

  bool any_violation = false;
  for (Index r = 0; r < lc.measured.size(); ++r) {
    std::vector<double> row(n, 0.0);
    for (Index c = 0; c < n; ++c) {
      if (c == lc.measured[r]) {
        row[c] = uniform(rng, 0.5, 1.5);
      } else if (coin(rng, 0.4)) {
        row[c] = uniform(rng, 0.0, 1.0);
      }
    }
    double at_max = 0.0;
    for (Index c = 0; c < n; ++c) at_max += row[c] * lc.u_upper[c];
    const double offset = uniform(rng, -1.0, 1.0);
    double y_lower = 0.0;
    if (coin(rng, 0.75) || (!any_violation && r + 1 == lc.measured.size())) {
      y_lower = offset + uniform(rng, 0.1, 0.9) * at_max;  // violated at u0, met at max effort
      any_violation = true;
    } else {
      y_lower = offset - uniform(rng, 0.0, 0.5);
    }
    lc.gain.push_back(row);
    lc.offset.push_back(offset);
    lc.y_lower.push_back(y_lower);
  }

  ripple::Scenario s;
  s.name = "synthetic";
  const auto edges = random_connected_edges(rng, n, 0.25);
  for (const auto& e : edges) {
    s.comm_edges.emplace_back(std::to_string(e.from), std::to_string(e.to));
  }
  s.plant = lc;
  return {s, true};
}

/// Shrinks the box of a feasible instance until max effort misses some
/// output limit. Requires an instance built by random_linear_instance.
inline LinearInstance tighten_to_infeasible(const LinearInstance& in) {
  LinearInstance out = in;
  auto& lc = std::get<ripple::LinearCase>(out.scenario.plant);
  // Largest fraction of the box any violated output needs: below it, max
  // effort cannot close that output's gap.
  double need = 0.0;
  for (Index r = 0; r < lc.measured.size(); ++r) {
    double at_max = 0.0;
    for (Index c = 0; c < lc.u_upper.size(); ++c) at_max += lc.gain[r][c] * lc.u_upper[c];
    const double gap = lc.y_lower[r] - lc.offset[r];
    if (gap > 0.0) {
      need = std::max(need, gap / at_max);
    }
  }
  const double beta = 0.5 * need;
  for (Index c = 0; c < lc.u_upper.size(); ++c) {
    lc.u_upper[c] = lc.u_lower[c] + beta * (lc.u_upper[c] - lc.u_lower[c]);
  }
  out.feasible = false;
  return out;
}

/// Random connected grid with `n` buses, the first `generators` of them
/// generators.
inline ripple::power::GridModel random_grid(Rng& rng, Index n, Index generators) {
  auto edges = random_connected_edges(rng, n, 0.4);
  std::vector<double> b;
  for (std::size_t k = 0; k < edges.size(); ++k) b.push_back(uniform(rng, 5.0, 30.0));
  std::vector<ripple::power::BusType> types(n, ripple::power::BusType::Load);
  for (Index k = 0; k < generators; ++k) types[k] = ripple::power::BusType::Generator;
  return {ripple::Graph(n, std::move(edges)), std::move(b), std::move(types)};
}

/// Random pipe network on `n` nodes with node 0 as the only reservoir.
inline ripple::water::WaterModel random_water_network(Rng& rng, Index n) {
  auto edges = random_connected_edges(rng, n, 0.3);
  std::vector<ripple::water::EdgeLaw> laws;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const double c = uniform(rng, 1e-4, 1e-3);
    laws.push_back(coin(rng, 0.5) ? ripple::water::EdgeLaw::darcy_weisbach(c)
                                  : ripple::water::EdgeLaw::hazen_williams(c));
  }
  std::vector<bool> pressure(n, false);
  pressure[0] = true;
  return {ripple::Graph(n, std::move(edges)), std::move(laws), std::move(pressure)};
}

} // namespace testing
