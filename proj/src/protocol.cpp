#include "ripple/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ripple {

namespace {

// Agent loops only fan out when there is enough work per round.
constexpr long kParallelAgentThreshold = 256;

} // namespace

void ProtocolGains::validate(Index n) const {
  for (const auto* v : {&eta1, &eta2, &eta3}) {
    if (static_cast<Index>(v->size()) != n) {
      throw std::invalid_argument("gain vectors must have one entry per agent (" +
                                  std::to_string(n) + ")");
    }
    if (n > 0 && !(v->minCoeff() > 0.0)) {
      throw std::invalid_argument("gains must be strictly positive");
    }
  }
}

ProtocolState ProtocolState::initial(Eigen::VectorXd u0) {
  ProtocolState s;
  s.lambda = Eigen::VectorXd::Zero(u0.size());
  s.u = std::move(u0);
  return s;
}

Eigen::VectorXd violation(const Eigen::VectorXd& y, const Eigen::VectorXd& y_lower,
                          std::span<const Index> measured, Index n) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (Index k = 0; k < measured.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    f[static_cast<Eigen::Index>(measured[k])] = std::max(0.0, y_lower[ki] - y[ki]);
  }
  return f;
}

Eigen::VectorXd target_setpoint(const Eigen::VectorXd& u, const Eigen::VectorXd& f,
                                const Eigen::VectorXd& neighbor_beacons,
                                const ProtocolGains& gains) {
  return u + gains.eta1.cwiseProduct(f) + gains.eta2.cwiseProduct(neighbor_beacons);
}

Eigen::VectorXd beacon_update(const Eigen::VectorXd& target, const Eigen::VectorXd& u_upper,
                              const Eigen::VectorXd& eta3) {
  return eta3.cwiseProduct(target - u_upper).cwiseMax(0.0);
}

Eigen::VectorXd project(const Eigen::VectorXd& target, const Eigen::VectorXd& u_upper) {
  return target.cwiseMin(u_upper);
}

double gain_condition(const Eigen::VectorXd& eta2, const Eigen::VectorXd& eta3,
                      const Eigen::MatrixXd& adjacency) {
  const Eigen::MatrixXd m = eta2.cwiseProduct(eta3).asDiagonal() * adjacency;
  if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0) {
    return 0.0;
  }
  const Eigen::MatrixXd mtm = m.transpose() * m;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.cols()).normalized();
  double theta = 0.0;
  constexpr int kMaxIterations = 1'000'000;
  for (int it = 0; it < kMaxIterations; ++it) {
    const Eigen::VectorXd w = mtm * v;
    theta = v.dot(w) / v.squaredNorm();
    if (theta <= 0.0) {
      return 0.0;
    }
    if ((w - theta * v).norm() <= 1e-9 * theta) {
      break;
    }
    v = w.normalized();
  }
  return std::sqrt(theta);
}

RoundMessages beacon_messages(const Graph& comm, const Eigen::VectorXd& lambda) {
  RoundMessages out;
  for (Index n = 0; n < comm.node_count(); ++n) {
    const double l = lambda[static_cast<Eigen::Index>(n)];
    if (l > 0.0) {
      for (Index m : comm.neighbors(n)) {
        out.push_back({n, m, l});
      }
    }
  }
  return out;
}

RoundOutput protocol_round(const ProtocolState& state, const Eigen::VectorXd& y,
                           const ProtocolContext& ctx) {
  const auto n = static_cast<long>(state.u.size());
  const Eigen::VectorXd f = violation(y, ctx.y_lower, ctx.measured, static_cast<Index>(n));

  RoundOutput out;
  out.state.round = state.round + 1;
  out.state.u.resize(n);
  out.state.lambda.resize(n);

#pragma omp parallel for if (n >= kParallelAgentThreshold)
  for (long i = 0; i < n; ++i) {
    double beacons = 0.0;
    for (Index m : ctx.comm.neighbors(static_cast<Index>(i))) {
      beacons += state.lambda[static_cast<Eigen::Index>(m)];
    }
    const double target = state.u[i] + ctx.gains.eta1[i] * f[i] + ctx.gains.eta2[i] * beacons;
    out.state.lambda[i] = std::max(0.0, ctx.gains.eta3[i] * (target - ctx.u_upper[i]));
    out.state.u[i] = std::min(target, ctx.u_upper[i]);
  }
  out.messages = beacon_messages(ctx.comm, out.state.lambda);
  return out;
}

RoundOutput protocol_round_reference(const ProtocolState& state, const Eigen::VectorXd& y,
                                     const ProtocolContext& ctx) {
  const Index n = static_cast<Index>(state.u.size());
  const Eigen::MatrixXd a = adjacency_matrix(ctx.comm);
  Eigen::VectorXd a_lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0) {
        a_lambda[i] += a(i, j) * state.lambda[j];
      }
    }
  }
  const Eigen::VectorXd f = violation(y, ctx.y_lower, ctx.measured, n);
  const Eigen::VectorXd target = target_setpoint(state.u, f, a_lambda, ctx.gains);

  RoundOutput out;
  out.state.round = state.round + 1;
  out.state.lambda = beacon_update(target, ctx.u_upper, ctx.gains.eta3);
  out.state.u = project(target, ctx.u_upper);
  out.messages = beacon_messages(ctx.comm, out.state.lambda);
  return out;
}

bool is_equilibrium(const ProtocolState& prev, const ProtocolState& next, double eps_eq) {
  if (prev.u.size() != next.u.size() || prev.lambda.size() != next.lambda.size()) {
    throw std::invalid_argument("is_equilibrium: state dimensions differ");
  }
  if (prev.u.size() == 0) {
    return true;
  }
  return (next.u - prev.u).lpNorm<Eigen::Infinity>() <= eps_eq &&
         (next.lambda - prev.lambda).lpNorm<Eigen::Infinity>() <= eps_eq;
}

ProtocolGains default_gains(const PlantModel& plant, const Graph& comm,
                            const Eigen::VectorXd& u0) {
  const auto n = static_cast<Eigen::Index>(plant.control_dim());
  ProtocolGains g;
  g.eta3 = Eigen::VectorXd::Ones(n);
  const double norm_a = gain_condition(Eigen::VectorXd::Ones(n), g.eta3, adjacency_matrix(comm));
  g.eta2 = Eigen::VectorXd::Constant(n, norm_a > 0.0 ? kAutoGainMargin / norm_a : 1.0);

  g.eta1 = Eigen::VectorXd::Ones(n);
  if (plant.output_dim() > 0) {
    const auto probe = monotonicity_probe(plant, u0);
    for (Index k = 0; k < plant.output_dim(); ++k) {
      const auto node = static_cast<Eigen::Index>(plant.measured()[k]);
      const double s = probe.jacobian(static_cast<Eigen::Index>(k), node);
      if (s > 1e-9) {
        g.eta1[node] = kAutoGainMargin / s;
      }
    }
  }
  return g;
}

} // namespace ripple
