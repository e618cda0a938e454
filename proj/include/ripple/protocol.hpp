#pragma once

#include "ripple/graph.hpp"
#include "ripple/plant.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace ripple {

/// Per-agent step sizes: eta1 scales the local violation, eta2 the sum of
/// neighbour beacons, eta3 the beacon emitted on overshooting the limit.
struct ProtocolGains {
  Eigen::VectorXd eta1;
  Eigen::VectorXd eta2;
  Eigen::VectorXd eta3;

  Index size() const noexcept { return static_cast<Index>(eta1.size()); }
  /// Throws std::invalid_argument unless all three have length n and are > 0.
  void validate(Index n) const;
};

struct ProtocolState {
  Eigen::VectorXd u;
  Eigen::VectorXd lambda;
  long round = 0;

  static ProtocolState initial(Eigen::VectorXd u0);
};

struct Message {
  Index sender = 0;
  Index receiver = 0;
  double value = 0.0;

  friend bool operator==(const Message&, const Message&) = default;
};

using RoundMessages = std::vector<Message>;

/// Everything an agent group needs to run one synchronous round.
struct ProtocolContext {
  const Graph& comm;
  const ProtocolGains& gains;
  const Eigen::VectorXd& u_upper;
  const Eigen::VectorXd& y_lower;
  std::span<const Index> measured;
};

// Step 1: f_n = max(0, y_lower - y) on measured nodes, 0 elsewhere.
Eigen::VectorXd violation(const Eigen::VectorXd& y, const Eigen::VectorXd& y_lower,
                          std::span<const Index> measured, Index n);

// Step 2: target set point from local violation and neighbour beacons.
Eigen::VectorXd target_setpoint(const Eigen::VectorXd& u, const Eigen::VectorXd& f,
                                const Eigen::VectorXd& neighbor_beacons,
                                const ProtocolGains& gains);

// Step 3: beacon = max(0, eta3 * (target - upper)).
Eigen::VectorXd beacon_update(const Eigen::VectorXd& target, const Eigen::VectorXd& u_upper,
                              const Eigen::VectorXd& eta3);

// Step 4: clip the target at the upper control limit.
Eigen::VectorXd project(const Eigen::VectorXd& target, const Eigen::VectorXd& u_upper);

/// Spectral norm of diag(eta2) diag(eta3) A by power iteration on M^T M from
/// an all-ones seed, stopped once the eigen-residual is below 1e-9 relative.
double gain_condition(const Eigen::VectorXd& eta2, const Eigen::VectorXd& eta3,
                      const Eigen::MatrixXd& adjacency);

struct RoundOutput {
  ProtocolState state;
  RoundMessages messages;
};

/// One synchronous round given the plant output y(t) at state.u. Uses
/// lambda(t) in the target and emits messages from lambda(t+1). Agent
/// updates run in parallel for large agent counts.
RoundOutput protocol_round(const ProtocolState& state, const Eigen::VectorXd& y,
                           const ProtocolContext& ctx);

/// Literal composition of the four vector steps with a dense adjacency
/// matrix. Kept as the reference for `protocol_round`.
RoundOutput protocol_round_reference(const ProtocolState& state, const Eigen::VectorXd& y,
                                     const ProtocolContext& ctx);

RoundMessages beacon_messages(const Graph& comm, const Eigen::VectorXd& lambda);

bool is_equilibrium(const ProtocolState& prev, const ProtocolState& next, double eps_eq);

inline constexpr double kDefaultEquilibriumTol = 1e-8;
inline constexpr double kAutoGainMargin = 0.5;

/// eta3 = 1, uniform eta2 putting the spectral gain condition at 0.5, and
/// eta1_n = 0.5 / (dy_n/du_n) probed at u0 for measured agents (1 otherwise).
ProtocolGains default_gains(const PlantModel& plant, const Graph& comm,
                            const Eigen::VectorXd& u0);

} // namespace ripple
