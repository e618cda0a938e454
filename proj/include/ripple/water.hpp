#pragma once

#include "ripple/graph.hpp"
#include "ripple/plant.hpp"

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace ripple::water {

inline constexpr double kDarcyWeisbachExponent = 2.0;
inline constexpr double kHazenWilliamsExponent = 1.852;
/// Below this flow magnitude (m^3/hr) pipe laws switch to a linear segment.
inline constexpr double kFlowRegularization = 1e-3;

/// Pressure-drop law rho(sigma) of one edge, with sigma measured from the
/// edge's `from` node to its `to` node.
///
/// Pipes: c * sign(sigma) * |sigma|^e. Pumps: a constant boost `gain` in
/// the from->to direction, optionally in series with a pipe segment of
/// coefficient `coefficient` (zero means an ideal fixed-speed pump).
struct EdgeLaw {
  enum class Kind { Pipe, Pump };

  Kind kind = Kind::Pipe;
  double coefficient = 0.0;
  double exponent = kDarcyWeisbachExponent;
  double gain = 0.0;

  static EdgeLaw darcy_weisbach(double c) { return {Kind::Pipe, c, kDarcyWeisbachExponent, 0.0}; }
  static EdgeLaw hazen_williams(double c) { return {Kind::Pipe, c, kHazenWilliamsExponent, 0.0}; }
  static EdgeLaw pump(double gain, double series_coefficient = 0.0,
                      double exponent = kDarcyWeisbachExponent) {
    return {Kind::Pump, series_coefficient, exponent, gain};
  }

  bool is_ideal_pump() const noexcept { return kind == Kind::Pump && coefficient == 0.0; }

  /// Throws InvalidModel on nonpositive pipe coefficients and similar.
  void validate() const;

  friend bool operator==(const EdgeLaw&, const EdgeLaw&) = default;
};

/// pi_from - pi_to for flow sigma along the edge.
double edge_pressure_drop(double sigma, const EdgeLaw& law);

struct HydraulicSolution {
  Eigen::VectorXd pressure;   // per node (m)
  Eigen::VectorXd flow;       // per edge, from -> to (m^3/hr)
  Eigen::VectorXd injection;  // per node; solved for pressure-controlled nodes
  double residual = 0.0;      // max flow imbalance at demand nodes
  int iterations = 0;
};

/// Pressure-driven network: pressure-controlled (reservoir / fixed tank)
/// nodes and demand-controlled nodes joined by monotone edge laws.
///
/// Ideal pumps are handled by tying the pressures of their endpoints with a
/// fixed offset; they must form a forest and each such tied group may hold
/// at most one pressure-controlled node.
class WaterModel {
public:
  WaterModel(Graph graph, std::vector<EdgeLaw> laws, std::vector<bool> pressure_controlled);

  const Graph& graph() const noexcept { return graph_; }
  const std::vector<EdgeLaw>& laws() const noexcept { return laws_; }
  bool is_pressure_controlled(Index n) const { return pressure_controlled_.at(n); }
  Index node_count() const noexcept { return graph_.node_count(); }

  std::vector<Index> demand_nodes() const;

  struct Topology;  // pump-group bookkeeping, defined in water.cpp
  const Topology& topology() const noexcept { return *topo_; }

private:
  Graph graph_;
  std::vector<EdgeLaw> laws_;
  std::vector<bool> pressure_controlled_;
  std::shared_ptr<const Topology> topo_;
};

struct HydraulicOptions {
  int max_iterations = 100;
  double tolerance = 1e-9;
};

/// Solve flow balance and edge laws for control u (node-indexed: pressure
/// on pressure-controlled nodes, injection elsewhere). Throws
/// HydraulicInfeasible on non-convergence and InvalidOperatingPoint on
/// reverse pump flow.
HydraulicSolution solve_network(const Eigen::VectorXd& u, const WaterModel& model,
                                const HydraulicOptions& opts = {});

/// Requires u >= u_prime entrywise. True iff demand-node pressures under u
/// dominate those under u_prime up to 1e-6.
bool lemma1_monotonicity_test(const WaterModel& model, const Eigen::VectorXd& u,
                              const Eigen::VectorXd& u_prime);

/// The network as a plant: output is pressure over `measured` demand nodes.
class WaterPlant final : public PlantModel {
public:
  WaterPlant(WaterModel model, std::vector<Index> measured, PlantLimits limits);

  Eigen::VectorXd solve(const Eigen::VectorXd& u) const override;
  std::string kind() const override { return "water"; }

  const WaterModel& model() const noexcept { return model_; }

private:
  WaterModel model_;
};

} // namespace ripple::water
