#pragma once

#include "ripple/graph.hpp"
#include "ripple/plant.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace ripple::power {

enum class BusType { Generator, Load };

/// Lossless reactive-power / voltage-magnitude grid, q = diag(v) B v.
///
/// All quantities are per-unit. Buses are split into generators (voltage
/// controlled) and loads (reactive injection controlled); the block views
/// of B follow that split with each block ordered by ascending bus index.
class GridModel {
public:
  GridModel(Graph graph, std::vector<double> susceptances, std::vector<BusType> bus_types);

  const Graph& graph() const noexcept { return graph_; }
  std::span<const double> susceptances() const noexcept { return susceptances_; }
  std::span<const BusType> bus_types() const noexcept { return bus_types_; }
  Index bus_count() const noexcept { return graph_.node_count(); }

  const std::vector<Index>& generators() const noexcept { return generators_; }
  const std::vector<Index>& loads() const noexcept { return loads_; }

  const Eigen::MatrixXd& B() const noexcept { return b_; }
  const Eigen::MatrixXd& B_GG() const noexcept { return b_gg_; }
  const Eigen::MatrixXd& B_LG() const noexcept { return b_lg_; }  // |L| x |G|
  const Eigen::MatrixXd& B_LL() const noexcept { return b_ll_; }

private:
  Graph graph_;
  std::vector<double> susceptances_;
  std::vector<BusType> bus_types_;
  std::vector<Index> generators_;
  std::vector<Index> loads_;
  Eigen::MatrixXd b_;
  Eigen::MatrixXd b_gg_;
  Eigen::MatrixXd b_lg_;
  Eigen::MatrixXd b_ll_;
};

struct PowerFlowSolution {
  Eigen::VectorXd v_L;
  Eigen::VectorXd q_G;
  Eigen::VectorXd i_L;  // B_LG v_G + B_LL v_L
  int iterations = 0;
  double residual = 0.0;  // |diag(v_L) i_L - q_L|_inf
};

struct NewtonOptions {
  int max_iterations = 50;
  int max_halvings = 10;
  double tolerance = 1e-10;
};

/// q_n = v_n (B v)_n.
Eigen::VectorXd reactive_injections(const Eigen::VectorXd& v, const Eigen::MatrixXd& B);

/// Damped Newton solve of diag(v_L)(B_LG v_G + B_LL v_L) = q_L for v_L, flat
/// start unless `v_L0` is given. Throws PowerFlowInfeasible on
/// non-convergence and SingularJacobian when the Newton matrix is singular.
PowerFlowSolution solve_load_voltages(const Eigen::VectorXd& q_L, const Eigen::VectorXd& v_G,
                                      const GridModel& grid,
                                      std::optional<Eigen::VectorXd> v_L0 = std::nullopt,
                                      const NewtonOptions& opts = {});

/// G = diag(i_L) + diag(v_L) B_LL.
Eigen::MatrixXd newton_matrix(const PowerFlowSolution& sol, const GridModel& grid);

/// dv_L/dq_L = G^-1.
Eigen::MatrixXd jacobian_vL_qL(const PowerFlowSolution& sol, const GridModel& grid);

/// dv_L/dv_G = -G^-1 diag(v_L) B_LG.
Eigen::MatrixXd jacobian_vL_vG(const PowerFlowSolution& sol, const GridModel& grid);

/// Smallest eigenvalue of diag(q_L / v_L^2) + B_LL. Positive values certify
/// a monotone input-output map at this operating point.
double prop1_condition(const PowerFlowSolution& sol, const Eigen::VectorXd& q_L,
                       const GridModel& grid);

struct SweepRow {
  double scale = 0.0;
  bool solved = false;
  double lambda_min = 0.0;  // NaN when unsolved
  int iterations = 0;
};

/// Scales q_L_nominal by each multiplier, solving from a flat start each time.
/// Failures are recorded in the rows, never thrown.
std::vector<SweepRow> loadability_sweep(const GridModel& grid, const Eigen::VectorXd& q_L_nominal,
                                        const Eigen::VectorXd& v_G,
                                        std::span<const double> scales);

std::vector<SweepRow> loadability_sweep_serial(const GridModel& grid,
                                               const Eigen::VectorXd& q_L_nominal,
                                               const Eigen::VectorXd& v_G,
                                               std::span<const double> scales);

/// Grid as a plant: control u is bus-indexed (v_n on generators, q_n on
/// loads), output is v_L over all load buses.
class PowerPlant final : public PlantModel {
public:
  PowerPlant(GridModel grid, PlantLimits limits);

  Eigen::VectorXd solve(const Eigen::VectorXd& u) const override;
  std::string kind() const override { return "power"; }

  const GridModel& grid() const noexcept { return grid_; }

  Eigen::VectorXd q_L(const Eigen::VectorXd& u) const;
  Eigen::VectorXd v_G(const Eigen::VectorXd& u) const;
  PowerFlowSolution solve_full(const Eigen::VectorXd& u) const;

  /// Analytic dy/du (|L| x N, bus-indexed columns) assembled from both blocks.
  Eigen::MatrixXd control_jacobian(const PowerFlowSolution& sol) const;

private:
  GridModel grid_;
};

} // namespace ripple::power
