#include "ripple/power.hpp"

#include "ripple/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <queue>
#include <string>

namespace ripple::power {

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::MatrixXd block(const Eigen::MatrixXd& b, const std::vector<Index>& rows,
                      const std::vector<Index>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (Index r = 0; r < rows.size(); ++r) {
    for (Index c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          b(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
    }
  }
  return out;
}

Eigen::FullPivLU<Eigen::MatrixXd> factor_or_throw(const Eigen::MatrixXd& g,
                                                  const Eigen::VectorXd& v_L) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
  if (!lu.isInvertible()) {
    throw SingularJacobian("power-flow Newton matrix is singular", to_std(v_L));
  }
  return lu;
}

SweepRow sweep_point(const GridModel& grid, const Eigen::VectorXd& q_L_nominal,
                     const Eigen::VectorXd& v_G, double scale) {
  SweepRow row;
  row.scale = scale;
  row.lambda_min = std::numeric_limits<double>::quiet_NaN();
  const Eigen::VectorXd q = scale * q_L_nominal;
  try {
    const auto sol = solve_load_voltages(q, v_G, grid);
    row.solved = true;
    row.iterations = sol.iterations;
    row.lambda_min = prop1_condition(sol, q, grid);
  } catch (const SolverFailure&) {
    row.solved = false;
  }
  return row;
}

} // namespace

GridModel::GridModel(Graph graph, std::vector<double> susceptances,
                     std::vector<BusType> bus_types)
    : graph_(std::move(graph)), susceptances_(std::move(susceptances)),
      bus_types_(std::move(bus_types)) {
  if (bus_types_.size() != graph_.node_count()) {
    throw InvalidModel("bus type list length differs from bus count");
  }
  b_ = weighted_laplacian(graph_, susceptances_);
  for (Index n = 0; n < bus_types_.size(); ++n) {
    (bus_types_[n] == BusType::Generator ? generators_ : loads_).push_back(n);
  }
  if (generators_.empty()) {
    throw InvalidModel("grid has no generator bus");
  }
  // Every load must reach a generator, otherwise B_LL is singular.
  std::vector<bool> seen(bus_count(), false);
  std::queue<Index> frontier;
  for (Index g : generators_) {
    seen[g] = true;
    frontier.push(g);
  }
  while (!frontier.empty()) {
    const Index n = frontier.front();
    frontier.pop();
    for (Index m : graph_.neighbors(n)) {
      if (!seen[m]) {
        seen[m] = true;
        frontier.push(m);
      }
    }
  }
  for (Index n : loads_) {
    if (!seen[n]) {
      throw InvalidModel("load bus " + std::to_string(n) + " is not connected to any generator");
    }
  }
  b_gg_ = block(b_, generators_, generators_);
  b_lg_ = block(b_, loads_, generators_);
  b_ll_ = block(b_, loads_, loads_);
}

Eigen::VectorXd reactive_injections(const Eigen::VectorXd& v, const Eigen::MatrixXd& B) {
  return v.cwiseProduct(B * v);
}

PowerFlowSolution solve_load_voltages(const Eigen::VectorXd& q_L, const Eigen::VectorXd& v_G,
                                      const GridModel& grid, std::optional<Eigen::VectorXd> v_L0,
                                      const NewtonOptions& opts) {
  const auto n_load = static_cast<Eigen::Index>(grid.loads().size());
  const auto n_gen = static_cast<Eigen::Index>(grid.generators().size());
  if (q_L.size() != n_load || v_G.size() != n_gen) {
    throw InvalidModel("q_L / v_G dimensions do not match the grid partition");
  }
  if ((v_G.array() <= 0.0).any()) {
    throw PowerFlowInfeasible("generator voltages must be positive", to_std(v_G));
  }

  const Eigen::MatrixXd& bll = grid.B_LL();
  const Eigen::VectorXd drive = grid.B_LG() * v_G;
  auto mismatch = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return v.cwiseProduct(drive + bll * v) - q_L;
  };

  PowerFlowSolution sol;
  Eigen::VectorXd v = v_L0.value_or(Eigen::VectorXd::Ones(n_load));
  Eigen::VectorXd r = mismatch(v);
  bool converged = false;

  for (int it = 0; it <= opts.max_iterations; ++it) {
    const double norm_inf = r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
    if (norm_inf <= opts.tolerance) {
      converged = true;
      sol.iterations = it;
      break;
    }
    if (it == opts.max_iterations) {
      break;
    }
    const Eigen::VectorXd i_L = drive + bll * v;
    const Eigen::MatrixXd g = i_L.asDiagonal().toDenseMatrix() + v.asDiagonal() * bll;
    const auto lu = factor_or_throw(g, v);
    const Eigen::VectorXd dv = -lu.solve(r);

    const double norm2 = r.norm();
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k <= opts.max_halvings; ++k, alpha *= 0.5) {
      const Eigen::VectorXd trial = v + alpha * dv;
      if ((trial.array() <= 0.0).any()) {
        continue;
      }
      Eigen::VectorXd rt = mismatch(trial);
      if (rt.norm() < norm2) {
        v = trial;
        r = std::move(rt);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw PowerFlowInfeasible("power flow stalled: no damped Newton step reduces the mismatch",
                                to_std(q_L));
    }
  }
  if (!converged) {
    throw PowerFlowInfeasible("power flow did not converge in " +
                                  std::to_string(opts.max_iterations) + " iterations",
                              to_std(q_L));
  }

  // One polishing step keeps finite-difference probes clear of solver noise.
  if (n_load > 0) {
    const Eigen::VectorXd i_L = drive + bll * v;
    const Eigen::MatrixXd g = i_L.asDiagonal().toDenseMatrix() + v.asDiagonal() * bll;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
    if (lu.isInvertible()) {
      const Eigen::VectorXd trial = v - lu.solve(r);
      Eigen::VectorXd rt = mismatch(trial);
      if ((trial.array() > 0.0).all() &&
          rt.lpNorm<Eigen::Infinity>() < r.lpNorm<Eigen::Infinity>()) {
        v = trial;
        r = std::move(rt);
      }
    }
  }

  sol.v_L = v;
  sol.i_L = drive + bll * v;
  sol.residual = r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
  sol.q_G = v_G.cwiseProduct(grid.B_GG() * v_G + grid.B_LG().transpose() * v);
  return sol;
}

Eigen::MatrixXd newton_matrix(const PowerFlowSolution& sol, const GridModel& grid) {
  return sol.i_L.asDiagonal().toDenseMatrix() + sol.v_L.asDiagonal() * grid.B_LL();
}

Eigen::MatrixXd jacobian_vL_qL(const PowerFlowSolution& sol, const GridModel& grid) {
  const auto lu = factor_or_throw(newton_matrix(sol, grid), sol.v_L);
  return lu.inverse();
}

Eigen::MatrixXd jacobian_vL_vG(const PowerFlowSolution& sol, const GridModel& grid) {
  const auto lu = factor_or_throw(newton_matrix(sol, grid), sol.v_L);
  const Eigen::MatrixXd rhs = sol.v_L.asDiagonal() * grid.B_LG();
  return -lu.solve(rhs);
}

double prop1_condition(const PowerFlowSolution& sol, const Eigen::VectorXd& q_L,
                       const GridModel& grid) {
  if (q_L.size() == 0) {
    return std::numeric_limits<double>::infinity();
  }
  const Eigen::VectorXd g_L = q_L.cwiseQuotient(sol.v_L.cwiseAbs2());
  const Eigen::MatrixXd m = g_L.asDiagonal().toDenseMatrix() + grid.B_LL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

std::vector<SweepRow> loadability_sweep_serial(const GridModel& grid,
                                               const Eigen::VectorXd& q_L_nominal,
                                               const Eigen::VectorXd& v_G,
                                               std::span<const double> scales) {
  std::vector<SweepRow> rows;
  rows.reserve(scales.size());
  for (double s : scales) {
    rows.push_back(sweep_point(grid, q_L_nominal, v_G, s));
  }
  return rows;
}

std::vector<SweepRow> loadability_sweep(const GridModel& grid, const Eigen::VectorXd& q_L_nominal,
                                        const Eigen::VectorXd& v_G,
                                        std::span<const double> scales) {
  std::vector<SweepRow> rows(scales.size());
  const auto n = static_cast<long>(scales.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    rows[static_cast<std::size_t>(k)] =
        sweep_point(grid, q_L_nominal, v_G, scales[static_cast<std::size_t>(k)]);
  }
  return rows;
}

PowerPlant::PowerPlant(GridModel grid, PlantLimits limits)
    : PlantModel(grid.loads(), std::move(limits)), grid_(std::move(grid)) {
  if (control_dim() != grid_.bus_count()) {
    throw InvalidModel("power plant limits must be bus-indexed");
  }
}

Eigen::VectorXd PowerPlant::q_L(const Eigen::VectorXd& u) const {
  Eigen::VectorXd q(static_cast<Eigen::Index>(grid_.loads().size()));
  for (Index k = 0; k < grid_.loads().size(); ++k) {
    q[static_cast<Eigen::Index>(k)] = u[static_cast<Eigen::Index>(grid_.loads()[k])];
  }
  return q;
}

Eigen::VectorXd PowerPlant::v_G(const Eigen::VectorXd& u) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid_.generators().size()));
  for (Index k = 0; k < grid_.generators().size(); ++k) {
    v[static_cast<Eigen::Index>(k)] = u[static_cast<Eigen::Index>(grid_.generators()[k])];
  }
  return v;
}

PowerFlowSolution PowerPlant::solve_full(const Eigen::VectorXd& u) const {
  if (static_cast<Index>(u.size()) != grid_.bus_count()) {
    throw SolverFailure("control vector has wrong length", to_std(u));
  }
  try {
    return solve_load_voltages(q_L(u), v_G(u), grid_);
  } catch (const PowerFlowInfeasible& e) {
    throw PowerFlowInfeasible(e.what(), to_std(u));
  } catch (const SingularJacobian& e) {
    throw SingularJacobian(e.what(), to_std(u));
  }
}

Eigen::VectorXd PowerPlant::solve(const Eigen::VectorXd& u) const { return solve_full(u).v_L; }

Eigen::MatrixXd PowerPlant::control_jacobian(const PowerFlowSolution& sol) const {
  const Eigen::MatrixXd jq = jacobian_vL_qL(sol, grid_);
  const Eigen::MatrixXd jv = jacobian_vL_vG(sol, grid_);
  Eigen::MatrixXd j(static_cast<Eigen::Index>(grid_.loads().size()),
                    static_cast<Eigen::Index>(grid_.bus_count()));
  for (Index k = 0; k < grid_.loads().size(); ++k) {
    j.col(static_cast<Eigen::Index>(grid_.loads()[k])) = jq.col(static_cast<Eigen::Index>(k));
  }
  for (Index k = 0; k < grid_.generators().size(); ++k) {
    j.col(static_cast<Eigen::Index>(grid_.generators()[k])) =
        jv.col(static_cast<Eigen::Index>(k));
  }
  return j;
}

} // namespace ripple::power
