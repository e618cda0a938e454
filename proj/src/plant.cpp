#include "ripple/plant.hpp"

#include "ripple/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

namespace ripple {

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd probe_column(const PlantModel& plant, const Eigen::VectorXd& u0, Index n,
                             double h) {
  Eigen::VectorXd up = u0;
  Eigen::VectorXd down = u0;
  up[static_cast<Eigen::Index>(n)] += h;
  down[static_cast<Eigen::Index>(n)] -= h;
  try {
    return (plant.solve(up) - plant.solve(down)) / (2.0 * h);
  } catch (const SolverFailure& e) {
    throw SolverFailure("probe direction " + std::to_string(n) + ": " + e.what(), e.control());
  }
}

ProbeResult finish_probe(Eigen::MatrixXd jac, double h, double tol_mono) {
  ProbeResult r;
  r.step = h;
  r.min_entry = jac.size() > 0 ? jac.minCoeff() : 0.0;
  r.monotone = r.min_entry >= -tol_mono;
  r.jacobian = std::move(jac);
  return r;
}

} // namespace

PlantModel::PlantModel(std::vector<Index> measured, PlantLimits limits)
    : measured_(std::move(measured)), limits_(std::move(limits)) {
  const auto n = limits_.u_lower.size();
  if (limits_.u_upper.size() != n) {
    throw InvalidModel("u_lower and u_upper differ in length");
  }
  if (static_cast<Index>(limits_.y_lower.size()) != measured_.size()) {
    throw InvalidModel("y_lower length must equal the number of measured nodes");
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (limits_.u_lower[k] > limits_.u_upper[k]) {
      throw InvalidModel("u_lower exceeds u_upper at control " + std::to_string(k));
    }
  }
  for (Index m : measured_) {
    if (m >= static_cast<Index>(n)) {
      throw InvalidModel("measured node " + std::to_string(m) + " out of range");
    }
  }
}

std::optional<Index> PlantModel::output_slot(Index node) const {
  const auto it = std::find(measured_.begin(), measured_.end(), node);
  if (it == measured_.end()) {
    return std::nullopt;
  }
  return static_cast<Index>(it - measured_.begin());
}

LinearPlant::LinearPlant(Eigen::MatrixXd gain, Eigen::VectorXd offset,
                         std::vector<Index> measured, PlantLimits limits)
    : PlantModel(std::move(measured), std::move(limits)), gain_(std::move(gain)),
      offset_(std::move(offset)) {
  if (static_cast<Index>(gain_.rows()) != output_dim() ||
      static_cast<Index>(gain_.cols()) != control_dim()) {
    throw InvalidModel("linear plant gain must be M x N");
  }
  if (offset_.size() != gain_.rows()) {
    throw InvalidModel("linear plant offset must have M entries");
  }
}

Eigen::VectorXd LinearPlant::solve(const Eigen::VectorXd& u) const {
  if (static_cast<Index>(u.size()) != control_dim()) {
    throw SolverFailure("control vector has wrong length", to_std(u));
  }
  return gain_ * u + offset_;
}

bool feasibility_check(const PlantModel& plant, const Eigen::VectorXd& u, double eps_feas) {
  if (((u - plant.u_lower()).array() < -eps_feas).any() ||
      ((u - plant.u_upper()).array() > eps_feas).any()) {
    return false;
  }
  const Eigen::VectorXd y = plant.solve(u);
  return ((y - plant.y_lower()).array() >= -eps_feas).all();
}

bool max_effort_feasibility(const PlantModel& plant, double eps_feas) {
  const Eigen::VectorXd y = plant.solve(plant.u_upper());
  return ((y - plant.y_lower()).array() >= -eps_feas).all();
}

double default_probe_step(const Eigen::VectorXd& u0) {
  const double scale = u0.size() > 0 ? u0.lpNorm<Eigen::Infinity>() : 0.0;
  return 1e-5 * std::max(1.0, scale);
}

ProbeResult monotonicity_probe_serial(const PlantModel& plant, const Eigen::VectorXd& u0,
                                      std::optional<double> step, double tol_mono) {
  const double h = step.value_or(default_probe_step(u0));
  const auto n = plant.control_dim();
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(plant.output_dim()),
                      static_cast<Eigen::Index>(n));
  for (Index k = 0; k < n; ++k) {
    jac.col(static_cast<Eigen::Index>(k)) = probe_column(plant, u0, k, h);
  }
  return finish_probe(std::move(jac), h, tol_mono);
}

ProbeResult monotonicity_probe(const PlantModel& plant, const Eigen::VectorXd& u0,
                               std::optional<double> step, double tol_mono) {
  const double h = step.value_or(default_probe_step(u0));
  const auto n = static_cast<long>(plant.control_dim());
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(plant.output_dim()), n);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    try {
      jac.col(k) = probe_column(plant, u0, static_cast<Index>(k), h);
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return finish_probe(std::move(jac), h, tol_mono);
}

} // namespace ripple
