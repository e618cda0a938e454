#pragma once

#include "ripple/graph.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ripple {

/// Box limits on controls and lower limits on measured outputs.
struct PlantLimits {
  Eigen::VectorXd u_lower;
  Eigen::VectorXd u_upper;
  Eigen::VectorXd y_lower;
};

/// Input-output map y = F(u) of a networked physical plant.
///
/// Controls are indexed by agent (one per node, N of them). Outputs are
/// reported only for the measured subset of nodes, in the order returned by
/// `measured()`. Implementations must be free of hidden mutable state so that
/// concurrent `solve` calls on one instance are safe.
class PlantModel {
public:
  virtual ~PlantModel() = default;

  Index control_dim() const noexcept { return static_cast<Index>(limits_.u_lower.size()); }
  Index output_dim() const noexcept { return measured_.size(); }
  const std::vector<Index>& measured() const noexcept { return measured_; }

  const Eigen::VectorXd& u_lower() const noexcept { return limits_.u_lower; }
  const Eigen::VectorXd& u_upper() const noexcept { return limits_.u_upper; }
  const Eigen::VectorXd& y_lower() const noexcept { return limits_.y_lower; }
  const PlantLimits& limits() const noexcept { return limits_; }

  /// Measured-output position of node `n`, if it is measured.
  std::optional<Index> output_slot(Index node) const;

  /// Throws a SolverFailure subclass when no output exists for `u`.
  virtual Eigen::VectorXd solve(const Eigen::VectorXd& u) const = 0;

  virtual std::string kind() const = 0;

protected:
  PlantModel(std::vector<Index> measured, PlantLimits limits);

private:
  std::vector<Index> measured_;
  PlantLimits limits_;
};

/// y = M u + c over the measured nodes. Monotone iff M >= 0 entrywise.
class LinearPlant final : public PlantModel {
public:
  LinearPlant(Eigen::MatrixXd gain, Eigen::VectorXd offset, std::vector<Index> measured,
              PlantLimits limits);

  Eigen::VectorXd solve(const Eigen::VectorXd& u) const override;
  std::string kind() const override { return "linear"; }

  const Eigen::MatrixXd& gain() const noexcept { return gain_; }
  const Eigen::VectorXd& offset() const noexcept { return offset_; }

private:
  Eigen::MatrixXd gain_;
  Eigen::VectorXd offset_;
};

inline constexpr double kDefaultFeasibilityTol = 1e-6;
inline constexpr double kDefaultMonotonicityTol = 1e-7;

/// u within the box and F(u) >= y_lower, each up to `eps_feas`.
bool feasibility_check(const PlantModel& plant, const Eigen::VectorXd& u,
                       double eps_feas = kDefaultFeasibilityTol);

/// F(u_upper) >= y_lower - eps_feas. Under a monotone plant this decides
/// whether any control in the box is feasible.
bool max_effort_feasibility(const PlantModel& plant, double eps_feas = kDefaultFeasibilityTol);

struct ProbeResult {
  Eigen::MatrixXd jacobian;  // M x N, central differences
  double step = 0.0;
  double min_entry = 0.0;
  bool monotone = false;
};

/// Default step 1e-5 * max(1, |u0|_inf).
double default_probe_step(const Eigen::VectorXd& u0);

/// Finite-difference sensitivity dy/du at u0; one pair of plant solves per
/// control direction, evaluated in parallel. Throws SolverFailure naming the
/// failing direction.
ProbeResult monotonicity_probe(const PlantModel& plant, const Eigen::VectorXd& u0,
                               std::optional<double> step = std::nullopt,
                               double tol_mono = kDefaultMonotonicityTol);

/// Serial reference for `monotonicity_probe`; results are bit-identical.
ProbeResult monotonicity_probe_serial(const PlantModel& plant, const Eigen::VectorXd& u0,
                                      std::optional<double> step = std::nullopt,
                                      double tol_mono = kDefaultMonotonicityTol);

} // namespace ripple
