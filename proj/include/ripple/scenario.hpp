#pragma once

#include "ripple/graph.hpp"
#include "ripple/plant.hpp"
#include "ripple/protocol.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ripple {

inline constexpr const char* kScenarioSchema = "ripple-scenario/1";

// Plant descriptions keep the units of the scenario file (MVAr, m, m^3/hr);
// conversion happens in build_plant so that files round-trip exactly.

struct PowerBus {
  std::string id;
  bool generator = false;
  double v = 1.0;            // generator set point (p.u.)
  double v_min = 1.0;        // generator control box
  double v_max = 1.0;
  double q_mvar = 0.0;       // load reactive injection, negative when consuming
  double q_min_mvar = 0.0;   // load control box
  double q_max_mvar = 0.0;
  double v_threshold = 0.0;  // load output lower limit (p.u.)

  friend bool operator==(const PowerBus&, const PowerBus&) = default;
};

struct PowerLine {
  std::string from;
  std::string to;
  double susceptance = 0.0;  // p.u.

  friend bool operator==(const PowerLine&, const PowerLine&) = default;
};

struct PowerCase {
  double base_mva = 100.0;
  std::vector<PowerBus> buses;
  std::vector<PowerLine> lines;

  friend bool operator==(const PowerCase&, const PowerCase&) = default;
};

enum class WaterRole { Reservoir, Tank, Junction, Consumer };

struct WaterNode {
  std::string id;
  WaterRole role = WaterRole::Junction;
  bool fixed_pressure = false;  // tanks only: pressure-controlled instead of injection
  double pressure = 0.0;        // control for pressure-controlled nodes (m)
  double pressure_min = 0.0;
  double pressure_max = 0.0;
  double demand = 0.0;          // injection for the others (m^3/hr, < 0 consumes)
  double demand_min = 0.0;
  double demand_max = 0.0;
  std::optional<double> min_pressure;  // output requirement; measured iff set

  bool pressure_controlled() const noexcept {
    return role == WaterRole::Reservoir || (role == WaterRole::Tank && fixed_pressure);
  }

  friend bool operator==(const WaterNode&, const WaterNode&) = default;
};

struct WaterEdge {
  std::string id;
  std::string from;
  std::string to;
  std::string law = "darcy_weisbach";  // darcy_weisbach | hazen_williams | pump
  double coefficient = 0.0;
  double gain = 0.0;

  friend bool operator==(const WaterEdge&, const WaterEdge&) = default;
};

struct WaterCase {
  std::vector<WaterNode> nodes;
  std::vector<WaterEdge> edges;

  friend bool operator==(const WaterCase&, const WaterCase&) = default;
};

/// y = gain * u + offset over `measured` agents.
struct LinearCase {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> gain;
  std::vector<double> offset;
  std::vector<Index> measured;
  std::vector<double> u_nominal;
  std::vector<double> u_lower;
  std::vector<double> u_upper;
  std::vector<double> y_lower;

  friend bool operator==(const LinearCase&, const LinearCase&) = default;
};

using PlantDescription = std::variant<PowerCase, WaterCase, LinearCase>;

struct DisruptionEvent {
  enum class Kind { None, RemoveEdge, NodeOutage, DemandChange, ParameterChange };

  Kind kind = Kind::None;
  std::string node;     // NodeOutage, DemandChange
  std::string from;     // RemoveEdge / ParameterChange by endpoints
  std::string to;
  std::string edge;     // or by water edge id
  std::string field;    // DemandChange: "value"|"scale"; ParameterChange: parameter name
  double value = 0.0;
  bool shift_limits = true;  // DemandChange moves the control box with the nominal value
  std::vector<std::string> nodes;  // DemandChange scale over several nodes

  friend bool operator==(const DisruptionEvent&, const DisruptionEvent&) = default;
};

struct GainSpec {
  std::vector<double> eta1;
  std::vector<double> eta2;
  std::vector<double> eta3;

  friend bool operator==(const GainSpec&, const GainSpec&) = default;
};

struct RunConfig {
  long budget = 100'000;
  double eps_eq = kDefaultEquilibriumTol;
  double eps_feas = kDefaultFeasibilityTol;
  long trace_decimation = 1;
  std::uint64_t seed = 0;
  long stall_window = 100;
  bool override_gain_check = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct Scenario {
  std::string schema = kScenarioSchema;
  std::string name;
  PlantDescription plant;
  std::vector<std::pair<std::string, std::string>> comm_edges;
  std::optional<GainSpec> gains;  // nullopt means automatic
  std::optional<std::vector<double>> u0;
  std::vector<DisruptionEvent> disruption;
  RunConfig run;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// A plant instance plus the labels and nominal controls it was built from.
struct BuiltPlant {
  std::shared_ptr<const PlantModel> plant;
  std::vector<std::string> labels;
  Eigen::VectorXd u_nominal;
};

BuiltPlant build_plant(const PlantDescription& desc);

std::vector<std::string> node_labels(const PlantDescription& desc);

/// Returns the post-event description; `desc` is untouched. Throws
/// InvalidScenario for references to nonexistent components.
PlantDescription apply_disruption(const PlantDescription& desc, const DisruptionEvent& event);

/// Communication overlay over the plant's node labels.
Graph build_comm_graph(const Scenario& s, const std::vector<std::string>& labels);

/// Fully validated input to the simulation loop.
struct PreparedRun {
  std::string name;
  BuiltPlant built;
  Graph comm;
  ProtocolGains gains;
  Eigen::VectorXd u0;
  double gain_norm = 0.0;
  RunConfig run;
};

/// Everything `prepare` does except the overlay connectivity and gain
/// condition checks, for diagnostics that report on them.
PreparedRun assemble(const Scenario& s);

/// Applies the disruption, builds plant and overlay, resolves gains and u0,
/// and checks: connected overlay, u0 inside the box, gain condition < 1
/// (unless overridden) and a solvable plant at u0. Throws InvalidScenario.
PreparedRun prepare(const Scenario& s);

} // namespace ripple
