#include "ripple/scenario.hpp"

#include "ripple/errors.hpp"
#include "ripple/power.hpp"
#include "ripple/water.hpp"

#include <algorithm>
#include <map>

namespace ripple {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::map<std::string, Index> index_labels(const std::vector<std::string>& labels) {
  std::map<std::string, Index> out;
  for (Index k = 0; k < labels.size(); ++k) {
    if (!out.emplace(labels[k], k).second) {
      throw InvalidScenario("duplicate node label '" + labels[k] + "'");
    }
  }
  return out;
}

Index resolve(const std::map<std::string, Index>& idx, const std::string& label,
              const std::string& what) {
  const auto it = idx.find(label);
  if (it == idx.end()) {
    throw InvalidScenario(what + " references unknown node '" + label + "'");
  }
  return it->second;
}

water::EdgeLaw edge_law(const WaterEdge& e) {
  if (e.law == "darcy_weisbach") {
    return water::EdgeLaw::darcy_weisbach(e.coefficient);
  }
  if (e.law == "hazen_williams") {
    return water::EdgeLaw::hazen_williams(e.coefficient);
  }
  if (e.law == "pump") {
    return water::EdgeLaw::pump(e.gain, e.coefficient);
  }
  throw InvalidScenario("edge '" + e.id + "' has unknown law '" + e.law + "'");
}

BuiltPlant build_power(const PowerCase& pc) {
  BuiltPlant out;
  for (const auto& b : pc.buses) {
    out.labels.push_back(b.id);
  }
  const auto idx = index_labels(out.labels);
  if (!(pc.base_mva > 0.0)) {
    throw InvalidScenario("base_mva must be positive");
  }
  std::vector<Edge> edges;
  std::vector<double> b;
  for (const auto& l : pc.lines) {
    edges.push_back({resolve(idx, l.from, "line"), resolve(idx, l.to, "line")});
    b.push_back(l.susceptance);
  }
  std::vector<power::BusType> types;
  const auto n = static_cast<Eigen::Index>(pc.buses.size());
  PlantLimits lim{Eigen::VectorXd(n), Eigen::VectorXd(n), {}};
  out.u_nominal.resize(n);
  std::vector<double> y_lower;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& bus = pc.buses[static_cast<Index>(k)];
    types.push_back(bus.generator ? power::BusType::Generator : power::BusType::Load);
    if (bus.generator) {
      out.u_nominal[k] = bus.v;
      lim.u_lower[k] = bus.v_min;
      lim.u_upper[k] = bus.v_max;
    } else {
      out.u_nominal[k] = bus.q_mvar / pc.base_mva;
      lim.u_lower[k] = bus.q_min_mvar / pc.base_mva;
      lim.u_upper[k] = bus.q_max_mvar / pc.base_mva;
      y_lower.push_back(bus.v_threshold);
    }
  }
  lim.y_lower = to_eigen(y_lower);
  power::GridModel grid(Graph(static_cast<Index>(n), std::move(edges)), std::move(b),
                        std::move(types));
  out.plant = std::make_shared<power::PowerPlant>(std::move(grid), std::move(lim));
  return out;
}

BuiltPlant build_water(const WaterCase& wc) {
  BuiltPlant out;
  for (const auto& nd : wc.nodes) {
    out.labels.push_back(nd.id);
  }
  const auto idx = index_labels(out.labels);
  std::vector<Edge> edges;
  std::vector<water::EdgeLaw> laws;
  for (const auto& e : wc.edges) {
    edges.push_back({resolve(idx, e.from, "edge '" + e.id + "'"),
                     resolve(idx, e.to, "edge '" + e.id + "'")});
    laws.push_back(edge_law(e));
  }
  const auto n = static_cast<Eigen::Index>(wc.nodes.size());
  PlantLimits lim{Eigen::VectorXd(n), Eigen::VectorXd(n), {}};
  out.u_nominal.resize(n);
  std::vector<bool> fixed;
  std::vector<Index> measured;
  std::vector<double> y_lower;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& nd = wc.nodes[static_cast<Index>(k)];
    fixed.push_back(nd.pressure_controlled());
    if (nd.pressure_controlled()) {
      out.u_nominal[k] = nd.pressure;
      lim.u_lower[k] = nd.pressure_min;
      lim.u_upper[k] = nd.pressure_max;
      if (nd.min_pressure) {
        throw InvalidScenario("node '" + nd.id +
                              "' is pressure-controlled and cannot carry min_pressure");
      }
    } else {
      out.u_nominal[k] = nd.demand;
      lim.u_lower[k] = nd.demand_min;
      lim.u_upper[k] = nd.demand_max;
      if (nd.min_pressure) {
        measured.push_back(static_cast<Index>(k));
        y_lower.push_back(*nd.min_pressure);
      }
    }
  }
  lim.y_lower = to_eigen(y_lower);
  water::WaterModel model(Graph(static_cast<Index>(n), std::move(edges)), std::move(laws),
                          std::move(fixed));
  out.plant =
      std::make_shared<water::WaterPlant>(std::move(model), std::move(measured), std::move(lim));
  return out;
}

BuiltPlant build_linear(const LinearCase& lc) {
  BuiltPlant out;
  const Index n = lc.u_nominal.size();
  out.labels = lc.labels;
  if (out.labels.empty()) {
    for (Index k = 0; k < n; ++k) {
      out.labels.push_back(std::to_string(k));
    }
  }
  index_labels(out.labels);
  if (out.labels.size() != n || lc.u_lower.size() != n || lc.u_upper.size() != n) {
    throw InvalidScenario("linear plant vectors must all have one entry per agent");
  }
  const Index m = lc.measured.size();
  if (lc.gain.size() != m || lc.offset.size() != m || lc.y_lower.size() != m) {
    throw InvalidScenario("linear plant gain/offset/y_lower must have one row per measured agent");
  }
  Eigen::MatrixXd gain(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (Index r = 0; r < m; ++r) {
    if (lc.gain[r].size() != n) {
      throw InvalidScenario("linear plant gain row " + std::to_string(r) + " has wrong length");
    }
    for (Index c = 0; c < n; ++c) {
      gain(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = lc.gain[r][c];
    }
  }
  out.u_nominal = to_eigen(lc.u_nominal);
  out.plant = std::make_shared<LinearPlant>(
      std::move(gain), to_eigen(lc.offset), lc.measured,
      PlantLimits{to_eigen(lc.u_lower), to_eigen(lc.u_upper), to_eigen(lc.y_lower)});
  return out;
}

void shift_control(double& nominal, double& lo, double& hi, const DisruptionEvent& ev) {
  double next = nominal;
  if (ev.field == "scale") {
    next = nominal * ev.value;
  } else if (ev.field.empty() || ev.field == "value") {
    next = ev.value;
  } else {
    throw InvalidScenario("demand_change field must be 'value' or 'scale'");
  }
  if (ev.shift_limits) {
    lo += next - nominal;
    hi += next - nominal;
  }
  nominal = next;
}

std::vector<std::string> event_nodes(const DisruptionEvent& ev) {
  auto nodes = ev.nodes;
  if (!ev.node.empty()) {
    nodes.push_back(ev.node);
  }
  if (nodes.empty()) {
    throw InvalidScenario("disruption event names no node");
  }
  return nodes;
}

bool same_endpoints(const std::string& a, const std::string& b, const DisruptionEvent& ev) {
  return (a == ev.from && b == ev.to) || (a == ev.to && b == ev.from);
}

PowerCase disrupt_power(PowerCase pc, const DisruptionEvent& ev) {
  auto find_bus = [&](const std::string& id) -> PowerBus& {
    const auto it = std::find_if(pc.buses.begin(), pc.buses.end(),
                                 [&](const PowerBus& b) { return b.id == id; });
    if (it == pc.buses.end()) {
      throw InvalidScenario("disruption references unknown bus '" + id + "'");
    }
    return *it;
  };
  auto find_line = [&]() {
    const auto it = std::find_if(pc.lines.begin(), pc.lines.end(), [&](const PowerLine& l) {
      return same_endpoints(l.from, l.to, ev);
    });
    if (it == pc.lines.end()) {
      throw InvalidScenario("disruption references unknown line " + ev.from + "-" + ev.to);
    }
    return it;
  };
  using K = DisruptionEvent::Kind;
  switch (ev.kind) {
  case K::None:
    break;
  case K::RemoveEdge:
    pc.lines.erase(find_line());
    break;
  case K::NodeOutage: {
    PowerBus& b = find_bus(ev.node);
    b.generator = false;
    b.q_mvar = b.q_min_mvar = b.q_max_mvar = 0.0;
    break;
  }
  case K::DemandChange:
    for (const auto& id : event_nodes(ev)) {
      PowerBus& b = find_bus(id);
      if (b.generator) {
        throw InvalidScenario("demand_change targets generator bus '" + id + "'");
      }
      shift_control(b.q_mvar, b.q_min_mvar, b.q_max_mvar, ev);
    }
    break;
  case K::ParameterChange: {
    if (ev.field != "susceptance") {
      throw InvalidScenario("power parameter_change supports field 'susceptance'");
    }
    find_line()->susceptance = ev.value;
    break;
  }
  }
  return pc;
}

WaterCase disrupt_water(WaterCase wc, const DisruptionEvent& ev) {
  auto find_node = [&](const std::string& id) -> WaterNode& {
    const auto it = std::find_if(wc.nodes.begin(), wc.nodes.end(),
                                 [&](const WaterNode& n) { return n.id == id; });
    if (it == wc.nodes.end()) {
      throw InvalidScenario("disruption references unknown node '" + id + "'");
    }
    return *it;
  };
  auto find_edge = [&]() {
    const auto it = std::find_if(wc.edges.begin(), wc.edges.end(), [&](const WaterEdge& e) {
      return ev.edge.empty() ? same_endpoints(e.from, e.to, ev) : e.id == ev.edge;
    });
    if (it == wc.edges.end()) {
      throw InvalidScenario("disruption references unknown edge '" +
                            (ev.edge.empty() ? ev.from + "-" + ev.to : ev.edge) + "'");
    }
    return it;
  };
  using K = DisruptionEvent::Kind;
  switch (ev.kind) {
  case K::None:
    break;
  case K::RemoveEdge:
    wc.edges.erase(find_edge());
    break;
  case K::NodeOutage: {
    WaterNode& n = find_node(ev.node);
    n.role = WaterRole::Junction;
    n.fixed_pressure = false;
    n.demand = n.demand_min = n.demand_max = 0.0;
    break;
  }
  case K::DemandChange:
    for (const auto& id : event_nodes(ev)) {
      WaterNode& n = find_node(id);
      if (n.pressure_controlled()) {
        shift_control(n.pressure, n.pressure_min, n.pressure_max, ev);
      } else {
        shift_control(n.demand, n.demand_min, n.demand_max, ev);
      }
    }
    break;
  case K::ParameterChange: {
    auto it = find_edge();
    if (ev.field == "coefficient") {
      it->coefficient = ev.value;
    } else if (ev.field == "gain") {
      it->gain = ev.value;
    } else {
      throw InvalidScenario("water parameter_change supports 'coefficient' or 'gain'");
    }
    break;
  }
  }
  return wc;
}

LinearCase disrupt_linear(LinearCase lc, const DisruptionEvent& ev) {
  const auto labels = node_labels(lc);
  const auto idx = index_labels(labels);
  using K = DisruptionEvent::Kind;
  switch (ev.kind) {
  case K::None:
    break;
  case K::RemoveEdge:
    throw InvalidScenario("linear plants have no physical edges to remove");
  case K::NodeOutage: {
    const Index k = resolve(idx, ev.node, "disruption");
    lc.u_lower[k] = lc.u_upper[k] = lc.u_nominal[k];
    break;
  }
  case K::DemandChange:
    for (const auto& id : event_nodes(ev)) {
      const Index k = resolve(idx, id, "disruption");
      shift_control(lc.u_nominal[k], lc.u_lower[k], lc.u_upper[k], ev);
    }
    break;
  case K::ParameterChange: {
    const Index k = resolve(idx, ev.node, "disruption");
    const auto it = std::find(lc.measured.begin(), lc.measured.end(), k);
    if (ev.field != "offset" || it == lc.measured.end()) {
      throw InvalidScenario("linear parameter_change sets 'offset' of a measured agent");
    }
    lc.offset[static_cast<Index>(it - lc.measured.begin())] = ev.value;
    break;
  }
  }
  return lc;
}

} // namespace

std::vector<std::string> node_labels(const PlantDescription& desc) {
  return std::visit(
      overloaded{
          [](const PowerCase& pc) {
            std::vector<std::string> out;
            for (const auto& b : pc.buses) {
              out.push_back(b.id);
            }
            return out;
          },
          [](const WaterCase& wc) {
            std::vector<std::string> out;
            for (const auto& n : wc.nodes) {
              out.push_back(n.id);
            }
            return out;
          },
          [](const LinearCase& lc) {
            if (!lc.labels.empty()) {
              return lc.labels;
            }
            std::vector<std::string> out;
            for (Index k = 0; k < lc.u_nominal.size(); ++k) {
              out.push_back(std::to_string(k));
            }
            return out;
          },
      },
      desc);
}

BuiltPlant build_plant(const PlantDescription& desc) {
  try {
    return std::visit(overloaded{[](const PowerCase& pc) { return build_power(pc); },
                                 [](const WaterCase& wc) { return build_water(wc); },
                                 [](const LinearCase& lc) { return build_linear(lc); }},
                      desc);
  } catch (const InvalidModel& e) {
    throw InvalidScenario(std::string("invalid plant: ") + e.what());
  }
}

PlantDescription apply_disruption(const PlantDescription& desc, const DisruptionEvent& event) {
  return std::visit(
      overloaded{[&](const PowerCase& pc) -> PlantDescription { return disrupt_power(pc, event); },
                 [&](const WaterCase& wc) -> PlantDescription { return disrupt_water(wc, event); },
                 [&](const LinearCase& lc) -> PlantDescription {
                   return disrupt_linear(lc, event);
                 }},
      desc);
}

Graph build_comm_graph(const Scenario& s, const std::vector<std::string>& labels) {
  const auto idx = index_labels(labels);
  std::vector<Edge> edges;
  for (const auto& [a, b] : s.comm_edges) {
    edges.push_back({resolve(idx, a, "comm_graph"), resolve(idx, b, "comm_graph")});
  }
  try {
    return Graph(labels.size(), std::move(edges));
  } catch (const InvalidModel& e) {
    throw InvalidScenario(std::string("comm_graph: ") + e.what());
  }
}

PreparedRun assemble(const Scenario& s) {
  if (s.run.budget <= 0 || s.run.trace_decimation < 1 || s.run.stall_window < 1 ||
      s.run.eps_eq < 0.0 || s.run.eps_feas < 0.0) {
    throw InvalidScenario("run settings out of range");
  }
  PlantDescription desc = s.plant;
  for (const auto& ev : s.disruption) {
    desc = apply_disruption(desc, ev);
  }

  PreparedRun pr;
  pr.name = s.name;
  pr.run = s.run;
  pr.built = build_plant(desc);
  const PlantModel& plant = *pr.built.plant;
  const Index n = plant.control_dim();

  pr.comm = build_comm_graph(s, pr.built.labels);

  pr.u0 = s.u0 ? Eigen::Map<const Eigen::VectorXd>(s.u0->data(),
                                                   static_cast<Eigen::Index>(s.u0->size()))
                       .eval()
               : pr.built.u_nominal;
  if (static_cast<Index>(pr.u0.size()) != n) {
    throw InvalidScenario("initial u0 must have one entry per agent");
  }
  for (Index k = 0; k < n; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    if (pr.u0[ki] < plant.u_lower()[ki] || pr.u0[ki] > plant.u_upper()[ki]) {
      throw InvalidScenario("u0 of agent '" + pr.built.labels[k] + "' is outside its limits");
    }
  }
  try {
    (void)plant.solve(pr.u0);
  } catch (const SolverFailure& e) {
    throw InvalidScenario(std::string("plant is not solvable at u0: ") + e.what());
  }

  if (s.gains) {
    auto expand = [&](const std::vector<double>& v, const char* name) {
      if (v.size() == 1) {
        return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), v[0]).eval();
      }
      if (v.size() != n) {
        throw InvalidScenario(std::string("gains.") + name + " needs 1 or N entries");
      }
      return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n)).eval();
    };
    pr.gains = {expand(s.gains->eta1, "eta1"), expand(s.gains->eta2, "eta2"),
                expand(s.gains->eta3, "eta3")};
    try {
      pr.gains.validate(n);
    } catch (const std::invalid_argument& e) {
      throw InvalidScenario(e.what());
    }
  } else {
    try {
      pr.gains = default_gains(plant, pr.comm, pr.u0);
    } catch (const SolverFailure& e) {
      throw InvalidScenario(std::string("automatic gains: ") + e.what());
    }
  }
  pr.gain_norm = gain_condition(pr.gains.eta2, pr.gains.eta3, adjacency_matrix(pr.comm));
  return pr;
}

PreparedRun prepare(const Scenario& s) {
  PreparedRun pr = assemble(s);
  if (!is_connected(pr.comm)) {
    throw InvalidScenario("comm_graph is not connected");
  }
  if (!(pr.gain_norm < 1.0) && !s.run.override_gain_check) {
    throw InvalidScenario("gain condition violated: ||diag(eta2) diag(eta3) A|| = " +
                          std::to_string(pr.gain_norm) + " >= 1");
  }
  return pr;
}

} // namespace ripple
