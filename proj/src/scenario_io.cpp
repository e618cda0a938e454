#include "ripple/scenario_io.hpp"

#include "ripple/errors.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace ripple {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw InvalidScenario(path + ": " + what);
}

const json& need(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) {
    fail(path, "expected an object");
  }
  const auto it = obj.find(key);
  if (it == obj.end()) {
    fail(path, "missing required field '" + key + "'");
  }
  return *it;
}

double num(const json& v, const std::string& path) {
  if (!v.is_number()) {
    fail(path, "expected a number");
  }
  return v.get<double>();
}

double num(const json& obj, const std::string& key, const std::string& path) {
  return num(need(obj, key, path), path + "." + key);
}

double num_or(const json& obj, const std::string& key, double fallback, const std::string& path) {
  return obj.contains(key) ? num(obj.at(key), path + "." + key) : fallback;
}

std::string str(const json& v, const std::string& path) {
  if (!v.is_string()) {
    fail(path, "expected a string");
  }
  return v.get<std::string>();
}

std::string str(const json& obj, const std::string& key, const std::string& path) {
  return str(need(obj, key, path), path + "." + key);
}

std::string str_or(const json& obj, const std::string& key, const std::string& path) {
  return obj.contains(key) ? str(obj.at(key), path + "." + key) : std::string{};
}

// Labels may be written as strings or integers.
std::string label(const json& v, const std::string& path) {
  if (v.is_string()) {
    return v.get<std::string>();
  }
  if (v.is_number_integer()) {
    return std::to_string(v.get<long>());
  }
  fail(path, "expected a node label");
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (v.is_number()) {
    return {v.get<double>()};
  }
  if (!v.is_array()) {
    fail(path, "expected a number or an array of numbers");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.push_back(num(v[k], path + "[" + std::to_string(k) + "]"));
  }
  return out;
}

const json& array(const json& obj, const std::string& key, const std::string& path) {
  const json& v = need(obj, key, path);
  if (!v.is_array()) {
    fail(path + "." + key, "expected an array");
  }
  return v;
}

void expect_units(const json& plant, const std::map<std::string, std::string>& units,
                  const std::string& path) {
  const json& u = need(plant, "units", path);
  for (const auto& [key, value] : units) {
    if (str(u, key, path + ".units") != value) {
      fail(path + ".units." + key, "must be '" + value + "'");
    }
  }
}

PowerCase parse_power(const json& p, const std::string& path) {
  expect_units(p, {{"voltage", "pu"}, {"reactive_power", "MVAr"}, {"susceptance", "pu"}}, path);
  PowerCase pc;
  pc.base_mva = num(p, "base_mva", path);
  const json& buses = array(p, "buses", path);
  for (std::size_t k = 0; k < buses.size(); ++k) {
    const std::string bp = path + ".buses[" + std::to_string(k) + "]";
    const json& b = buses[k];
    PowerBus bus;
    bus.id = label(need(b, "id", bp), bp + ".id");
    const std::string type = str(b, "type", bp);
    if (type == "generator") {
      bus.generator = true;
      bus.v = num(b, "v", bp);
      bus.v_min = num_or(b, "v_min", bus.v, bp);
      bus.v_max = num_or(b, "v_max", bus.v, bp);
    } else if (type == "load") {
      bus.q_mvar = num(b, "q_mvar", bp);
      bus.q_min_mvar = num_or(b, "q_min_mvar", bus.q_mvar, bp);
      bus.q_max_mvar = num_or(b, "q_max_mvar", bus.q_mvar, bp);
      bus.v_threshold = num_or(b, "v_threshold", 0.0, bp);
    } else {
      fail(bp + ".type", "must be 'generator' or 'load'");
    }
    pc.buses.push_back(bus);
  }
  const json& lines = array(p, "lines", path);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::string lp = path + ".lines[" + std::to_string(k) + "]";
    pc.lines.push_back({label(need(lines[k], "from", lp), lp + ".from"),
                        label(need(lines[k], "to", lp), lp + ".to"),
                        num(lines[k], "susceptance", lp)});
  }
  return pc;
}

WaterRole parse_role(const std::string& s, const std::string& path) {
  if (s == "reservoir") return WaterRole::Reservoir;
  if (s == "tank") return WaterRole::Tank;
  if (s == "junction") return WaterRole::Junction;
  if (s == "consumer") return WaterRole::Consumer;
  fail(path, "role must be reservoir, tank, junction or consumer");
}

const char* role_name(WaterRole r) {
  switch (r) {
  case WaterRole::Reservoir: return "reservoir";
  case WaterRole::Tank: return "tank";
  case WaterRole::Junction: return "junction";
  case WaterRole::Consumer: return "consumer";
  }
  return "junction";
}

WaterCase parse_water(const json& p, const std::string& path) {
  expect_units(p, {{"pressure", "m"}, {"flow", "m3/hr"}}, path);
  WaterCase wc;
  const json& nodes = array(p, "nodes", path);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::string np = path + ".nodes[" + std::to_string(k) + "]";
    const json& j = nodes[k];
    WaterNode n;
    n.id = label(need(j, "id", np), np + ".id");
    n.role = parse_role(str(j, "role", np), np + ".role");
    if (n.role == WaterRole::Tank) {
      const std::string mode = str(j, "mode", np);
      if (mode != "fixed_pressure" && mode != "injection") {
        fail(np + ".mode", "must be 'fixed_pressure' or 'injection'");
      }
      n.fixed_pressure = mode == "fixed_pressure";
    }
    if (n.pressure_controlled()) {
      n.pressure = num(j, "pressure", np);
      n.pressure_min = num_or(j, "pressure_min", n.pressure, np);
      n.pressure_max = num_or(j, "pressure_max", n.pressure, np);
    } else {
      n.demand = num_or(j, "demand", 0.0, np);
      n.demand_min = num_or(j, "demand_min", n.demand, np);
      n.demand_max = num_or(j, "demand_max", n.demand, np);
    }
    if (j.contains("min_pressure")) {
      n.min_pressure = num(j.at("min_pressure"), np + ".min_pressure");
    }
    wc.nodes.push_back(n);
  }
  const json& edges = array(p, "edges", path);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const std::string ep = path + ".edges[" + std::to_string(k) + "]";
    const json& j = edges[k];
    WaterEdge e;
    e.id = j.contains("id") ? label(j.at("id"), ep + ".id") : "e" + std::to_string(k);
    e.from = label(need(j, "from", ep), ep + ".from");
    e.to = label(need(j, "to", ep), ep + ".to");
    e.law = str(j, "law", ep);
    if (e.law == "pump") {
      e.gain = num(j, "gain", ep);
      e.coefficient = num_or(j, "coefficient", 0.0, ep);
    } else if (e.law == "darcy_weisbach" || e.law == "hazen_williams") {
      e.coefficient = num(j, "coefficient", ep);
    } else {
      fail(ep + ".law", "must be darcy_weisbach, hazen_williams or pump");
    }
    wc.edges.push_back(e);
  }
  return wc;
}

LinearCase parse_linear(const json& p, const std::string& path) {
  LinearCase lc;
  lc.u_nominal = numbers(need(p, "u_nominal", path), path + ".u_nominal");
  const Index n = lc.u_nominal.size();
  if (p.contains("labels")) {
    const json& labels = array(p, "labels", path);
    for (std::size_t k = 0; k < labels.size(); ++k) {
      lc.labels.push_back(label(labels[k], path + ".labels[" + std::to_string(k) + "]"));
    }
  }
  std::vector<std::string> names = lc.labels;
  if (names.empty()) {
    for (Index k = 0; k < n; ++k) {
      names.push_back(std::to_string(k));
    }
  }
  const json& measured = array(p, "measured", path);
  for (std::size_t k = 0; k < measured.size(); ++k) {
    const std::string lab = label(measured[k], path + ".measured[" + std::to_string(k) + "]");
    const auto it = std::find(names.begin(), names.end(), lab);
    if (it == names.end()) {
      fail(path + ".measured[" + std::to_string(k) + "]", "unknown agent '" + lab + "'");
    }
    lc.measured.push_back(static_cast<Index>(it - names.begin()));
  }
  const json& gain = array(p, "gain", path);
  for (std::size_t k = 0; k < gain.size(); ++k) {
    lc.gain.push_back(numbers(gain[k], path + ".gain[" + std::to_string(k) + "]"));
  }
  lc.offset = numbers(need(p, "offset", path), path + ".offset");
  lc.u_lower = numbers(need(p, "u_lower", path), path + ".u_lower");
  lc.u_upper = numbers(need(p, "u_upper", path), path + ".u_upper");
  lc.y_lower = numbers(need(p, "y_lower", path), path + ".y_lower");
  return lc;
}

DisruptionEvent parse_event(const json& j, const std::string& path) {
  DisruptionEvent ev;
  const std::string kind = str(j, "kind", path);
  using K = DisruptionEvent::Kind;
  if (kind == "none") {
    ev.kind = K::None;
  } else if (kind == "remove_edge") {
    ev.kind = K::RemoveEdge;
  } else if (kind == "node_outage") {
    ev.kind = K::NodeOutage;
  } else if (kind == "demand_change") {
    ev.kind = K::DemandChange;
  } else if (kind == "parameter_change") {
    ev.kind = K::ParameterChange;
  } else {
    fail(path + ".kind", "unknown disruption kind '" + kind + "'");
  }
  if (j.contains("node")) ev.node = label(j.at("node"), path + ".node");
  if (j.contains("from")) ev.from = label(j.at("from"), path + ".from");
  if (j.contains("to")) ev.to = label(j.at("to"), path + ".to");
  if (j.contains("edge")) ev.edge = label(j.at("edge"), path + ".edge");
  if (j.contains("nodes")) {
    const json& ns = array(j, "nodes", path);
    for (std::size_t k = 0; k < ns.size(); ++k) {
      ev.nodes.push_back(label(ns[k], path + ".nodes[" + std::to_string(k) + "]"));
    }
  }
  if (ev.kind == K::DemandChange) {
    ev.field = j.contains("mode") ? str(j.at("mode"), path + ".mode") : "value";
    ev.value = num(j, "value", path);
    if (j.contains("shift_limits")) {
      if (!j.at("shift_limits").is_boolean()) {
        fail(path + ".shift_limits", "expected a boolean");
      }
      ev.shift_limits = j.at("shift_limits").get<bool>();
    }
  } else if (ev.kind == K::ParameterChange) {
    ev.field = str(j, "field", path);
    ev.value = num(j, "value", path);
  }
  return ev;
}

json event_json(const DisruptionEvent& ev) {
  using K = DisruptionEvent::Kind;
  json j;
  switch (ev.kind) {
  case K::None: j["kind"] = "none"; break;
  case K::RemoveEdge: j["kind"] = "remove_edge"; break;
  case K::NodeOutage: j["kind"] = "node_outage"; break;
  case K::DemandChange: j["kind"] = "demand_change"; break;
  case K::ParameterChange: j["kind"] = "parameter_change"; break;
  }
  if (!ev.node.empty()) j["node"] = ev.node;
  if (!ev.from.empty()) j["from"] = ev.from;
  if (!ev.to.empty()) j["to"] = ev.to;
  if (!ev.edge.empty()) j["edge"] = ev.edge;
  if (!ev.nodes.empty()) j["nodes"] = ev.nodes;
  if (ev.kind == K::DemandChange) {
    j["mode"] = ev.field;
    j["value"] = ev.value;
    j["shift_limits"] = ev.shift_limits;
  } else if (ev.kind == K::ParameterChange) {
    j["field"] = ev.field;
    j["value"] = ev.value;
  }
  return j;
}

json gains_value(const std::vector<double>& v) {
  return v.size() == 1 ? json(v[0]) : json(v);
}

} // namespace

Scenario parse_scenario(const json& doc) {
  Scenario s;
  s.schema = str(doc, "schema", "$");
  if (s.schema != kScenarioSchema) {
    fail("$.schema", "unsupported schema '" + s.schema + "', expected " + kScenarioSchema);
  }
  s.name = str_or(doc, "name", "$");

  const json& plant = need(doc, "plant", "$");
  const std::string type = str(plant, "type", "$.plant");
  if (type == "power") {
    s.plant = parse_power(plant, "$.plant");
  } else if (type == "water") {
    s.plant = parse_water(plant, "$.plant");
  } else if (type == "linear") {
    s.plant = parse_linear(plant, "$.plant");
  } else {
    fail("$.plant.type", "must be power, water or linear");
  }

  const json& comm = need(doc, "comm_graph", "$");
  const json& edges = array(comm, "edges", "$.comm_graph");
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const std::string ep = "$.comm_graph.edges[" + std::to_string(k) + "]";
    if (!edges[k].is_array() || edges[k].size() != 2) {
      fail(ep, "expected a [from, to] pair");
    }
    s.comm_edges.emplace_back(label(edges[k][0], ep), label(edges[k][1], ep));
  }

  if (doc.contains("gains") && !(doc.at("gains").is_string() && doc.at("gains") == "auto")) {
    const json& g = doc.at("gains");
    s.gains = GainSpec{numbers(need(g, "eta1", "$.gains"), "$.gains.eta1"),
                       numbers(need(g, "eta2", "$.gains"), "$.gains.eta2"),
                       numbers(need(g, "eta3", "$.gains"), "$.gains.eta3")};
  }
  if (doc.contains("initial") && doc.at("initial").contains("u0")) {
    s.u0 = numbers(doc.at("initial").at("u0"), "$.initial.u0");
  }
  if (doc.contains("disruption")) {
    const json& d = doc.at("disruption");
    if (d.is_array()) {
      for (std::size_t k = 0; k < d.size(); ++k) {
        s.disruption.push_back(parse_event(d[k], "$.disruption[" + std::to_string(k) + "]"));
      }
    } else {
      s.disruption.push_back(parse_event(d, "$.disruption"));
    }
  }
  if (doc.contains("run")) {
    const json& r = doc.at("run");
    const std::string rp = "$.run";
    s.run.budget = static_cast<long>(num_or(r, "budget", static_cast<double>(s.run.budget), rp));
    s.run.eps_eq = num_or(r, "eps_eq", s.run.eps_eq, rp);
    s.run.eps_feas = num_or(r, "eps_feas", s.run.eps_feas, rp);
    s.run.trace_decimation = static_cast<long>(
        num_or(r, "trace_decimation", static_cast<double>(s.run.trace_decimation), rp));
    s.run.seed = static_cast<std::uint64_t>(num_or(r, "seed", 0.0, rp));
    s.run.stall_window =
        static_cast<long>(num_or(r, "stall_window", static_cast<double>(s.run.stall_window), rp));
    if (r.contains("override_gain_check")) {
      s.run.override_gain_check = r.at("override_gain_check").get<bool>();
    }
  }
  return s;
}

Scenario parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into line:column.
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InvalidScenario("line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": JSON syntax error: " + e.what());
  }
  return parse_scenario(doc);
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidScenario("cannot open scenario file '" + path.string() + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

json to_json(const Scenario& s) {
  json doc;
  doc["schema"] = s.schema;
  doc["name"] = s.name;
  json plant;
  if (const auto* pc = std::get_if<PowerCase>(&s.plant)) {
    plant["type"] = "power";
    plant["units"] = {{"voltage", "pu"}, {"reactive_power", "MVAr"}, {"susceptance", "pu"}};
    plant["base_mva"] = pc->base_mva;
    plant["buses"] = json::array();
    for (const auto& b : pc->buses) {
      json j{{"id", b.id}, {"type", b.generator ? "generator" : "load"}};
      if (b.generator) {
        j["v"] = b.v;
        j["v_min"] = b.v_min;
        j["v_max"] = b.v_max;
      } else {
        j["q_mvar"] = b.q_mvar;
        j["q_min_mvar"] = b.q_min_mvar;
        j["q_max_mvar"] = b.q_max_mvar;
        j["v_threshold"] = b.v_threshold;
      }
      plant["buses"].push_back(j);
    }
    plant["lines"] = json::array();
    for (const auto& l : pc->lines) {
      plant["lines"].push_back({{"from", l.from}, {"to", l.to}, {"susceptance", l.susceptance}});
    }
  } else if (const auto* wc = std::get_if<WaterCase>(&s.plant)) {
    plant["type"] = "water";
    plant["units"] = {{"pressure", "m"}, {"flow", "m3/hr"}};
    plant["nodes"] = json::array();
    for (const auto& n : wc->nodes) {
      json j{{"id", n.id}, {"role", role_name(n.role)}};
      if (n.role == WaterRole::Tank) {
        j["mode"] = n.fixed_pressure ? "fixed_pressure" : "injection";
      }
      if (n.pressure_controlled()) {
        j["pressure"] = n.pressure;
        j["pressure_min"] = n.pressure_min;
        j["pressure_max"] = n.pressure_max;
      } else {
        j["demand"] = n.demand;
        j["demand_min"] = n.demand_min;
        j["demand_max"] = n.demand_max;
      }
      if (n.min_pressure) {
        j["min_pressure"] = *n.min_pressure;
      }
      plant["nodes"].push_back(j);
    }
    plant["edges"] = json::array();
    for (const auto& e : wc->edges) {
      json j{{"id", e.id}, {"from", e.from}, {"to", e.to}, {"law", e.law},
             {"coefficient", e.coefficient}};
      if (e.law == "pump") {
        j["gain"] = e.gain;
      }
      plant["edges"].push_back(j);
    }
  } else {
    const auto& lc = std::get<LinearCase>(s.plant);
    plant["type"] = "linear";
    plant["units"] = json::object();
    if (!lc.labels.empty()) {
      plant["labels"] = lc.labels;
    }
    const auto names = node_labels(lc);
    plant["measured"] = json::array();
    for (Index m : lc.measured) {
      plant["measured"].push_back(names.at(m));
    }
    plant["gain"] = lc.gain;
    plant["offset"] = lc.offset;
    plant["u_nominal"] = lc.u_nominal;
    plant["u_lower"] = lc.u_lower;
    plant["u_upper"] = lc.u_upper;
    plant["y_lower"] = lc.y_lower;
  }
  doc["plant"] = plant;

  doc["comm_graph"]["edges"] = json::array();
  for (const auto& [a, b] : s.comm_edges) {
    doc["comm_graph"]["edges"].push_back({a, b});
  }
  if (s.gains) {
    doc["gains"] = {{"eta1", gains_value(s.gains->eta1)},
                    {"eta2", gains_value(s.gains->eta2)},
                    {"eta3", gains_value(s.gains->eta3)}};
  } else {
    doc["gains"] = "auto";
  }
  if (s.u0) {
    doc["initial"]["u0"] = *s.u0;
  }
  doc["disruption"] = json::array();
  for (const auto& ev : s.disruption) {
    doc["disruption"].push_back(event_json(ev));
  }
  doc["run"] = {{"budget", s.run.budget},
                {"eps_eq", s.run.eps_eq},
                {"eps_feas", s.run.eps_feas},
                {"trace_decimation", s.run.trace_decimation},
                {"seed", s.run.seed},
                {"stall_window", s.run.stall_window},
                {"override_gain_check", s.run.override_gain_check}};
  return doc;
}

} // namespace ripple
