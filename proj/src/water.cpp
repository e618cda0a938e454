#include "ripple/water.hpp"

#include "ripple/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>

namespace ripple::water {

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Regularized power law c * reg(sigma) and its inverse / antiderivative in
// terms of the pressure drop. Shared by pipes and resistive pumps.
struct PowerLaw {
  double c;
  double e;

  double linear_slope() const { return c * std::pow(kFlowRegularization, e - 1.0); }
  double knee() const { return c * std::pow(kFlowRegularization, e); }

  double drop(double sigma) const {
    if (std::abs(sigma) < kFlowRegularization) {
      return linear_slope() * sigma;
    }
    return c * sign(sigma) * std::pow(std::abs(sigma), e);
  }

  double flow(double delta) const {
    const double a = std::abs(delta);
    if (a <= knee()) {
      return delta / linear_slope();
    }
    return sign(delta) * std::pow(a / c, 1.0 / e);
  }

  double dflow(double delta) const {
    const double a = std::abs(delta);
    if (a <= knee()) {
      return 1.0 / linear_slope();
    }
    return std::pow(a / c, 1.0 / e) / (e * a);
  }

  // Integral of flow() from 0 to delta; the content function of the edge.
  double content(double delta) const {
    const double a = std::abs(delta);
    const double k0 = linear_slope();
    const double dk = knee();
    if (a <= dk) {
      return 0.5 * delta * delta / k0;
    }
    const double p = (e + 1.0) / e;
    return 0.5 * dk * dk / k0 +
           std::pow(c, -1.0 / e) * (e / (e + 1.0)) * (std::pow(a, p) - std::pow(dk, p));
  }
};

} // namespace

struct WaterModel::Topology {
  struct TreeEntry {
    Index node;
    Index parent_edge;  // meaningful only when has_parent
    Index parent;
    bool has_parent;
  };

  std::vector<Index> group_of;
  std::vector<double> offset;
  std::vector<std::optional<Index>> group_source;
  std::vector<long> free_slot;
  Index free_count = 0;
  std::vector<Index> resistive_edges;
  std::vector<std::vector<TreeEntry>> trees;  // BFS order from the group root
};

void EdgeLaw::validate() const {
  if (!(exponent >= 1.0)) {
    throw InvalidModel("edge law exponent must be >= 1");
  }
  if (kind == Kind::Pipe && !(coefficient > 0.0)) {
    throw InvalidModel("pipe friction coefficient must be positive, got " +
                       std::to_string(coefficient));
  }
  if (kind == Kind::Pump && (!(gain >= 0.0) || !(coefficient >= 0.0))) {
    throw InvalidModel("pump gain and series coefficient must be nonnegative");
  }
}

double edge_pressure_drop(double sigma, const EdgeLaw& law) {
  law.validate();
  const double friction =
      law.coefficient > 0.0 ? PowerLaw{law.coefficient, law.exponent}.drop(sigma) : 0.0;
  return law.kind == EdgeLaw::Kind::Pump ? friction - law.gain : friction;
}

WaterModel::WaterModel(Graph graph, std::vector<EdgeLaw> laws,
                       std::vector<bool> pressure_controlled)
    : graph_(std::move(graph)), laws_(std::move(laws)),
      pressure_controlled_(std::move(pressure_controlled)) {
  const Index n = graph_.node_count();
  if (laws_.size() != graph_.edge_count()) {
    throw InvalidModel("one edge law per edge is required");
  }
  if (pressure_controlled_.size() != n) {
    throw InvalidModel("node role list length differs from node count");
  }
  for (const auto& law : laws_) {
    law.validate();
  }
  bool any_source = false;
  for (bool s : pressure_controlled_) {
    any_source = any_source || s;
  }
  if (!any_source) {
    throw InvalidModel("water network needs at least one pressure-controlled node");
  }

  auto topo = std::make_shared<Topology>();
  topo->group_of.assign(n, n);
  topo->offset.assign(n, 0.0);

  // Incident ideal-pump edges per node.
  std::vector<std::vector<Index>> pump_edges(n);
  for (Index k = 0; k < laws_.size(); ++k) {
    const auto& e = graph_.edges()[k];
    if (laws_[k].is_ideal_pump()) {
      pump_edges[e.from].push_back(k);
      pump_edges[e.to].push_back(k);
    } else {
      topo->resistive_edges.push_back(k);
    }
  }

  for (Index start = 0; start < n; ++start) {
    if (topo->group_of[start] != n) {
      continue;
    }
    const Index gid = topo->trees.size();
    // Membership first, so the tree can be rooted at the source if present.
    std::vector<Index> members{start};
    topo->group_of[start] = gid;
    // Each pump edge has exactly one `from` endpoint among the members.
    Index pump_count = 0;
    for (Index i = 0; i < members.size(); ++i) {
      for (Index k : pump_edges[members[i]]) {
        const auto& e = graph_.edges()[k];
        const Index other = e.from == members[i] ? e.to : e.from;
        if (e.from == members[i]) {
          ++pump_count;
        }
        if (topo->group_of[other] == n) {
          topo->group_of[other] = gid;
          members.push_back(other);
        }
      }
    }
    if (pump_count != members.size() - 1) {
      throw InvalidModel("ideal pumps form a cycle around node " + std::to_string(start));
    }
    std::optional<Index> source;
    for (Index m : members) {
      if (pressure_controlled_[m]) {
        if (source) {
          throw InvalidModel("nodes " + std::to_string(*source) + " and " + std::to_string(m) +
                             " are both pressure-controlled but tied by ideal pumps");
        }
        source = m;
      }
    }
    const Index root = source.value_or(start);
    std::vector<Topology::TreeEntry> tree{{root, 0, root, false}};
    std::vector<bool> placed(n, false);
    placed[root] = true;
    topo->offset[root] = 0.0;
    for (Index i = 0; i < tree.size(); ++i) {
      const Index at = tree[i].node;
      for (Index k : pump_edges[at]) {
        const auto& e = graph_.edges()[k];
        const Index other = e.from == at ? e.to : e.from;
        if (placed[other]) {
          continue;
        }
        placed[other] = true;
        // pi_to = pi_from + gain
        topo->offset[other] =
            topo->offset[at] + (e.from == at ? laws_[k].gain : -laws_[k].gain);
        tree.push_back({other, k, at, true});
      }
    }
    topo->trees.push_back(std::move(tree));
    topo->group_source.push_back(source);
  }

  const Index groups = topo->trees.size();
  topo->free_slot.assign(groups, -1);
  for (Index g = 0; g < groups; ++g) {
    if (!topo->group_source[g]) {
      topo->free_slot[g] = static_cast<long>(topo->free_count++);
    }
  }

  // Every group must reach a pressure reference through some edge path.
  std::vector<bool> reached(groups, false);
  std::queue<Index> frontier;
  for (Index g = 0; g < groups; ++g) {
    if (topo->group_source[g]) {
      reached[g] = true;
      frontier.push(g);
    }
  }
  std::vector<std::vector<Index>> group_adj(groups);
  for (Index k : topo->resistive_edges) {
    const auto& e = graph_.edges()[k];
    group_adj[topo->group_of[e.from]].push_back(topo->group_of[e.to]);
    group_adj[topo->group_of[e.to]].push_back(topo->group_of[e.from]);
  }
  while (!frontier.empty()) {
    const Index g = frontier.front();
    frontier.pop();
    for (Index h : group_adj[g]) {
      if (!reached[h]) {
        reached[h] = true;
        frontier.push(h);
      }
    }
  }
  for (Index node = 0; node < n; ++node) {
    if (!reached[topo->group_of[node]]) {
      throw InvalidModel("node " + std::to_string(node) +
                         " is disconnected from every pressure reference");
    }
  }
  topo_ = std::move(topo);
}

std::vector<Index> WaterModel::demand_nodes() const {
  std::vector<Index> out;
  for (Index n = 0; n < node_count(); ++n) {
    if (!pressure_controlled_[n]) {
      out.push_back(n);
    }
  }
  return out;
}

HydraulicSolution solve_network(const Eigen::VectorXd& u, const WaterModel& model,
                                const HydraulicOptions& opts) {
  const auto& topo = model.topology();
  const auto& g = model.graph();
  const Index n = model.node_count();
  if (static_cast<Index>(u.size()) != n) {
    throw SolverFailure("control vector has wrong length", to_std(u));
  }
  const auto nfree = static_cast<Eigen::Index>(topo.free_count);
  const Index groups = topo.trees.size();

  // Fixed group bases from their source pressures.
  std::vector<double> base(groups, 0.0);
  double source_mean = 0.0;
  Index sources = 0;
  for (Index gi = 0; gi < groups; ++gi) {
    if (const auto s = topo.group_source[gi]) {
      base[gi] = u[static_cast<Eigen::Index>(*s)] - topo.offset[*s];
      source_mean += u[static_cast<Eigen::Index>(*s)];
      ++sources;
    }
  }
  source_mean /= static_cast<double>(sources);

  Eigen::VectorXd p = Eigen::VectorXd::Constant(nfree, source_mean);
  auto node_pressures = [&](const Eigen::VectorXd& free) {
    Eigen::VectorXd pi(static_cast<Eigen::Index>(n));
    for (Index v = 0; v < n; ++v) {
      const Index gi = topo.group_of[v];
      const double b = topo.free_slot[gi] >= 0 ? free[topo.free_slot[gi]] : base[gi];
      pi[static_cast<Eigen::Index>(v)] = b + topo.offset[v];
    }
    return pi;
  };
  auto law_of = [&](Index k) {
    const auto& law = model.laws()[k];
    return std::pair{PowerLaw{law.coefficient, law.exponent},
                     law.kind == EdgeLaw::Kind::Pump ? law.gain : 0.0};
  };

  struct Eval {
    Eigen::VectorXd residual;
    double content = 0.0;
  };
  // `linear_scale` > 0 swaps every law for its secant through that flow,
  // which gives a cheap starting point.
  auto evaluate = [&](const Eigen::VectorXd& free, Eigen::MatrixXd* hessian,
                      double linear_scale = 0.0) {
    Eval ev;
    ev.residual = Eigen::VectorXd::Zero(nfree);
    if (hessian) {
      hessian->setZero(nfree, nfree);
    }
    const Eigen::VectorXd pi = node_pressures(free);
    for (Index k : topo.resistive_edges) {
      const auto& e = g.edges()[k];
      const auto [law, boost] = law_of(k);
      const double delta = pi[static_cast<Eigen::Index>(e.from)] -
                           pi[static_cast<Eigen::Index>(e.to)] + boost;
      const double secant =
          linear_scale > 0.0 ? 1.0 / (law.c * std::pow(linear_scale, law.e - 1.0))
                             : 0.0;
      const double sigma = linear_scale > 0.0 ? secant * delta : law.flow(delta);
      ev.content += linear_scale > 0.0 ? 0.5 * secant * delta * delta : law.content(delta);
      const long a = topo.free_slot[topo.group_of[e.from]];
      const long b = topo.free_slot[topo.group_of[e.to]];
      if (a == b && a >= 0) {
        continue;  // both ends tied in one pump group
      }
      if (a >= 0) {
        ev.residual[a] += sigma;
      }
      if (b >= 0) {
        ev.residual[b] -= sigma;
      }
      if (hessian) {
        const double k_e = linear_scale > 0.0 ? secant : law.dflow(delta);
        if (a >= 0) {
          (*hessian)(a, a) += k_e;
        }
        if (b >= 0) {
          (*hessian)(b, b) += k_e;
        }
        if (a >= 0 && b >= 0) {
          (*hessian)(a, b) -= k_e;
          (*hessian)(b, a) -= k_e;
        }
      }
    }
    for (Index v = 0; v < n; ++v) {
      const long slot = topo.free_slot[topo.group_of[v]];
      if (slot >= 0) {
        const double d = u[static_cast<Eigen::Index>(v)];
        ev.residual[slot] -= d;
        ev.content -= d * pi[static_cast<Eigen::Index>(v)];
      }
    }
    return ev;
  };

  HydraulicSolution sol;
  Eigen::MatrixXd hess;
  if (nfree > 0) {
    double scale = 0.0;
    for (Index v = 0; v < n; ++v) {
      if (topo.free_slot[topo.group_of[v]] >= 0) {
        scale += std::abs(u[static_cast<Eigen::Index>(v)]);
      }
    }
    scale = std::max(1.0, scale / static_cast<double>(std::max<Index>(1, sources)));
    const Eval lin = evaluate(p, &hess, scale);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      p -= ldlt.solve(lin.residual);
    }
  }
  Eval cur = evaluate(p, &hess);
  bool converged = false;
  for (int it = 0; it <= opts.max_iterations; ++it) {
    const double rnorm = nfree ? cur.residual.lpNorm<Eigen::Infinity>() : 0.0;
    if (rnorm <= opts.tolerance) {
      converged = true;
      sol.iterations = it;
      break;
    }
    if (it == opts.max_iterations) {
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw HydraulicInfeasible("hydraulic Newton matrix is not positive definite", to_std(u));
    }
    const Eigen::VectorXd dp = -ldlt.solve(cur.residual);
    // The content is convex along dp, so its directional derivative is
    // increasing in the step; take a full step when it is still downhill,
    // otherwise bracket the minimiser (Illinois regula falsi). Plain
    // backtracking zig-zags on networks with small-flow pipes.
    const double slope = cur.residual.dot(dp);
    auto dphi = [&](double a) { return evaluate(p + a * dp, nullptr).residual.dot(dp); };
    double alpha = 1.0;
    if (slope < 0.0) {
      double d_hi = dphi(1.0);
      if (d_hi > 0.0) {
        double lo = 0.0;
        double d_lo = slope;
        double hi = 1.0;
        int side = 0;
        for (int k = 0; k < 60; ++k) {
          alpha = (lo * d_hi - hi * d_lo) / (d_hi - d_lo);
          const double d = dphi(alpha);
          if (std::abs(d) <= 0.1 * std::abs(slope)) {
            break;
          }
          if (d < 0.0) {
            lo = alpha;
            d_lo = d;
            if (side == -1) d_hi *= 0.5;
            side = -1;
          } else {
            hi = alpha;
            d_hi = d;
            if (side == 1) d_lo *= 0.5;
            side = 1;
          }
        }
      }
    }
    bool accepted = false;
    for (int k = 0; k < 50; ++k, alpha *= 0.5) {
      const Eigen::VectorXd trial = p + alpha * dp;
      Eval next = evaluate(trial, nullptr);
      if (next.content <= cur.content || next.residual.lpNorm<Eigen::Infinity>() < rnorm) {
        p = trial;
        cur = evaluate(p, &hess);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw HydraulicInfeasible("hydraulic line search failed", to_std(u));
    }
  }
  if (!converged) {
    throw HydraulicInfeasible("hydraulic solve did not converge in " +
                                  std::to_string(opts.max_iterations) + " iterations",
                              to_std(u));
  }

  sol.pressure = node_pressures(p);
  sol.flow = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.edge_count()));
  Eigen::VectorXd outflow = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (Index k : topo.resistive_edges) {
    const auto& e = g.edges()[k];
    const auto [law, boost] = law_of(k);
    const double delta = sol.pressure[static_cast<Eigen::Index>(e.from)] -
                         sol.pressure[static_cast<Eigen::Index>(e.to)] + boost;
    const double sigma = law.flow(delta);
    sol.flow[static_cast<Eigen::Index>(k)] = sigma;
    outflow[static_cast<Eigen::Index>(e.from)] += sigma;
    outflow[static_cast<Eigen::Index>(e.to)] -= sigma;
  }

  // Ideal pump flows from subtree balances, leaves first.
  for (const auto& tree : topo.trees) {
    std::vector<double> up(tree.size(), 0.0);  // flow out of entry i towards its parent
    for (Index i = tree.size(); i-- > 1;) {
      const Index v = tree[i].node;
      double x = model.is_pressure_controlled(v) ? 0.0 : u[static_cast<Eigen::Index>(v)];
      x -= outflow[static_cast<Eigen::Index>(v)];
      for (Index j = i + 1; j < tree.size(); ++j) {
        if (tree[j].has_parent && tree[j].parent == v) {
          x += up[j];
        }
      }
      up[i] = x;
      const auto& e = g.edges()[tree[i].parent_edge];
      const double sigma = e.from == v ? x : -x;
      sol.flow[static_cast<Eigen::Index>(tree[i].parent_edge)] = sigma;
      outflow[static_cast<Eigen::Index>(e.from)] += sigma;
      outflow[static_cast<Eigen::Index>(e.to)] -= sigma;
    }
  }

  sol.injection = u;
  sol.residual = 0.0;
  for (Index v = 0; v < n; ++v) {
    const auto vi = static_cast<Eigen::Index>(v);
    if (model.is_pressure_controlled(v)) {
      sol.injection[vi] = outflow[vi];
    } else {
      sol.residual = std::max(sol.residual, std::abs(u[vi] - outflow[vi]));
    }
  }

  for (Index k = 0; k < g.edge_count(); ++k) {
    if (model.laws()[k].kind == EdgeLaw::Kind::Pump &&
        sol.flow[static_cast<Eigen::Index>(k)] < -1e-7) {
      throw InvalidOperatingPoint("reverse flow " +
                                      std::to_string(sol.flow[static_cast<Eigen::Index>(k)]) +
                                      " through pump edge " + std::to_string(k),
                                  to_std(u));
    }
  }
  return sol;
}

bool lemma1_monotonicity_test(const WaterModel& model, const Eigen::VectorXd& u,
                              const Eigen::VectorXd& u_prime) {
  if (u.size() != u_prime.size() || ((u - u_prime).array() < 0.0).any()) {
    throw std::invalid_argument("lemma1_monotonicity_test requires u >= u_prime");
  }
  const auto hi = solve_network(u, model);
  const auto lo = solve_network(u_prime, model);
  for (Index v : model.demand_nodes()) {
    const auto vi = static_cast<Eigen::Index>(v);
    if (hi.pressure[vi] < lo.pressure[vi] - 1e-6) {
      return false;
    }
  }
  return true;
}

WaterPlant::WaterPlant(WaterModel model, std::vector<Index> measured, PlantLimits limits)
    : PlantModel(std::move(measured), std::move(limits)), model_(std::move(model)) {
  if (control_dim() != model_.node_count()) {
    throw InvalidModel("water plant limits must be node-indexed");
  }
  for (Index m : this->measured()) {
    if (model_.is_pressure_controlled(m)) {
      throw InvalidModel("measured node " + std::to_string(m) + " is pressure-controlled");
    }
  }
}

Eigen::VectorXd WaterPlant::solve(const Eigen::VectorXd& u) const {
  const auto sol = solve_network(u, model_);
  Eigen::VectorXd y(static_cast<Eigen::Index>(output_dim()));
  for (Index k = 0; k < output_dim(); ++k) {
    y[static_cast<Eigen::Index>(k)] = sol.pressure[static_cast<Eigen::Index>(measured()[k])];
  }
  return y;
}

} // namespace ripple::water
