#include "ripple/graph.hpp"

#include "ripple/errors.hpp"

#include <algorithm>
#include <queue>
#include <string>

namespace ripple {

Graph::Graph(Index node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)), adjacency_list_(node_count) {
  for (const auto& e : edges_) {
    if (e.from >= node_count_ || e.to >= node_count_) {
      throw InvalidModel("edge (" + std::to_string(e.from) + "," + std::to_string(e.to) +
                         ") references a node outside [0," + std::to_string(node_count_) + ")");
    }
    if (e.from == e.to) {
      throw InvalidModel("self-loop at node " + std::to_string(e.from));
    }
    if (has_edge(e.from, e.to)) {
      throw InvalidModel("duplicate edge (" + std::to_string(e.from) + "," +
                         std::to_string(e.to) + ")");
    }
    adjacency_list_[e.from].push_back(e.to);
    adjacency_list_[e.to].push_back(e.from);
  }
  for (auto& nb : adjacency_list_) {
    std::sort(nb.begin(), nb.end());
  }
}

bool Graph::has_edge(Index a, Index b) const {
  if (a >= node_count_ || b >= node_count_) {
    return false;
  }
  const auto& nb = adjacency_list_[a];
  return std::find(nb.begin(), nb.end(), b) != nb.end();
}

Eigen::MatrixXd adjacency_matrix(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) {
    a(e.from, e.to) = 1.0;
    a(e.to, e.from) = 1.0;
  }
  return a;
}

bool is_connected(const Graph& g) {
  if (g.node_count() == 0) {
    return false;
  }
  std::vector<bool> seen(g.node_count(), false);
  std::queue<Index> frontier;
  frontier.push(0);
  seen[0] = true;
  Index reached = 1;
  while (!frontier.empty()) {
    const Index n = frontier.front();
    frontier.pop();
    for (Index m : g.neighbors(n)) {
      if (!seen[m]) {
        seen[m] = true;
        ++reached;
        frontier.push(m);
      }
    }
  }
  return reached == g.node_count();
}

Eigen::MatrixXd weighted_laplacian(const Graph& g, std::span<const double> weights) {
  if (weights.size() != g.edge_count()) {
    throw InvalidModel("expected " + std::to_string(g.edge_count()) + " edge weights, got " +
                       std::to_string(weights.size()));
  }
  const auto n = static_cast<Eigen::Index>(g.node_count());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  for (Index k = 0; k < g.edge_count(); ++k) {
    const double w = weights[k];
    if (!(w > 0.0)) {
      throw InvalidModel("edge " + std::to_string(k) + " has nonpositive weight " +
                         std::to_string(w));
    }
    const auto& e = g.edges()[k];
    b(e.from, e.to) -= w;
    b(e.to, e.from) -= w;
    b(e.from, e.from) += w;
    b(e.to, e.to) += w;
  }
  return b;
}

} // namespace ripple
