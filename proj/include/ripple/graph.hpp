#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace ripple {

using Index = std::size_t;

struct Edge {
  Index from = 0;
  Index to = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected simple graph over dense node indices [0, node_count).
///
/// Used both for physical networks (lines, pipes) and for the agents'
/// communication overlay. Immutable once constructed; edge order is the
/// insertion order so that per-edge data (weights, laws) can be kept in
/// parallel arrays by callers.
class Graph {
public:
  Graph() = default;

  /// Throws InvalidModel on self-loops, out-of-range endpoints or duplicates.
  Graph(Index node_count, std::vector<Edge> edges);

  Index node_count() const noexcept { return node_count_; }
  Index edge_count() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }

  /// Ascending node order.
  std::span<const Index> neighbors(Index node) const { return adjacency_list_.at(node); }
  Index degree(Index node) const { return adjacency_list_.at(node).size(); }

  bool has_edge(Index a, Index b) const;

private:
  Index node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<Index>> adjacency_list_;
};

Eigen::MatrixXd adjacency_matrix(const Graph& g);

/// Breadth-first reachability from node 0. Vacuously true for one node.
bool is_connected(const Graph& g);

/// B_mn = -w_mn on edges, B_mm = sum of incident weights. Weights are per
/// edge in `g.edges()` order and must be strictly positive.
Eigen::MatrixXd weighted_laplacian(const Graph& g, std::span<const double> weights);

} // namespace ripple
