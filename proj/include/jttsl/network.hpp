#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace jttsl {

/// 1-based sensor node identifier.
using NodeId = int;

struct Position {
  double xi = 0.0;   // m
  double eta = 0.0;  // m
};

/// Directed edge (from, to): node `to` receives data from node `from`.
struct Edge {
  NodeId from;
  NodeId to;

  auto operator<=>(const Edge&) const = default;
};

/**
 * Directed sensor graph with ground-truth node positions.
 *
 * Nodes are numbered 1..node_count. Self loops are not stored; every node is
 * implicitly its own in-neighbor.
 */
class Topology {
 public:
  Topology(int node_count, std::vector<Edge> edges, std::vector<Position> positions);

  /// Builds a symmetric topology from undirected node pairs.
  static Topology undirected(int node_count, const std::vector<std::pair<NodeId, NodeId>>& links,
                             std::vector<Position> positions);

  [[nodiscard]] int node_count() const { return node_count_; }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] const std::vector<Position>& positions() const { return positions_; }
  [[nodiscard]] const Position& position(NodeId i) const;
  [[nodiscard]] bool is_symmetric() const;
  [[nodiscard]] bool has_edge(NodeId from, NodeId to) const;

  /// In-neighbors of i including i itself, ascending.
  [[nodiscard]] const std::vector<NodeId>& in_neighbors(NodeId i) const;
  /// In-neighbors of i excluding i, ascending. This is the drift-vector order.
  [[nodiscard]] std::vector<NodeId> neighbors_excluding_self(NodeId i) const;
  /// Number of in-neighbors excluding i.
  [[nodiscard]] int degree(NodeId i) const;

 private:
  void check_node(NodeId i) const;

  int node_count_;
  std::vector<Edge> edges_;
  std::vector<Position> positions_;
  std::vector<std::vector<NodeId>> in_neighbors_;
};

/// Consensus weights pi^{i,j}, j in N^i, per node.
class ConsensusWeights {
 public:
  ConsensusWeights() = default;
  explicit ConsensusWeights(std::vector<std::map<NodeId, double>> rows);

  /// Throws InvalidInputError if (i, j) has no weight.
  [[nodiscard]] double weight(NodeId i, NodeId j) const;
  [[nodiscard]] const std::map<NodeId, double>& row(NodeId i) const;
  [[nodiscard]] int node_count() const { return static_cast<int>(rows_.size()); }

 private:
  std::vector<std::map<NodeId, double>> rows_;
};

/// Drift parameters theta^{i,j} held by node i. For the 4-D target state each
/// entry is [xi^{i,j}, 0, eta^{i,j}, 0].
struct DriftVector {
  NodeId owner = 0;
  int dim = 4;
  std::map<NodeId, Eigen::VectorXd> entries;

  /// theta^{i,j}; zero for j == owner.
  [[nodiscard]] Eigen::VectorXd at(NodeId j) const;
};

std::vector<NodeId> in_neighbors(const Topology& t, NodeId i);

/// pi^{i,j} = 1 / (1 + max(d_i, d_j)) for neighbors, remainder on the self weight.
ConsensusWeights metropolis_weights(const Topology& t);

/// Exact drifts: position of j relative to i, indexed by node (element 0 is node 1).
std::vector<DriftVector> true_drifts(const Topology& t);

/// Drift vectors with every entry set to `value` (default zero).
std::vector<DriftVector> uniform_drifts(const Topology& t,
                                        const Eigen::Vector4d& value = Eigen::Vector4d::Zero());

/// 9-node tree on a 3x3 grid with 500 m spacing centered on the origin
/// (node 1 at (-500, -500), node 5 at (0, 0), node 9 at (500, 500)).
Topology tree9();
/// tree9 plus the links 3-6, 6-9 and 8-1.
Topology cycle9();
/// Single isolated node at the origin.
Topology single_node();
/// Looks up a named preset ("tree9", "cycle9", "single"). Throws InvalidInputError.
Topology topology_preset(const std::string& name);

}  // namespace jttsl
