#include "jttsl/network.hpp"

#include <algorithm>
#include <cmath>

#include "jttsl/errors.hpp"
#include "jttsl/models.hpp"

namespace jttsl {

namespace {

constexpr double kWeightSumTol = 1e-12;
constexpr double kGridSpacing = 500.0;

std::vector<Position> grid3x3() {
  std::vector<Position> p;
  for (int k = 0; k < 9; ++k) {
    p.push_back({kGridSpacing * (k % 3 - 1), kGridSpacing * (k / 3 - 1)});
  }
  return p;
}

const std::vector<std::pair<NodeId, NodeId>> kTreeLinks = {{1, 2}, {2, 3}, {2, 4}, {4, 5},
                                                           {5, 6}, {4, 7}, {7, 8}, {7, 9}};

}  // namespace

Topology::Topology(int node_count, std::vector<Edge> edges, std::vector<Position> positions)
    : node_count_(node_count), edges_(std::move(edges)), positions_(std::move(positions)) {
  if (node_count_ < 1) {
    throw InvalidInputError("Topology: node count must be positive");
  }
  if (static_cast<int>(positions_.size()) != node_count_) {
    throw InvalidInputError("Topology: one position per node required");
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  in_neighbors_.assign(node_count_, {});
  for (NodeId i = 1; i <= node_count_; ++i) {
    in_neighbors_[i - 1].push_back(i);
  }
  for (const auto& e : edges_) {
    check_node(e.from);
    check_node(e.to);
    if (e.from == e.to) {
      throw InvalidInputError("Topology: self-loop edge " + std::to_string(e.from));
    }
    in_neighbors_[e.to - 1].push_back(e.from);
  }
  for (auto& n : in_neighbors_) {
    std::sort(n.begin(), n.end());
  }
}

Topology Topology::undirected(int node_count, const std::vector<std::pair<NodeId, NodeId>>& links,
                              std::vector<Position> positions) {
  std::vector<Edge> edges;
  for (const auto& [a, b] : links) {
    edges.push_back({a, b});
    edges.push_back({b, a});
  }
  return Topology(node_count, std::move(edges), std::move(positions));
}

void Topology::check_node(NodeId i) const {
  if (i < 1 || i > node_count_) {
    throw InvalidInputError("unknown node id " + std::to_string(i));
  }
}

const Position& Topology::position(NodeId i) const {
  check_node(i);
  return positions_[i - 1];
}

bool Topology::has_edge(NodeId from, NodeId to) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{from, to});
}

bool Topology::is_symmetric() const {
  return std::all_of(edges_.begin(), edges_.end(),
                     [this](const Edge& e) { return has_edge(e.to, e.from); });
}

const std::vector<NodeId>& Topology::in_neighbors(NodeId i) const {
  check_node(i);
  return in_neighbors_[i - 1];
}

std::vector<NodeId> Topology::neighbors_excluding_self(NodeId i) const {
  std::vector<NodeId> out;
  for (NodeId j : in_neighbors(i)) {
    if (j != i) out.push_back(j);
  }
  return out;
}

int Topology::degree(NodeId i) const {
  return static_cast<int>(in_neighbors(i).size()) - 1;
}

std::vector<NodeId> in_neighbors(const Topology& t, NodeId i) { return t.in_neighbors(i); }

ConsensusWeights::ConsensusWeights(std::vector<std::map<NodeId, double>> rows)
    : rows_(std::move(rows)) {
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    const NodeId i = static_cast<NodeId>(k) + 1;
    double sum = 0.0;
    for (const auto& [j, w] : rows_[k]) {
      if (!(w > 0.0)) {
        throw InvalidInputError("ConsensusWeights: non-positive weight at node " +
                                std::to_string(i));
      }
      sum += w;
    }
    if (!rows_[k].contains(i)) {
      throw InvalidInputError("ConsensusWeights: missing self weight at node " +
                              std::to_string(i));
    }
    if (std::abs(sum - 1.0) > kWeightSumTol) {
      throw InvalidInputError("ConsensusWeights: weights of node " + std::to_string(i) +
                              " do not sum to one");
    }
  }
}

double ConsensusWeights::weight(NodeId i, NodeId j) const {
  const auto& r = row(i);
  const auto it = r.find(j);
  if (it == r.end()) {
    throw InvalidInputError("ConsensusWeights: no weight for (" + std::to_string(i) + ", " +
                            std::to_string(j) + ")");
  }
  return it->second;
}

const std::map<NodeId, double>& ConsensusWeights::row(NodeId i) const {
  if (i < 1 || i > node_count()) {
    throw InvalidInputError("ConsensusWeights: unknown node id " + std::to_string(i));
  }
  return rows_[i - 1];
}

Eigen::VectorXd DriftVector::at(NodeId j) const {
  if (j == owner) return Eigen::VectorXd::Zero(dim);
  const auto it = entries.find(j);
  if (it == entries.end()) {
    throw InvalidInputError("DriftVector: node " + std::to_string(owner) + " has no drift for " +
                            std::to_string(j));
  }
  return it->second;
}

ConsensusWeights metropolis_weights(const Topology& t) {
  if (!t.is_symmetric()) {
    throw InvalidInputError("metropolis_weights: edge set is not symmetric");
  }
  std::vector<std::map<NodeId, double>> rows(t.node_count());
  for (NodeId i = 1; i <= t.node_count(); ++i) {
    auto& row = rows[i - 1];
    double off = 0.0;
    for (NodeId j : t.neighbors_excluding_self(i)) {
      const double w = 1.0 / (1.0 + std::max(t.degree(i), t.degree(j)));
      row[j] = w;
      off += w;
    }
    row[i] = 1.0 - off;
  }
  return ConsensusWeights(std::move(rows));
}

std::vector<DriftVector> true_drifts(const Topology& t) {
  std::vector<DriftVector> out(t.node_count());
  for (NodeId i = 1; i <= t.node_count(); ++i) {
    out[i - 1].owner = i;
    const Position& pi = t.position(i);
    for (NodeId j : t.neighbors_excluding_self(i)) {
      const Position& pj = t.position(j);
      Eigen::Vector4d theta = Eigen::Vector4d::Zero();
      theta(kXi) = pj.xi - pi.xi;
      theta(kEta) = pj.eta - pi.eta;
      out[i - 1].entries[j] = theta;
    }
  }
  return out;
}

std::vector<DriftVector> uniform_drifts(const Topology& t, const Eigen::Vector4d& value) {
  std::vector<DriftVector> out(t.node_count());
  for (NodeId i = 1; i <= t.node_count(); ++i) {
    out[i - 1].owner = i;
    for (NodeId j : t.neighbors_excluding_self(i)) {
      out[i - 1].entries[j] = value;
    }
  }
  return out;
}

Topology tree9() { return Topology::undirected(9, kTreeLinks, grid3x3()); }

Topology cycle9() {
  auto links = kTreeLinks;
  links.insert(links.end(), {{3, 6}, {6, 9}, {8, 1}});
  return Topology::undirected(9, links, grid3x3());
}

Topology single_node() { return Topology(1, {}, {Position{}}); }

Topology topology_preset(const std::string& name) {
  if (name == "tree9") return tree9();
  if (name == "cycle9") return cycle9();
  if (name == "single") return single_node();
  throw InvalidInputError("unknown topology preset '" + name + "'");
}

}  // namespace jttsl
