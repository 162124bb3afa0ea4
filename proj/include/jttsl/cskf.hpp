#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "jttsl/gaussian_info.hpp"
#include "jttsl/models.hpp"
#include "jttsl/network.hpp"

namespace jttsl {

/// Per-node filter state across one sampling interval.
struct NodeBelief {
  GaussianInfo predicted;  // q_{t|t-1}, Omega_{t|t-1}
  GaussianInfo corrected;  // q_{t|t}(l), Omega_{t|t}(l)
  int consensus_index = 0;
};

/// Round-l payload a node broadcasts to its out-neighbors.
struct ConsensusMessage {
  NodeId sender = 0;
  std::int64_t time = 0;
  int round = 0;
  Eigen::VectorXd info_vec;
  Eigen::MatrixXd info_mat;
};

/// Flat wire size: 17 little-endian binary64 values.
inline constexpr std::size_t kMessageWireSize = 17 * 8;
using MessageBytes = std::array<std::uint8_t, kMessageWireSize>;

/// Belief with x = mean and P = cov, stored as both predicted and corrected.
NodeBelief make_belief(const GaussianMoment& prior);

ConsensusMessage make_message(NodeId sender, std::int64_t time, const NodeBelief& b);

/**
 * Flat encoding: sender, time, round, 4 info_vec entries, then the 10
 * upper-triangular info_mat entries row by row. Every field is an IEEE-754
 * binary64 in little-endian byte order. Only 4-D messages are encodable.
 */
MessageBytes serialize(const ConsensusMessage& m);
ConsensusMessage deserialize(std::span<const std::uint8_t> bytes);

/**
 * Measurement update in information form. The sensor is linearized once at
 * the predicted mean; the pseudo-measurement y - h(x) + C x carries the
 * wrapped bearing innovation. Resets consensus_index to 0.
 */
NodeBelief correct(const NodeBelief& b, const SensorModel& s, const Eigen::VectorXd& y);

/// Stacked update with several sensors, all linearized at the same predicted
/// mean (used by the centralized filter).
NodeBelief correct(const NodeBelief& b, std::span<const SensorModel> sensors,
                   std::span<const Eigen::VectorXd> ys);

/**
 * One consensus round at node `self`: weighted-KL average of its own
 * round-l belief and one message per in-neighbor, each neighbor shifted by
 * drifts.at(sender).
 *
 * Throws InvalidInputError on a missing or duplicate neighbor message, or on a
 * message whose round/time does not match the receiver.
 */
NodeBelief consensus_step(const NodeBelief& own, NodeId self, std::int64_t time,
                          std::span<const ConsensusMessage> msgs, const Topology& topology,
                          const ConsensusWeights& weights, const DriftVector& drifts);

/// Information-form time update
///   Omega' = W - W A (Omega + A^T W A)^-1 A^T W,  q' = Omega' f(x).
/// Throws NumericalError if the inner matrix cannot be factorized.
NodeBelief predict(const NodeBelief& b, const MotionModel& m);

/// Messages for every node in `beliefs` (element k is node k+1).
std::vector<ConsensusMessage> broadcast(std::span<const NodeBelief> beliefs, std::int64_t time);

/// Messages addressed to `receiver`, i.e. from its in-neighbors other than itself.
std::vector<ConsensusMessage> inbox(std::span<const ConsensusMessage> all, const Topology& t,
                                    NodeId receiver);

/**
 * One synchronous round over the whole network. Reads only the round-l
 * buffer and writes a fresh round-(l+1) buffer, so node update order is
 * irrelevant.
 */
std::vector<NodeBelief> synchronous_round(std::span<const NodeBelief> beliefs,
                                          std::int64_t time, const Topology& t,
                                          const ConsensusWeights& w,
                                          std::span<const DriftVector> drifts);

}  // namespace jttsl
