#include "jttsl/cskf.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "jttsl/errors.hpp"

namespace jttsl {

namespace {

void put_f64(std::uint8_t* out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) {
    out[k] = static_cast<std::uint8_t>(bits >> (8 * k));
  }
}

double get_f64(const std::uint8_t* in) {
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) {
    bits |= static_cast<std::uint64_t>(in[k]) << (8 * k);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

NodeBelief make_belief(const GaussianMoment& prior) {
  const GaussianInfo info = from_moment(prior);
  return NodeBelief{info, info, 0};
}

ConsensusMessage make_message(NodeId sender, std::int64_t time, const NodeBelief& b) {
  return ConsensusMessage{sender, time, b.consensus_index, b.corrected.info_vec,
                          b.corrected.info_mat};
}

MessageBytes serialize(const ConsensusMessage& m) {
  if (m.info_vec.size() != kStateDim || m.info_mat.rows() != kStateDim ||
      m.info_mat.cols() != kStateDim) {
    throw InvalidInputError("serialize: only 4-D messages have a wire format");
  }
  MessageBytes out{};
  std::uint8_t* p = out.data();
  put_f64(p, static_cast<double>(m.sender));
  put_f64(p + 8, static_cast<double>(m.time));
  put_f64(p + 16, static_cast<double>(m.round));
  p += 24;
  for (int k = 0; k < kStateDim; ++k, p += 8) {
    put_f64(p, m.info_vec(k));
  }
  for (int r = 0; r < kStateDim; ++r) {
    for (int c = r; c < kStateDim; ++c, p += 8) {
      put_f64(p, m.info_mat(r, c));
    }
  }
  return out;
}

ConsensusMessage deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kMessageWireSize) {
    throw InvalidInputError("deserialize: expected " + std::to_string(kMessageWireSize) +
                            " bytes, got " + std::to_string(bytes.size()));
  }
  const std::uint8_t* p = bytes.data();
  ConsensusMessage m;
  m.sender = static_cast<NodeId>(get_f64(p));
  m.time = static_cast<std::int64_t>(get_f64(p + 8));
  m.round = static_cast<int>(get_f64(p + 16));
  p += 24;
  m.info_vec.resize(kStateDim);
  for (int k = 0; k < kStateDim; ++k, p += 8) {
    m.info_vec(k) = get_f64(p);
  }
  m.info_mat.resize(kStateDim, kStateDim);
  for (int r = 0; r < kStateDim; ++r) {
    for (int c = r; c < kStateDim; ++c, p += 8) {
      m.info_mat(r, c) = m.info_mat(c, r) = get_f64(p);
    }
  }
  return m;
}

NodeBelief correct(const NodeBelief& b, std::span<const SensorModel> sensors,
                   std::span<const Eigen::VectorXd> ys) {
  if (sensors.size() != ys.size()) {
    throw InvalidInputError("correct: one measurement per sensor required");
  }
  const Eigen::VectorXd x_pred = b.predicted.mean();
  Eigen::MatrixXd info_mat = b.predicted.info_mat;
  Eigen::VectorXd info_vec = b.predicted.info_vec;
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    const SensorModel& s = sensors[k];
    const Eigen::MatrixXd c = s.jacobian(x_pred);
    const Eigen::MatrixXd ctv = c.transpose() * s.meas_info;
    const Eigen::VectorXd y_bar = s.innovation(ys[k], s.measure(x_pred)) + c * x_pred;
    info_mat += ctv * c;
    info_vec += ctv * y_bar;
  }

  NodeBelief out = b;
  out.corrected.info_mat = symmetrized(info_mat);
  out.corrected.info_vec = std::move(info_vec);
  out.consensus_index = 0;
  return out;
}

NodeBelief correct(const NodeBelief& b, const SensorModel& s, const Eigen::VectorXd& y) {
  return correct(b, std::span<const SensorModel>(&s, 1), std::span<const Eigen::VectorXd>(&y, 1));
}

NodeBelief consensus_step(const NodeBelief& own, NodeId self, std::int64_t time,
                          std::span<const ConsensusMessage> msgs, const Topology& topology,
                          const ConsensusWeights& weights, const DriftVector& drifts) {
  const auto& members = topology.in_neighbors(self);
  std::vector<GaussianInfo> received(members.size());
  std::vector<FusionTerm> terms;
  terms.reserve(members.size());

  for (std::size_t k = 0; k < members.size(); ++k) {
    const NodeId j = members[k];
    if (j == self) {
      terms.push_back({&own.corrected, weights.weight(self, self),
                       Eigen::VectorXd::Zero(own.corrected.dim())});
      continue;
    }
    const auto matches = [j](const ConsensusMessage& m) { return m.sender == j; };
    const auto it = std::find_if(msgs.begin(), msgs.end(), matches);
    if (it == msgs.end()) {
      throw InvalidInputError("consensus_step: node " + std::to_string(self) +
                              " missing message from " + std::to_string(j));
    }
    if (std::count_if(msgs.begin(), msgs.end(), matches) > 1) {
      throw InvalidInputError("consensus_step: duplicate message from " + std::to_string(j));
    }
    if (it->round != own.consensus_index || it->time != time) {
      throw InvalidInputError("consensus_step: message from " + std::to_string(j) +
                              " has round " + std::to_string(it->round) + " at time " +
                              std::to_string(it->time) + ", expected round " +
                              std::to_string(own.consensus_index) + " at time " +
                              std::to_string(time));
    }
    received[k] = GaussianInfo{it->info_vec, it->info_mat};
    terms.push_back({&received[k], weights.weight(self, j), drifts.at(j)});
  }
  if (msgs.size() + 1 != members.size()) {
    throw InvalidInputError("consensus_step: node " + std::to_string(self) +
                            " received messages from non-neighbors");
  }

  NodeBelief out = own;
  out.corrected = wkl_fuse(terms);
  ++out.consensus_index;
  return out;
}

NodeBelief predict(const NodeBelief& b, const MotionModel& m) {
  const Eigen::VectorXd x = b.corrected.mean();
  const Eigen::MatrixXd a = m.jacobian(x);
  const Eigen::MatrixXd& w = m.process_info;
  const Eigen::MatrixXd wa = w * a;

  const Eigen::MatrixXd inner_mat = symmetrized(b.corrected.info_mat + a.transpose() * wa);
  Eigen::LLT<Eigen::MatrixXd> inner(inner_mat);
  if (!inner_mat.allFinite() || inner.info() != Eigen::Success) {
    throw NumericalError("predict: Omega + A^T W A is not positive definite");
  }

  NodeBelief out = b;
  out.predicted.info_mat = symmetrized(w - wa * inner.solve(wa.transpose()));
  out.predicted.info_vec = out.predicted.info_mat * m.transition(x);
  return out;
}

std::vector<ConsensusMessage> broadcast(std::span<const NodeBelief> beliefs, std::int64_t time) {
  std::vector<ConsensusMessage> out;
  out.reserve(beliefs.size());
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    out.push_back(make_message(static_cast<NodeId>(k) + 1, time, beliefs[k]));
  }
  return out;
}

std::vector<ConsensusMessage> inbox(std::span<const ConsensusMessage> all, const Topology& t,
                                    NodeId receiver) {
  std::vector<ConsensusMessage> out;
  for (NodeId j : t.in_neighbors(receiver)) {
    if (j == receiver) continue;
    const auto it = std::find_if(all.begin(), all.end(),
                                 [j](const ConsensusMessage& m) { return m.sender == j; });
    if (it != all.end()) out.push_back(*it);
  }
  return out;
}

std::vector<NodeBelief> synchronous_round(std::span<const NodeBelief> beliefs,
                                          std::int64_t time, const Topology& t,
                                          const ConsensusWeights& w,
                                          std::span<const DriftVector> drifts) {
  const auto msgs = broadcast(beliefs, time);
  std::vector<NodeBelief> next;
  next.reserve(beliefs.size());
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    const NodeId i = static_cast<NodeId>(k) + 1;
    next.push_back(consensus_step(beliefs[k], i, time, inbox(msgs, t, i), t, w, drifts[k]));
  }
  return next;
}

}  // namespace jttsl
