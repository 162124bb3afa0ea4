#include "jttsl/drift_cal.hpp"

#include <algorithm>
#include <string>

#include "jttsl/errors.hpp"
#include "jttsl/models.hpp"

namespace jttsl {

double LossQuadratic::evaluate(const Eigen::VectorXd& theta) const {
  return theta.dot(Phi * theta) + 2.0 * theta.dot(phi) + const_term;
}

Eigen::VectorXd LossQuadratic::gradient(const Eigen::VectorXd& theta) const {
  return 2.0 * (Phi * theta + phi);
}

Eigen::VectorXd LossQuadratic::minimizer() const {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Phi);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 0.0) {
    throw NumericalError("LossQuadratic::minimizer: Phi is singular");
  }
  return -ldlt.solve(phi);
}

Eigen::MatrixXd StackedNeighborhood::fused_info() const {
  return symmetrized(e.transpose() * psi * e + own_weighted());
}

StackedNeighborhood stack_neighborhood(NodeId owner, std::span<const MemberBelief> members,
                                       const ConsensusWeights& w) {
  std::vector<MemberBelief> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const MemberBelief& a, const MemberBelief& b) { return a.id < b.id; });
  const auto self = std::find_if(sorted.begin(), sorted.end(),
                                 [owner](const MemberBelief& m) { return m.id == owner; });
  if (self == sorted.end()) {
    throw InvalidInputError("stack_neighborhood: missing own belief for node " +
                            std::to_string(owner));
  }

  StackedNeighborhood s;
  s.owner = owner;
  s.state_dim = static_cast<int>(self->belief->dim());
  s.self_weight = w.weight(owner, owner);
  s.own_info = self->belief->info_mat;
  s.own_mean = self->belief->mean();

  for (const auto& [j, pij] : w.row(owner)) {
    if (j == owner) continue;
    const auto it = std::find_if(sorted.begin(), sorted.end(),
                                 [j](const MemberBelief& m) { return m.id == j; });
    if (it == sorted.end()) {
      throw InvalidInputError("stack_neighborhood: missing belief of neighbor " +
                              std::to_string(j));
    }
    if (it->belief->dim() != s.state_dim) {
      throw InvalidInputError("stack_neighborhood: dimension mismatch");
    }
    s.order.push_back(j);
    s.weights.push_back(pij);
    s.infos.push_back(it->belief->info_mat);
  }
  if (s.order.size() + 1 != sorted.size()) {
    throw InvalidInputError("stack_neighborhood: belief from a non-neighbor");
  }

  const Eigen::Index d = s.state_dim;
  const auto n = static_cast<Eigen::Index>(s.order.size());
  s.psi = Eigen::MatrixXd::Zero(n * d, n * d);
  s.e = Eigen::MatrixXd::Zero(n * d, d);
  s.x_stack = Eigen::VectorXd::Zero(n * d);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto it = std::find_if(sorted.begin(), sorted.end(),
                                 [&](const MemberBelief& m) { return m.id == s.order[k]; });
    s.psi.block(k * d, k * d, d, d) = s.weights[k] * s.infos[k];
    s.e.block(k * d, 0, d, d).setIdentity();
    s.x_stack.segment(k * d, d) = it->belief->mean();
  }
  return s;
}

LossQuadratic loss_coefficients(const StackedNeighborhood& s) {
  const Eigen::MatrixXd fused = s.fused_info();
  Eigen::LLT<Eigen::MatrixXd> fused_llt(fused);
  if (fused_llt.info() != Eigen::Success) {
    throw NumericalError("loss_coefficients: fused information matrix is singular");
  }

  // psi E is the column of weighted neighbor blocks.
  const Eigen::MatrixXd psi_e = s.psi * s.e;
  LossQuadratic lq;
  lq.Phi = symmetrized(0.5 * (s.psi - psi_e * fused_llt.solve(psi_e.transpose())));
  const Eigen::VectorXd offset = s.x_stack - s.e * s.own_mean;
  lq.phi = lq.Phi * offset;

  // Covariance mismatch term: sum_j pi_j tr(Omega_j Omega_fused^-1) = d, so
  // 0.5 sum_j pi_j [tr(.) - d + ln det Omega_fused - ln det Omega_j] reduces to
  // 0.5 [ln det Omega_fused - sum_j pi_j ln det Omega_j].
  double weighted_log_det = s.self_weight * log_det(checked_llt(s.own_info, "own information"));
  for (std::size_t k = 0; k < s.infos.size(); ++k) {
    weighted_log_det += s.weights[k] * log_det(checked_llt(s.infos[k], "neighbor information"));
  }
  const double cov_term = 0.5 * (log_det(fused_llt) - weighted_log_det);
  lq.const_term = offset.dot(lq.phi) + cov_term;
  return lq;
}

double loss_eval(NodeId owner, std::span<const MemberBelief> members, const ConsensusWeights& w,
                 const Eigen::VectorXd& theta) {
  std::vector<MemberBelief> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const MemberBelief& a, const MemberBelief& b) { return a.id < b.id; });
  if (sorted.empty()) {
    throw InvalidInputError("loss_eval: empty neighborhood");
  }
  const Eigen::Index d = sorted.front().belief->dim();
  const auto n_others = static_cast<Eigen::Index>(sorted.size()) - 1;
  if (theta.size() != n_others * d) {
    throw InvalidInputError("loss_eval: drift vector has wrong length");
  }

  std::vector<FusionTerm> terms;
  Eigen::Index k = 0;
  for (const auto& m : sorted) {
    Eigen::VectorXd drift = Eigen::VectorXd::Zero(d);
    if (m.id != owner) {
      drift = theta.segment(k * d, d);
      ++k;
    }
    terms.push_back({m.belief, w.weight(owner, m.id), drift});
  }
  const GaussianMoment fused = to_moment(wkl_fuse(terms));

  double loss = 0.0;
  for (const auto& term : terms) {
    loss += term.weight * kl_divergence(fused, to_moment(*term.belief), term.drift);
  }
  return loss;
}

DriftVector DriftEstimator::drifts() const {
  DriftVector out;
  out.owner = owner;
  out.dim = state_dim;
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.entries[order[k]] =
        theta_hat.segment(static_cast<Eigen::Index>(k) * state_dim, state_dim);
  }
  return out;
}

Eigen::VectorXd stack_drifts(const DriftVector& d, std::span<const NodeId> order) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(order.size()) * d.dim);
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.segment(static_cast<Eigen::Index>(k) * d.dim, d.dim) = d.at(order[k]);
  }
  return out;
}

void zero_velocities(Eigen::VectorXd& theta, int state_dim) {
  if (state_dim != kStateDim) return;
  for (Eigen::Index k = 0; k < theta.size(); k += kStateDim) {
    theta(k + kXiDot) = 0.0;
    theta(k + kEtaDot) = 0.0;
  }
}

DriftEstimator make_drift_estimator(const DriftVector& initial, std::vector<NodeId> order,
                                    double lambda, double gamma, DriftUpdateMode mode,
                                    double eps) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw InvalidInputError("make_drift_estimator: forgetting factor must lie in (0, 1)");
  }
  DriftEstimator e;
  e.owner = initial.owner;
  e.state_dim = initial.dim;
  e.theta_hat = stack_drifts(initial, order);
  zero_velocities(e.theta_hat, e.state_dim);
  e.order = std::move(order);
  e.phi_bar = eps * Eigen::MatrixXd::Identity(e.theta_hat.size(), e.theta_hat.size());
  e.lambda = lambda;
  e.gamma = gamma;
  e.mode = mode;
  return e;
}

DriftEstimator rls_update(const DriftEstimator& e, const LossQuadratic& lq) {
  DriftEstimator out = e;
  out.phi_bar = symmetrized(e.lambda * e.phi_bar + lq.Phi);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(out.phi_bar);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().cwiseAbs().minCoeff() <= 0.0) {
    throw NumericalError("rls_update: accumulated matrix is not invertible");
  }
  out.theta_hat = e.theta_hat - ldlt.solve(lq.phi + lq.Phi * e.theta_hat);
  zero_velocities(out.theta_hat, out.state_dim);
  return out;
}

DriftEstimator gradient_step(const DriftEstimator& e, const LossQuadratic& lq) {
  DriftEstimator out = e;
  out.theta_hat = e.theta_hat - e.gamma * lq.gradient(e.theta_hat);
  zero_velocities(out.theta_hat, out.state_dim);
  return out;
}

}  // namespace jttsl
