#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "jttsl/gaussian_info.hpp"
#include "jttsl/network.hpp"

namespace jttsl {

/// Belief of one member of N^i at the current consensus round.
struct MemberBelief {
  NodeId id;
  const GaussianInfo* belief;
};

/**
 * Quadratic form of the drift loss
 *   J(Theta) = Theta^T Phi Theta + 2 Theta^T phi + const_term.
 */
struct LossQuadratic {
  Eigen::MatrixXd Phi;
  Eigen::VectorXd phi;
  double const_term = 0.0;

  [[nodiscard]] double evaluate(const Eigen::VectorXd& theta) const;
  /// 2 (Phi Theta + phi)
  [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  /// -Phi^-1 phi. Throws NumericalError if Phi is singular.
  [[nodiscard]] Eigen::VectorXd minimizer() const;
};

/**
 * Neighborhood of node i stacked over j in N^i \ {i} (ascending id):
 *   psi     = block-diag(pi^{i,j} Omega^j)
 *   e       = col(I_d, ..., I_d)
 *   x_stack = col(mean^j)
 */
struct StackedNeighborhood {
  NodeId owner = 0;
  int state_dim = 0;
  std::vector<NodeId> order;
  std::vector<double> weights;            // pi^{i,j}, same order
  std::vector<Eigen::MatrixXd> infos;     // Omega^j, same order
  double self_weight = 0.0;               // pi^{i,i}
  Eigen::MatrixXd own_info;               // Omega^i
  Eigen::VectorXd own_mean;               // mean^i
  Eigen::MatrixXd psi;
  Eigen::MatrixXd e;
  Eigen::VectorXd x_stack;

  /// pi^{i,i} Omega^i
  [[nodiscard]] Eigen::MatrixXd own_weighted() const { return self_weight * own_info; }
  /// E^T psi E + pi^{i,i} Omega^i, the information matrix after fusion.
  [[nodiscard]] Eigen::MatrixXd fused_info() const;
};

StackedNeighborhood stack_neighborhood(NodeId owner, std::span<const MemberBelief> members,
                                       const ConsensusWeights& w);

/**
 * Coefficients of the single-round drift loss:
 *   Phi = 0.5 [psi - psi E Omega_fused^-1 E^T psi]   (positive semidefinite)
 *   phi = Phi (x_stack - E mean^i)
 * const_term makes evaluate() equal the from-definition loss exactly.
 */
LossQuadratic loss_coefficients(const StackedNeighborhood& s);

/**
 * From-definition loss: fuse N^i with drifts `theta` (stacked in ascending
 * neighbor order), then sum pi^{i,j} KL(fused || belief_j shifted by theta^{i,j}).
 */
double loss_eval(NodeId owner, std::span<const MemberBelief> members, const ConsensusWeights& w,
                 const Eigen::VectorXd& theta);

enum class DriftUpdateMode { kRlsPerRound, kGradientPerInterval };

/// Online drift estimate Theta^i held by one node.
struct DriftEstimator {
  NodeId owner = 0;
  int state_dim = 4;
  std::vector<NodeId> order;
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd phi_bar;
  double lambda = 0.98;
  double gamma = 1.0;
  DriftUpdateMode mode = DriftUpdateMode::kGradientPerInterval;

  [[nodiscard]] DriftVector drifts() const;
};

/// Estimator seeded from `initial` with phi_bar = eps * I.
DriftEstimator make_drift_estimator(const DriftVector& initial, std::vector<NodeId> order,
                                    double lambda, double gamma, DriftUpdateMode mode,
                                    double eps = 1e-6);

/// Stacks drift entries in `order`.
Eigen::VectorXd stack_drifts(const DriftVector& d, std::span<const NodeId> order);

/// Zeroes velocity components of every 4-D block; other dimensions pass through.
void zero_velocities(Eigen::VectorXd& theta, int state_dim);

/**
 * Recursive least squares step:
 *   phi_bar' = lambda phi_bar + Phi
 *   theta'   = theta - phi_bar'^-1 (phi + Phi theta)
 * Throws NumericalError if phi_bar' is not invertible.
 */
DriftEstimator rls_update(const DriftEstimator& e, const LossQuadratic& lq);

/// theta' = theta - gamma * 2 (Phi theta + phi)
DriftEstimator gradient_step(const DriftEstimator& e, const LossQuadratic& lq);

}  // namespace jttsl
