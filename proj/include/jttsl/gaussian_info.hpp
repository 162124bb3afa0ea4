#pragma once

#include <span>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace jttsl {

/// Gaussian belief parameterized by mean and covariance.
struct GaussianMoment {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
};

/// Gaussian belief in information form: info_mat = P^-1, info_vec = P^-1 * mean.
struct GaussianInfo {
  Eigen::VectorXd info_vec;
  Eigen::MatrixXd info_mat;

  [[nodiscard]] Eigen::Index dim() const { return info_vec.size(); }
  /// Mean recovered through a checked Cholesky solve.
  [[nodiscard]] Eigen::VectorXd mean() const;
};

/// One operand of a weighted-KL fusion. `drift` shifts the operand's mean
/// into the fusing node's frame; pass a zero vector for no shift.
struct FusionTerm {
  const GaussianInfo* belief;
  double weight;
  Eigen::VectorXd drift;
};

/**
 * Cholesky factorization that refuses non-symmetric or non-PD input.
 *
 * Symmetry is checked with a relative tolerance of 1e-9 against the largest
 * absolute entry. Throws InvalidInputError naming `what` on failure.
 */
Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& m, const char* what);

/// log det(m) from the Cholesky factor of an SPD matrix.
double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt);

/// Inverse of an SPD matrix via checked_llt; result is exactly symmetric.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what);

/// 0.5 * (m + m^T)
Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m);

GaussianInfo from_moment(const GaussianMoment& g);
GaussianMoment to_moment(const GaussianInfo& g);

/**
 * KL divergence D(p || q shifted by drift) between Gaussians:
 *   0.5 * [ (mp - (mq + drift))^T Pq^-1 (mp - (mq + drift)) - d
 *           + tr(Pq^-1 Pp) + ln(det Pq / det Pp) ]
 * Log-determinants come from the Cholesky factors.
 */
double kl_divergence(const GaussianMoment& p, const GaussianMoment& q,
                     const Eigen::VectorXd& drift);

/**
 * Weighted Kullback-Leibler average of Gaussian beliefs (covariance
 * intersection with drift shifts):
 *   info_mat = sum_j w_j Omega_j
 *   info_vec = sum_j w_j (q_j + Omega_j theta_j)
 *
 * Weights must be strictly positive and sum to one within 1e-12; they are
 * never renormalized.
 */
GaussianInfo wkl_fuse(std::span<const FusionTerm> terms);

}  // namespace jttsl
