#include "jttsl/gaussian_info.hpp"

#include <cmath>
#include <string>

#include "jttsl/errors.hpp"

namespace jttsl {

namespace {

constexpr double kSymmetryTol = 1e-9;
constexpr double kWeightSumTol = 1e-12;

}  // namespace

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw InvalidInputError(std::string(what) + ": matrix must be square and non-empty");
  }
  if (!m.allFinite()) {
    throw InvalidInputError(std::string(what) + ": matrix has non-finite entries");
  }
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw InvalidInputError(std::string(what) + ": matrix is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw InvalidInputError(std::string(what) + ": matrix is not positive definite");
  }
  return llt;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
  const auto llt = checked_llt(m, what);
  return symmetrized(llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols())));
}

Eigen::VectorXd GaussianInfo::mean() const {
  return checked_llt(info_mat, "information matrix").solve(info_vec);
}

GaussianInfo from_moment(const GaussianMoment& g) {
  if (g.cov.rows() != g.mean.size()) {
    throw InvalidInputError("from_moment: mean/covariance dimension mismatch");
  }
  GaussianInfo out;
  out.info_mat = spd_inverse(g.cov, "from_moment covariance");
  out.info_vec = out.info_mat * g.mean;
  return out;
}

GaussianMoment to_moment(const GaussianInfo& g) {
  if (g.info_mat.rows() != g.info_vec.size()) {
    throw InvalidInputError("to_moment: vector/matrix dimension mismatch");
  }
  const auto llt = checked_llt(g.info_mat, "to_moment information matrix");
  GaussianMoment out;
  out.cov = symmetrized(llt.solve(Eigen::MatrixXd::Identity(g.dim(), g.dim())));
  out.mean = llt.solve(g.info_vec);
  return out;
}

double kl_divergence(const GaussianMoment& p, const GaussianMoment& q,
                     const Eigen::VectorXd& drift) {
  const Eigen::Index d = p.dim();
  if (q.dim() != d || drift.size() != d || p.cov.rows() != d || q.cov.rows() != d) {
    throw InvalidInputError("kl_divergence: dimension mismatch");
  }
  const auto llt_p = checked_llt(p.cov, "kl_divergence p covariance");
  const auto llt_q = checked_llt(q.cov, "kl_divergence q covariance");

  const Eigen::VectorXd diff = p.mean - (q.mean + drift);
  const double mahalanobis = diff.dot(llt_q.solve(diff));
  const double trace = llt_q.solve(p.cov).trace();
  const double log_ratio = log_det(llt_q) - log_det(llt_p);
  return 0.5 * (mahalanobis - static_cast<double>(d) + trace + log_ratio);
}

GaussianInfo wkl_fuse(std::span<const FusionTerm> terms) {
  if (terms.empty()) {
    throw InvalidInputError("wkl_fuse: empty input list");
  }
  const Eigen::Index d = terms.front().belief->dim();
  double weight_sum = 0.0;
  for (const auto& term : terms) {
    if (term.belief->dim() != d || term.belief->info_mat.rows() != d || term.drift.size() != d) {
      throw InvalidInputError("wkl_fuse: dimension mismatch");
    }
    if (!(term.weight > 0.0)) {
      throw InvalidInputError("wkl_fuse: weights must be strictly positive");
    }
    weight_sum += term.weight;
  }
  if (std::abs(weight_sum - 1.0) > kWeightSumTol) {
    throw InvalidInputError("wkl_fuse: weights must sum to one");
  }

  GaussianInfo out{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
  for (const auto& term : terms) {
    const auto& b = *term.belief;
    out.info_mat.noalias() += term.weight * b.info_mat;
    out.info_vec.noalias() += term.weight * (b.info_vec + b.info_mat * term.drift);
  }
  checked_llt(out.info_mat, "wkl_fuse output");
  return out;
}

}  // namespace jttsl
