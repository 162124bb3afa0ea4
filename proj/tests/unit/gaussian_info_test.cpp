#include "jttsl/gaussian_info.hpp"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "jttsl/errors.hpp"
#include "support/oracles.hpp"

namespace jttsl {
namespace {

using testing::random_spd;
using testing::random_vector;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

TEST(FromMoment, IdentityCovariance) {
  const auto g = from_moment({vec({0.0}), scalar(1.0)});
  EXPECT_DOUBLE_EQ(g.info_vec(0), 0.0);
  EXPECT_DOUBLE_EQ(g.info_mat(0, 0), 1.0);
}

TEST(FromMoment, ScalarInversion) {
  const auto g = from_moment({vec({1.0}), scalar(0.5)});
  EXPECT_DOUBLE_EQ(g.info_vec(0), 2.0);
  EXPECT_DOUBLE_EQ(g.info_mat(0, 0), 2.0);
}

TEST(FromMoment, RejectsNonPositiveDefinite) {
  EXPECT_THROW(from_moment({vec({0.0}), scalar(-1.0)}), InvalidInputError);
  Eigen::MatrixXd asym(2, 2);
  asym << 2.0, 1.0, 0.0, 2.0;
  EXPECT_THROW(from_moment({vec({0.0, 0.0}), asym}), InvalidInputError);
}

TEST(ToMoment, Examples) {
  auto m = to_moment({vec({0.0}), scalar(1.0)});
  EXPECT_DOUBLE_EQ(m.mean(0), 0.0);
  EXPECT_DOUBLE_EQ(m.cov(0, 0), 1.0);
  m = to_moment({vec({2.0}), scalar(2.0)});
  EXPECT_DOUBLE_EQ(m.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(m.cov(0, 0), 0.5);
  m = to_moment({vec({3.0}), scalar(3.0)});
  EXPECT_DOUBLE_EQ(m.mean(0), 1.0);
}

TEST(ToMoment, RejectsSingular) {
  Eigen::MatrixXd singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  EXPECT_THROW(to_moment({vec({0.0, 0.0}), singular}), InvalidInputError);
}

TEST(MomentInfo, RoundTripProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 4;
    const GaussianMoment g{random_vector(rng, n, -100.0, 100.0), random_spd(rng, n, 0.2, 10.0)};
    const GaussianMoment back = to_moment(from_moment(g));
    EXPECT_LT((back.mean - g.mean).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((back.cov - g.cov).cwiseAbs().maxCoeff(), 1e-9 * g.cov.norm());
  }
}

TEST(KlDivergence, IdenticalIsZero) {
  std::mt19937_64 rng(3);
  const GaussianMoment p{random_vector(rng, 4, -5, 5), random_spd(rng, 4)};
  EXPECT_NEAR(kl_divergence(p, p, Eigen::VectorXd::Zero(4)), 0.0, 1e-12);
}

TEST(KlDivergence, HandEvaluatedScalarCases) {
  EXPECT_NEAR(kl_divergence({vec({0.0}), scalar(1.0)}, {vec({1.0}), scalar(1.0)}, vec({0.0})),
              0.5, 1e-15);
  EXPECT_NEAR(kl_divergence({vec({0.0}), scalar(2.0)}, {vec({0.0}), scalar(1.0)}, vec({0.0})),
              (1.0 - std::log(2.0)) / 2.0, 1e-15);
  EXPECT_NEAR((1.0 - std::log(2.0)) / 2.0, 0.15343, 1e-5);
}

TEST(KlDivergence, DriftShiftsSecondArgument) {
  // Shifting q by its mean offset makes the pair identical.
  const GaussianMoment p{vec({3.0}), scalar(1.0)};
  const GaussianMoment q{vec({1.0}), scalar(1.0)};
  EXPECT_NEAR(kl_divergence(p, q, vec({2.0})), 0.0, 1e-15);
}

TEST(KlDivergence, MatchesQuadrature1D) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    const auto mp = random_vector(rng, 1, -3, 3);
    const auto mq = random_vector(rng, 1, -3, 3);
    const auto cp = random_spd(rng, 1, 0.3);
    const auto cq = random_spd(rng, 1, 0.3);
    EXPECT_NEAR(kl_divergence({mp, cp}, {mq, cq}, Eigen::VectorXd::Zero(1)),
                testing::kl_by_quadrature(mp, cp, mq, cq), 1e-4);
  }
}

TEST(KlDivergence, NonNegativeProperty) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 300; ++k) {
    const int n = 1 + k % 4;
    const GaussianMoment p{random_vector(rng, n, -10, 10), random_spd(rng, n)};
    const GaussianMoment q{random_vector(rng, n, -10, 10), random_spd(rng, n)};
    const double d = kl_divergence(p, q, Eigen::VectorXd::Zero(n));
    EXPECT_GE(d, 0.0);
    EXPECT_NEAR(d, testing::kl_textbook(p.mean, p.cov, q.mean, q.cov), 1e-8 * (1.0 + d));
  }
}

TEST(KlDivergence, RejectsDimensionMismatch) {
  EXPECT_THROW(kl_divergence({vec({0.0}), scalar(1.0)}, {vec({0.0, 0.0}), Eigen::MatrixXd::Identity(2, 2)},
                             vec({0.0})),
               InvalidInputError);
}

TEST(WklFuse, SingletonIsIdentity) {
  const GaussianInfo g{vec({1.5, -2.0}), Eigen::MatrixXd::Identity(2, 2) * 3.0};
  const std::vector<FusionTerm> terms{{&g, 1.0, Eigen::VectorXd::Zero(2)}};
  const auto out = wkl_fuse(terms);
  EXPECT_EQ(out.info_vec, g.info_vec);
  EXPECT_EQ(out.info_mat, g.info_mat);
}

TEST(WklFuse, ScalarAverage) {
  const GaussianInfo a{vec({0.0}), scalar(1.0)};
  const GaussianInfo b{vec({3.0}), scalar(3.0)};
  std::vector<FusionTerm> terms{{&a, 0.5, vec({0.0})}, {&b, 0.5, vec({0.0})}};
  auto out = wkl_fuse(terms);
  EXPECT_DOUBLE_EQ(out.info_mat(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(out.info_vec(0), 1.5);
  EXPECT_DOUBLE_EQ(out.mean()(0), 0.75);

  terms[1].drift = vec({2.0});
  out = wkl_fuse(terms);
  EXPECT_DOUBLE_EQ(out.info_mat(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(out.info_vec(0), 4.5);
  EXPECT_DOUBLE_EQ(out.mean()(0), 2.25);
}

TEST(WklFuse, Errors) {
  const GaussianInfo a{vec({0.0}), scalar(1.0)};
  EXPECT_THROW(wkl_fuse(std::vector<FusionTerm>{}), InvalidInputError);
  EXPECT_THROW(wkl_fuse(std::vector<FusionTerm>{{&a, 0.5, vec({0.0})}, {&a, 0.49, vec({0.0})}}),
               InvalidInputError);
  EXPECT_THROW(wkl_fuse(std::vector<FusionTerm>{{&a, 1.0 + 1e-11, vec({0.0})}}),
               InvalidInputError);
  EXPECT_THROW(wkl_fuse(std::vector<FusionTerm>{{&a, 1.5, vec({0.0})}, {&a, -0.5, vec({0.0})}}),
               InvalidInputError);
}

TEST(WklFuse, OutputPositiveDefiniteProperty) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int k = 0; k < 200; ++k) {
    const int count = 1 + k % 5;
    std::vector<GaussianInfo> beliefs;
    std::vector<double> w;
    for (int j = 0; j < count; ++j) {
      beliefs.push_back({random_vector(rng, 4, -10, 10), random_spd(rng, 4, 1e-3)});
      w.push_back(u(rng));
    }
    double total = 0.0;
    for (double x : w) total += x;
    std::vector<FusionTerm> terms;
    double used = 0.0;
    for (int j = 0; j < count; ++j) {
      const double wj = j + 1 == count ? 1.0 - used : w[j] / total;
      used += wj;
      terms.push_back({&beliefs[j], wj, random_vector(rng, 4, -100, 100)});
    }
    const auto out = wkl_fuse(terms);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(out.info_mat).eigenvalues().minCoeff(),
              0.0);
  }
}

// The fused belief minimizes sum_j w_j KL(p || p_j) over Gaussians p.
TEST(WklFuse, MinimizesWeightedKlProperty) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 50; ++k) {
    const int dim = 1 + k % 3;
    std::vector<GaussianInfo> beliefs;
    for (int j = 0; j < 3; ++j) {
      beliefs.push_back(from_moment({random_vector(rng, dim, -5, 5), random_spd(rng, dim, 0.2)}));
    }
    const std::vector<double> w{0.2, 0.3, 0.5};
    std::vector<FusionTerm> terms;
    for (int j = 0; j < 3; ++j) terms.push_back({&beliefs[j], w[j], Eigen::VectorXd::Zero(dim)});
    const GaussianMoment fused = to_moment(wkl_fuse(terms));

    const auto objective = [&](const GaussianMoment& p) {
      double s = 0.0;
      for (int j = 0; j < 3; ++j) {
        s += w[j] * kl_divergence(p, to_moment(beliefs[j]), Eigen::VectorXd::Zero(dim));
      }
      return s;
    };
    const double best = objective(fused);
    for (int trial = 0; trial < 20; ++trial) {
      GaussianMoment perturbed = fused;
      for (int r = 0; r < dim; ++r) perturbed.mean(r) += 0.1 * normal(rng);
      Eigen::MatrixXd e(dim, dim);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) e(r, c) = 0.05 * normal(rng);
      const Eigen::MatrixXd f = Eigen::MatrixXd::Identity(dim, dim) + e;
      perturbed.cov = f * fused.cov * f.transpose();
      EXPECT_LE(best, objective(perturbed) + 1e-12);
    }
  }
}

TEST(CheckedLlt, LogDetMatchesDeterminant) {
  std::mt19937_64 rng(19);
  const auto m = random_spd(rng, 4);
  EXPECT_NEAR(log_det(checked_llt(m, "m")), std::log(m.determinant()), 1e-10);
}

}  // namespace
}  // namespace jttsl
