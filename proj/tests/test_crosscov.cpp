#include "jlsgev/crosscov.hpp"

#include <gtest/gtest.h>

#include <numbers>

#include "jlsgev/errors.hpp"

namespace jlsgev {
namespace {

// Generic multivariate-normal log density via LLT, as an oracle for the
// closed-form coefficient prior.
double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::MatrixXd& cov) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd alpha = llt.solve(x);
  double logdet = 0.0;
  for (int i = 0; i < cov.rows(); ++i) {
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
  }
  return -0.5 * (x.size() * std::log(2.0 * std::numbers::pi) + logdet +
                 x.dot(alpha));
}

TEST(CoefCov, JointMatrixStructure) {
  const CoefCovariance c{1.0, 1.0, 0.5};
  const Eigen::MatrixXd cov = joint_coef_cov(c, 1);
  ASSERT_EQ(cov.rows(), 2);
  EXPECT_DOUBLE_EQ(cov(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(cov(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(cov(1, 0), 0.5);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  EXPECT_NEAR(es.eigenvalues()(0), 0.5, 1e-14);
  EXPECT_NEAR(es.eigenvalues()(1), 1.5, 1e-14);

  const Eigen::MatrixXd cov3 = joint_coef_cov({4.0, 9.0, -0.5}, 3);
  ASSERT_EQ(cov3.rows(), 6);
  EXPECT_DOUBLE_EQ(cov3(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(cov3(3, 3), 9.0);
  EXPECT_DOUBLE_EQ(cov3(0, 3), -0.5 * 2.0 * 3.0);
  EXPECT_DOUBLE_EQ(cov3(0, 4), 0.0);  // independent across indices
  EXPECT_DOUBLE_EQ(cov3(1, 2), 0.0);
}

TEST(CoefCov, PositiveSemidefiniteForAllRho) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const CoefCovariance c{0.05 + 5.0 * rng.uniform(),
                           0.05 + 5.0 * rng.uniform(),
                           2.0 * rng.uniform() - 1.0};
    const int p = trial % 3 == 0 ? 1 : (trial % 3 == 1 ? 4 : 20);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        joint_coef_cov(c, p));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10)
        << "rho=" << c.rho << " p=" << p;
  }
}

TEST(CoefCov, SampleCovarianceMatchesTarget) {
  const CoefCovariance c{1.0, 4.0, -0.6};  // cov(d1, d2) = -0.6*1*2 = -1.2
  Rng rng(99);
  const int n = 100000;
  double s11 = 0.0, s22 = 0.0, s12 = 0.0;
  Eigen::VectorXd d1, d2;
  for (int i = 0; i < n; ++i) {
    sample_coefficients(c, 1, rng, d1, d2);
    s11 += d1[0] * d1[0];
    s22 += d2[0] * d2[0];
    s12 += d1[0] * d2[0];
  }
  EXPECT_NEAR(s11 / n, 1.0, 0.02);
  EXPECT_NEAR(s22 / n, 4.0, 0.07);
  EXPECT_NEAR(s12 / n, -1.2, 0.03);
}

TEST(CoefCov, LogPriorMatchesGenericMvn) {
  Rng rng(5);
  for (const double rho : {-0.9, -0.3, 0.0, 0.7}) {
    const CoefCovariance c{2.0, 0.5, rho};
    const int p = 7;
    Eigen::VectorXd d1(p), d2(p);
    for (int i = 0; i < p; ++i) {
      d1[i] = rng.normal();
      d2[i] = rng.normal();
    }
    Eigen::VectorXd stacked(2 * p);
    stacked << d1, d2;
    EXPECT_NEAR(coef_log_prior(c, d1, d2),
                mvn_logpdf(stacked, joint_coef_cov(c, p)), 1e-10);
  }
}

TEST(CoefCov, DegenerateCorrelationHasNoDensity) {
  Eigen::VectorXd d1(2), d2(2);
  d1 << 0.1, -0.2;
  d2 << 0.3, 0.0;
  EXPECT_EQ(coef_log_prior({1.0, 1.0, 1.0}, d1, d2),
            -std::numeric_limits<double>::infinity());
}

TEST(CoefCov, Validation) {
  EXPECT_THROW(CoefCovariance({0.0, 1.0, 0.0}).validate(), ValidationError);
  EXPECT_THROW(CoefCovariance({1.0, 1.0, 1.5}).validate(), ValidationError);
  EXPECT_NO_THROW(CoefCovariance({1.0, 1.0, -1.0}).validate());
  EXPECT_THROW(LmcCoefficients({0.0, 0.0, 1.0}).validate(), ValidationError);
  EXPECT_THROW(LmcCoefficients({1.0, 0.0, -2.0}).validate(), ValidationError);
}

CrossCovSystem shared_system(double rho, double a21) {
  CrossCovSystem sys;
  sys.knots1 = build_knots({0.0, 1.0, 0.0, 1.0}, 2);
  sys.knots2 = sys.knots1;
  sys.coef = {1.0, 1.5, rho};
  sys.lmc = {0.8, a21, 1.2};
  return sys;
}

TEST(CrossCov, SharedBasisIsSymmetricForAnyRho) {
  // With one shared knot set, cov(w1(s), w2(t)) = cov(w2(s), w1(t)) for any
  // rho, so the asymmetry needs genuinely different basis systems.
  const CrossCovSystem sys = shared_system(0.7, -0.5);
  const Eigen::Vector2d s(0.2, 0.3), t(0.8, 0.6);
  const Eigen::Matrix2d cst = cross_covariance(s, t, sys);
  EXPECT_NEAR((cst - cst.transpose()).cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

CrossCovSystem shifted_system(double rho, double a21) {
  CrossCovSystem sys = shared_system(rho, a21);
  // Process 2 reads a translated copy of the grid; sizes stay equal.
  for (auto& k : sys.knots2.knots) k += Eigen::Vector2d(0.13, -0.07);
  return sys;
}

TEST(CrossCov, DistinctBasesBreakSymmetryOnlyWithRho) {
  const Eigen::Vector2d s(0.2, 0.3), t(0.8, 0.6);
  const CrossCovSystem coupled = shifted_system(0.7, -0.5);
  const Eigen::Matrix2d cst = cross_covariance(s, t, coupled);
  EXPECT_GT((cst - cst.transpose()).cwiseAbs().maxCoeff(), 1e-6);

  // Exchanging the roles of s and t transposes the whole 2x2 block.
  const Eigen::Matrix2d cts = cross_covariance(t, s, coupled);
  EXPECT_NEAR((cst - cts.transpose()).cwiseAbs().maxCoeff(), 0.0, 1e-14);

  const CrossCovSystem uncoupled = shifted_system(0.0, -0.5);
  const Eigen::Matrix2d ust = cross_covariance(s, t, uncoupled);
  EXPECT_LT((ust - ust.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CrossCov, StackedCovarianceIsPsd) {
  const CrossCovSystem sys = shifted_system(-0.8, 0.9);
  Rng rng(3);
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 10; ++i) {
    pts.emplace_back(rng.uniform(), rng.uniform());
  }
  // Stacked covariance of (w1 at all points, w2 at all points).
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd big(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Matrix2d c = cross_covariance(pts[i], pts[j], sys);
      big(i, j) = c(0, 0);
      big(i, n + j) = c(0, 1);
      big(n + i, j) = c(1, 0);
      big(n + i, n + j) = c(1, 1);
    }
  }
  EXPECT_NEAR((big - big.transpose()).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(big);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
}

TEST(LatentSurface, MatchesMaterializedOperator) {
  const KnotSet k1 = build_knots({0.0, 1.0, 0.0, 1.0}, 2);
  KnotSet k2 = k1;
  for (auto& k : k2.knots) k += Eigen::Vector2d(0.05, 0.02);
  Rng rng(17);
  const int p = k1.size();
  Eigen::VectorXd d1(p), d2(p);
  for (int i = 0; i < p; ++i) {
    d1[i] = rng.normal();
    d2[i] = rng.normal();
  }
  std::vector<Eigen::Vector2d> pts;
  std::vector<int> owner;
  for (int i = 0; i < 9; ++i) {
    pts.emplace_back(rng.uniform(), rng.uniform());
    owner.push_back(i < 5 ? 1 : 2);
  }
  const LmcCoefficients lmc{1.3, -0.4, 0.9};
  const double o1 = 2.0, o2 = -1.0;
  const Eigen::MatrixXd phi1 = eval_matrix(k1, pts);
  const Eigen::MatrixXd phi2 = eval_matrix(k2, pts);
  const Eigen::VectorXd got =
      latent_surface(phi1, phi2, d1, d2, owner, lmc, o1, o2);

  // Oracle: assemble the full block operator row by row.
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double v1 = phi1.row(i).dot(d1);
    const double v2 = phi2.row(i).dot(d2);
    const double want = owner[i] == 1 ? o1 + lmc.a11 * v1
                                      : o2 + lmc.a21 * v1 + lmc.a22 * v2;
    EXPECT_NEAR(got[i], want, 1e-13);
  }
}

}  // namespace
}  // namespace jlsgev
