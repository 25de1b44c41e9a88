#include "jlsgev/gev.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "jlsgev/errors.hpp"

namespace jlsgev {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent inverse: bisection on gev_cdf over the support.
double bisect_quantile(double q, const GevParams& p) {
  double lo = p.mu - 60.0 * p.sigma;
  double hi = p.mu + 1e6 * p.sigma;
  if (p.xi > kXiEps) lo = p.mu - p.sigma / p.xi + 1e-13;
  if (p.xi < -kXiEps) hi = p.mu - p.sigma / p.xi - 1e-13;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gev_cdf(mid, p) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Composite Simpson over segments bounded by quantile anchors, so heavy
// tails get resolution proportional to their probability mass.
double density_integral(const GevParams& p) {
  const std::vector<double> probs = {
      1e-9, 1e-6, 1e-3,  0.01,     0.1,          0.3,         0.5,
      0.7,  0.9,  0.99,  0.999,    1.0 - 1e-6,   1.0 - 1e-9};
  std::vector<double> anchors;
  for (double q : probs) anchors.push_back(gev_quantile(q, p));
  double total = 0.0;
  for (std::size_t seg = 0; seg + 1 < anchors.size(); ++seg) {
    const double lo = anchors[seg], hi = anchors[seg + 1];
    const int n = 4000;  // even
    const double h = (hi - lo) / n;
    double s = std::exp(gev_logpdf(lo, p)) + std::exp(gev_logpdf(hi, p));
    for (int i = 1; i < n; ++i) {
      s += (i % 2 ? 4.0 : 2.0) * std::exp(gev_logpdf(lo + i * h, p));
    }
    total += s * h / 3.0;
  }
  return total;
}

TEST(Gev, FrozenReferenceValues) {
  EXPECT_NEAR(gev_cdf(1.0, {0.0, 1.0, 0.2}), 0.6690626526678188, 1e-15);
  EXPECT_NEAR(gev_quantile(0.9, {0.0, 1.0, 0.0}), 2.2503673273124454, 1e-14);
  EXPECT_NEAR(gev_quantile(0.99, {0.0, 1.0, 0.2}), 7.546826408585782, 1e-13);
  EXPECT_NEAR(return_level(2.0, {5.0, 1.0, 0.0}), 5.366512920581664, 1e-14);
  EXPECT_DOUBLE_EQ(gev_logpdf(0.0, {0.0, 1.0, 0.0}), -1.0);
}

TEST(Gev, QuantileCdfRoundtrip) {
  const std::vector<double> qs = {0.01, 0.05, 0.1, 0.25, 0.5,
                                  0.75, 0.9,  0.95, 0.99, 0.999};
  const std::vector<double> sigmas = {0.1, 0.5, 1.0, 2.0, 10.0};
  const std::vector<double> xis = {-0.4, -0.2, -1e-9, 0.0, 0.1, 0.5, 0.9};
  for (double q : qs) {
    for (double s : sigmas) {
      for (double xi : xis) {
        const GevParams p{1.5, s, xi};
        EXPECT_NEAR(gev_cdf(gev_quantile(q, p), p), q, 1e-12)
            << "q=" << q << " sigma=" << s << " xi=" << xi;
      }
    }
  }
}

TEST(Gev, QuantileMatchesBisection) {
  for (double q : {0.05, 0.3, 0.5, 0.8, 0.99}) {
    for (double xi : {-0.3, 0.0, 0.4}) {
      const GevParams p{2.0, 1.5, xi};
      EXPECT_NEAR(gev_quantile(q, p), bisect_quantile(q, p), 1e-9);
    }
  }
}

TEST(Gev, DensityIntegratesToOne) {
  for (double xi : {-0.4, -0.1, 0.0, 0.2, 0.9}) {
    EXPECT_NEAR(density_integral({0.0, 1.0, xi}), 1.0, 1e-4) << "xi=" << xi;
  }
  EXPECT_NEAR(density_integral({10.0, 3.0, 0.1}), 1.0, 1e-4);
}

TEST(Gev, LogpdfMatchesCdfDerivative) {
  for (double x : {-0.5, 0.0, 1.0, 3.0}) {
    for (double xi : {-0.3, 0.0, 0.4}) {
      const GevParams p{0.0, 1.0, xi};
      const double h = 1e-6;
      const double fd = (gev_cdf(x + h, p) - gev_cdf(x - h, p)) / (2.0 * h);
      EXPECT_NEAR(std::exp(gev_logpdf(x, p)), fd, 1e-5 + 1e-5 * fd);
    }
  }
}

TEST(Gev, GumbelLimitContinuity) {
  for (double x : {-2.0, -0.5, 0.0, 1.0, 4.0}) {
    const double base = gev_cdf(x, {0.0, 1.0, 0.0});
    EXPECT_NEAR(gev_cdf(x, {0.0, 1.0, 1e-8}), base, 1e-8);
    EXPECT_NEAR(gev_cdf(x, {0.0, 1.0, -1e-8}), base, 1e-8);
  }
  for (double q : {0.05, 0.5, 0.95}) {
    const double base = gev_quantile(q, {0.0, 1.0, 0.0});
    EXPECT_NEAR(gev_quantile(q, {0.0, 1.0, 1e-8}), base, 1e-8);
    EXPECT_NEAR(gev_quantile(q, {0.0, 1.0, -1e-8}), base, 1e-8);
  }
}

TEST(Gev, SupportAndTails) {
  const GevParams frechet{0.0, 1.0, 0.3};  // lower endpoint -1/0.3
  EXPECT_EQ(gev_cdf(-10.0, frechet), 0.0);
  EXPECT_EQ(gev_logpdf(-10.0, frechet), -kInf);
  const GevParams weibull{0.0, 1.0, -0.3};  // upper endpoint 1/0.3
  EXPECT_EQ(gev_cdf(10.0, weibull), 1.0);
  EXPECT_EQ(gev_logpdf(10.0, weibull), -kInf);
  // Bounded tail: large-T return levels approach mu - sigma/xi from below.
  const double endpoint = 3.3333333333333335;
  const double rl = return_level(1e9, weibull);
  EXPECT_LT(rl, endpoint);
  EXPECT_NEAR(rl, endpoint, 1e-2);
  EXPECT_LT(return_level(1e3, weibull), rl);
}

TEST(Gev, SampleMatchesCdf) {
  const GevParams p{0.0, 1.0, 0.2};
  Rng rng(42);
  const int n = 100000;
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[i] = gev_sample(rng, p);
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = gev_cdf(draws[i], p);
    ks = std::max(ks, std::abs(f - (i + 1.0) / n));
    ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
  }
  EXPECT_LT(ks, 0.01);
  const double q90 = draws[static_cast<int>(0.9 * n)];
  EXPECT_NEAR(q90, gev_quantile(0.9, p), 0.05);
}

TEST(Gev, RejectsBadArguments) {
  EXPECT_THROW(gev_logpdf(0.0, {0.0, 0.0, 0.1}), ValidationError);
  EXPECT_THROW(gev_logpdf(0.0, {0.0, -1.0, 0.1}), ValidationError);
  EXPECT_THROW(gev_cdf(0.0, {0.0, 1.0, std::nan("")}), ValidationError);
  EXPECT_THROW(gev_quantile(0.0, {0.0, 1.0, 0.1}), ValidationError);
  EXPECT_THROW(gev_quantile(1.0, {0.0, 1.0, 0.1}), ValidationError);
  EXPECT_THROW(return_level(1.0, {0.0, 1.0, 0.1}), ValidationError);
}

}  // namespace
}  // namespace jlsgev
