#include "jlsgev/matern.hpp"

#include <cmath>

#include "jlsgev/errors.hpp"

namespace jlsgev {

double matern(double dist, double range, double sill, double nu) {
  if (!(range > 0.0) || !(sill > 0.0) || !(nu > 0.0)) {
    throw ValidationError("matern: range, sill, nu must be positive");
  }
  if (dist < 0.0) throw ValidationError("matern: negative distance");
  if (dist == 0.0) return sill;
  const double u = std::sqrt(2.0 * nu) * dist / range;
  if (nu == 0.5) return sill * std::exp(-u);
  if (nu == 1.5) return sill * (1.0 + u) * std::exp(-u);
  if (nu == 2.5) return sill * (1.0 + u + u * u / 3.0) * std::exp(-u);
  const double c = sill * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) *
                   std::pow(u, nu) * std::cyl_bessel_k(nu, u);
  return std::isfinite(c) ? c : sill;  // u -> 0 underflow guard
}

Eigen::MatrixXd matern_cov(const std::vector<Eigen::Vector2d>& pts,
                           double range, double sill, double nu) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i) {
    c(i, i) = sill;
    for (int j = i + 1; j < n; ++j) {
      const double v = matern((pts[i] - pts[j]).norm(), range, sill, nu);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

Eigen::VectorXd sample_gaussian(const Eigen::MatrixXd& cov, Rng& rng) {
  const Eigen::Index n = cov.rows();
  if (cov.cols() != n) throw ValidationError("sample_gaussian: square matrix required");
  const double scale = cov.diagonal().maxCoeff();
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd work = cov;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd z(n);
      for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
      return llt.matrixL() * z;
    }
    jitter = jitter == 0.0 ? 1e-10 * scale : jitter * 10.0;
    if (jitter > 1e-6 * scale * 10.0) break;
  }
  throw ValidationError("sample_gaussian: covariance not positive definite");
}

}  // namespace jlsgev
