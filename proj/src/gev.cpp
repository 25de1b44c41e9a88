#include "jlsgev/gev.hpp"

#include <cmath>
#include <limits>

#include "jlsgev/errors.hpp"

namespace jlsgev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_params(const GevParams& p) {
  if (!std::isfinite(p.mu) || !std::isfinite(p.sigma) || !std::isfinite(p.xi)) {
    throw ValidationError("gev: non-finite parameter");
  }
  if (p.sigma <= 0.0) throw ValidationError("gev: sigma must be positive");
}

// Quantile at exceedance intensity y = -log(q), y > 0.
double quantile_from_y(double y, const GevParams& p) {
  if (std::fabs(p.xi) <= kXiEps) return p.mu - p.sigma * std::log(y);
  return p.mu + p.sigma * std::expm1(-p.xi * std::log(y)) / p.xi;
}

}  // namespace

double gev_logpdf(double x, const GevParams& p) {
  check_params(p);
  if (!std::isfinite(x)) return -kInf;
  const double z = (x - p.mu) / p.sigma;
  if (std::fabs(p.xi) <= kXiEps) {
    return -std::log(p.sigma) - z - std::exp(-z);
  }
  const double a = 1.0 + p.xi * z;
  if (a <= 0.0) return -kInf;
  const double la = std::log1p(p.xi * z);
  return -std::log(p.sigma) - (1.0 + 1.0 / p.xi) * la - std::exp(-la / p.xi);
}

double gev_cdf(double x, const GevParams& p) {
  check_params(p);
  const double z = (x - p.mu) / p.sigma;
  if (std::fabs(p.xi) <= kXiEps) return std::exp(-std::exp(-z));
  const double a = 1.0 + p.xi * z;
  if (a <= 0.0) return p.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::exp(-std::log1p(p.xi * z) / p.xi));
}

double gev_quantile(double q, const GevParams& p) {
  check_params(p);
  if (!(q > 0.0 && q < 1.0)) {
    throw ValidationError("gev_quantile: q must lie strictly in (0, 1)");
  }
  return quantile_from_y(-std::log(q), p);
}

double return_level(double T, const GevParams& p) {
  check_params(p);
  if (!(T > 1.0)) throw ValidationError("return_level: T must exceed 1");
  return quantile_from_y(-std::log1p(-1.0 / T), p);
}

double gev_sample(Rng& rng, const GevParams& p) {
  check_params(p);
  double u = rng.uniform();
  if (u <= 0.0) u = std::numeric_limits<double>::min();
  return gev_quantile(u, p);
}

}  // namespace jlsgev
