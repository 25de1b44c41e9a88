#pragma once

#include "jlsgev/rng.hpp"

namespace jlsgev {

// Switch to the Gumbel limit below this |xi|; keeps cdf/quantile continuous
// across xi = 0 to ~1e-9.
inline constexpr double kXiEps = 1e-8;

// Convention: xi > 0 heavy upper tail (Frechet type), xi < 0 bounded upper
// tail (Weibull type), support 1 + xi*(x-mu)/sigma > 0.
struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

// Log density; -inf outside the support. Throws ValidationError for
// sigma <= 0 or non-finite parameters.
double gev_logpdf(double x, const GevParams& p);

// Distribution function; 0/1 outside the support on the respective side.
double gev_cdf(double x, const GevParams& p);

// Inverse cdf, q in (0, 1) strictly; throws otherwise.
double gev_quantile(double q, const GevParams& p);

// T-return level = quantile at 1 - 1/T, T > 1. Computed through
// -log1p(-1/T) so large T stays accurate.
double return_level(double T, const GevParams& p);

// Inversion sampling; consumes exactly one uniform per draw.
double gev_sample(Rng& rng, const GevParams& p);

}  // namespace jlsgev
