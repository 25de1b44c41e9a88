#pragma once

#include <Eigen/Dense>
#include <array>

#include "jlsgev/crosscov.hpp"
#include "jlsgev/dataset.hpp"

namespace jlsgev {

enum class ModelVariant { joint_asymmetric, joint_symmetric, independent };

// joint_symmetric freezes rho at 0; independent freezes rho and a21 at 0.
// The evaluation code below never branches on the variant: frozen values are
// simply zeros in the parameter struct, so nested variants produce exactly
// equal posteriors on identical parameters.
struct ModelConfig {
  ModelVariant variant = ModelVariant::joint_asymmetric;
  bool spatial_scale = true;  // off: sigma_i = exp(sigma0_i), constant
};

struct ModelParams {
  std::array<double, 2> mu0{0.0, 0.0};
  std::array<double, 2> sigma0{0.0, 0.0};  // log-scale offsets
  LmcCoefficients lmc_mu;
  LmcCoefficients lmc_sigma;
  double rho_mu = 0.0;
  double rho_sigma = 0.0;
  std::array<double, 2> xi{0.1, 0.1};  // xi >= 0
  std::array<double, 2> tau_sq_mu{1.0, 1.0};
  std::array<double, 2> tau_sq_sigma{1.0, 1.0};
  std::array<Eigen::VectorXd, 2> delta_mu;
  std::array<Eigen::VectorXd, 2> delta_sigma;

  void validate(const ModelConfig& cfg) const;
};

struct PriorConfig {
  double coef_var = 100.0;     // offsets, LMC entries, half-normal xi
  double ig_shape = 0.5;       // tau^2 inverse-gamma
  double ig_scale = 2000.0;
};

// Basis evaluations of both processes' knot sets at both processes' sites.
// at[i][j]: knot set j evaluated at process-(i+1) locations.
struct BasisEval {
  std::array<std::array<Eigen::MatrixXd, 2>, 2> at;

  static BasisEval build(const KnotSet& k1, const KnotSet& k2,
                         const Dataset& data);
};

// mu and sigma fields evaluated at every data site.
struct SurfaceEval {
  Eigen::VectorXd mu1, mu2;
  Eigen::VectorXd sigma1, sigma2;
};

SurfaceEval surfaces(const ModelParams& p, const BasisEval& basis,
                     const ModelConfig& cfg);

// Per-process GEV log likelihood over non-missing cells.
double log_likelihood_process(const Eigen::MatrixXd& obs,
                              const Eigen::VectorXd& mu,
                              const Eigen::VectorXd& sigma, double xi);
double log_likelihood(const SurfaceEval& s, const Dataset& data,
                      const ModelParams& p);

double log_prior(const ModelParams& p, const ModelConfig& cfg,
                 const PriorConfig& prior);

double log_posterior(const ModelParams& p, const Dataset& data,
                     const BasisEval& basis, const ModelConfig& cfg,
                     const PriorConfig& prior);

// Method-of-moments Gumbel start: sigma0 from the replicate sd, mu0 from the
// mean, xi = 0.1, coefficients zero. If the posterior is -inf the xi's are
// raised by 0.1 (up to 1.0) before giving up.
ModelParams init_params(const Dataset& data, const BasisEval& basis,
                        const ModelConfig& cfg, const PriorConfig& prior,
                        int n_coef);

}  // namespace jlsgev
