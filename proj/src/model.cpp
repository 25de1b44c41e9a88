#include "jlsgev/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "jlsgev/errors.hpp"
#include "jlsgev/gev.hpp"

namespace jlsgev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_lpdf(double x, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * x * x / var;
}

// Positive half of N(0, var); -inf below 0.
double half_normal_lpdf(double x, double var) {
  if (x < 0.0) return -kInf;
  return std::numbers::ln2 + normal_lpdf(x, var);
}

double inv_gamma_lpdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return -kInf;
  return shape * std::log(scale) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - scale / x;
}

double uniform_pm1_lpdf(double x) {
  if (x < -1.0 || x > 1.0) return -kInf;
  return -std::numbers::ln2;
}

}  // namespace

void ModelParams::validate(const ModelConfig& cfg) const {
  lmc_mu.validate();
  if (cfg.spatial_scale) lmc_sigma.validate();
  for (int i = 0; i < 2; ++i) {
    if (!(xi[i] >= 0.0)) throw ValidationError("ModelParams: xi must be >= 0");
    if (!(tau_sq_mu[i] > 0.0)) throw ValidationError("ModelParams: tau_sq_mu <= 0");
    if (cfg.spatial_scale && !(tau_sq_sigma[i] > 0.0)) {
      throw ValidationError("ModelParams: tau_sq_sigma <= 0");
    }
  }
  if (std::fabs(rho_mu) > 1.0 || std::fabs(rho_sigma) > 1.0) {
    throw ValidationError("ModelParams: rho outside [-1, 1]");
  }
  if (delta_mu[0].size() != delta_mu[1].size()) {
    throw ValidationError("ModelParams: delta_mu lengths differ");
  }
  if (cfg.spatial_scale && delta_sigma[0].size() != delta_sigma[1].size()) {
    throw ValidationError("ModelParams: delta_sigma lengths differ");
  }
}

BasisEval BasisEval::build(const KnotSet& k1, const KnotSet& k2,
                           const Dataset& data) {
  BasisEval b;
  b.at[0][0] = eval_matrix(k1, data.z1.locations);
  b.at[0][1] = eval_matrix(k2, data.z1.locations);
  b.at[1][0] = eval_matrix(k1, data.z2.locations);
  b.at[1][1] = eval_matrix(k2, data.z2.locations);
  return b;
}

SurfaceEval surfaces(const ModelParams& p, const BasisEval& basis,
                     const ModelConfig& cfg) {
  SurfaceEval s;
  s.mu1 = (p.mu0[0] +
           (p.lmc_mu.a11 * (basis.at[0][0] * p.delta_mu[0])).array())
              .matrix();
  s.mu2 = (p.mu0[1] +
           (p.lmc_mu.a21 * (basis.at[1][0] * p.delta_mu[0]) +
            p.lmc_mu.a22 * (basis.at[1][1] * p.delta_mu[1]))
               .array())
              .matrix();
  if (cfg.spatial_scale) {
    s.sigma1 = (p.sigma0[0] +
                (p.lmc_sigma.a11 * (basis.at[0][0] * p.delta_sigma[0])).array())
                   .exp()
                   .matrix();
    s.sigma2 = (p.sigma0[1] +
                (p.lmc_sigma.a21 * (basis.at[1][0] * p.delta_sigma[0]) +
                 p.lmc_sigma.a22 * (basis.at[1][1] * p.delta_sigma[1]))
                    .array())
                   .exp()
                   .matrix();
  } else {
    s.sigma1 = Eigen::VectorXd::Constant(s.mu1.size(), std::exp(p.sigma0[0]));
    s.sigma2 = Eigen::VectorXd::Constant(s.mu2.size(), std::exp(p.sigma0[1]));
  }
  return s;
}

double log_likelihood_process(const Eigen::MatrixXd& obs,
                              const Eigen::VectorXd& mu,
                              const Eigen::VectorXd& sigma, double xi) {
  if (obs.rows() != mu.size() || obs.rows() != sigma.size()) {
    throw ValidationError("log_likelihood: surface/observation size mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < obs.rows(); ++i) {
    const GevParams gp{mu[i], sigma[i], xi};
    for (Eigen::Index j = 0; j < obs.cols(); ++j) {
      const double y = obs(i, j);
      if (std::isnan(y)) continue;
      const double l = gev_logpdf(y, gp);
      if (l == -kInf) return -kInf;
      total += l;
    }
  }
  return total;
}

double log_likelihood(const SurfaceEval& s, const Dataset& data,
                      const ModelParams& p) {
  const double l1 = log_likelihood_process(data.z1.obs, s.mu1, s.sigma1, p.xi[0]);
  if (l1 == -kInf) return -kInf;
  const double l2 = log_likelihood_process(data.z2.obs, s.mu2, s.sigma2, p.xi[1]);
  if (l2 == -kInf) return -kInf;
  return l1 + l2;
}

double log_prior(const ModelParams& p, const ModelConfig& cfg,
                 const PriorConfig& prior) {
  const double v = prior.coef_var;
  double lp = 0.0;
  for (int i = 0; i < 2; ++i) {
    lp += normal_lpdf(p.mu0[i], v);
    lp += normal_lpdf(p.sigma0[i], v);
    lp += half_normal_lpdf(p.xi[i], v);
    lp += inv_gamma_lpdf(p.tau_sq_mu[i], prior.ig_shape, prior.ig_scale);
  }
  lp += half_normal_lpdf(p.lmc_mu.a11, v);
  lp += normal_lpdf(p.lmc_mu.a21, v);
  lp += half_normal_lpdf(p.lmc_mu.a22, v);
  lp += uniform_pm1_lpdf(p.rho_mu);
  if (!std::isfinite(lp)) return -kInf;
  lp += coef_log_prior({p.tau_sq_mu[0], p.tau_sq_mu[1], p.rho_mu},
                       p.delta_mu[0], p.delta_mu[1]);
  if (cfg.spatial_scale) {
    for (int i = 0; i < 2; ++i) {
      lp += inv_gamma_lpdf(p.tau_sq_sigma[i], prior.ig_shape, prior.ig_scale);
    }
    lp += half_normal_lpdf(p.lmc_sigma.a11, v);
    lp += normal_lpdf(p.lmc_sigma.a21, v);
    lp += half_normal_lpdf(p.lmc_sigma.a22, v);
    lp += uniform_pm1_lpdf(p.rho_sigma);
    if (!std::isfinite(lp)) return -kInf;
    lp += coef_log_prior({p.tau_sq_sigma[0], p.tau_sq_sigma[1], p.rho_sigma},
                         p.delta_sigma[0], p.delta_sigma[1]);
  }
  return std::isfinite(lp) ? lp : -kInf;
}

double log_posterior(const ModelParams& p, const Dataset& data,
                     const BasisEval& basis, const ModelConfig& cfg,
                     const PriorConfig& prior) {
  const double lp = log_prior(p, cfg, prior);
  if (lp == -kInf) return -kInf;
  const double ll = log_likelihood(surfaces(p, basis, cfg), data, p);
  if (ll == -kInf) return -kInf;
  return lp + ll;
}

namespace {

// Gumbel moment inversion: sd = sigma*pi/sqrt(6), mean = mu + gamma*sigma.
void moment_start(const Eigen::MatrixXd& obs, double& mu0, double& sigma0) {
  double sum = 0.0, sum2 = 0.0;
  long n = 0;
  for (Eigen::Index i = 0; i < obs.rows(); ++i) {
    for (Eigen::Index j = 0; j < obs.cols(); ++j) {
      const double y = obs(i, j);
      if (std::isnan(y)) continue;
      sum += y;
      sum2 += y * y;
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
  const double sd = std::sqrt(var);
  sigma0 = sd > 0.0 ? std::log(sd * std::sqrt(6.0) / std::numbers::pi)
                    : std::log(1e-6);
  mu0 = mean - 0.5772156649015329 * std::exp(sigma0);
}

}  // namespace

ModelParams init_params(const Dataset& data, const BasisEval& basis,
                        const ModelConfig& cfg, const PriorConfig& prior,
                        int n_coef) {
  ModelParams p;
  moment_start(data.z1.obs, p.mu0[0], p.sigma0[0]);
  moment_start(data.z2.obs, p.mu0[1], p.sigma0[1]);
  for (int i = 0; i < 2; ++i) {
    p.delta_mu[i] = Eigen::VectorXd::Zero(n_coef);
    p.delta_sigma[i] = Eigen::VectorXd::Zero(n_coef);
  }
  while (true) {
    if (std::isfinite(log_posterior(p, data, basis, cfg, prior))) return p;
    if (p.xi[0] >= 1.0) {
      throw ConvergenceError("init_params: no finite starting point");
    }
    p.xi[0] = std::min(1.0, p.xi[0] + 0.1);
    p.xi[1] = p.xi[0];
  }
}

}  // namespace jlsgev
