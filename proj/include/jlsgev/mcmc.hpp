#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "jlsgev/model.hpp"

namespace jlsgev {

// ---------------------------------------------------------------------------
// Parameter vector layout and unconstraining transforms.
//
// Natural-space column order (also the draws.csv order): mu0_1, mu0_2,
// sigma0_1, sigma0_2, a11_mu, a21_mu, a22_mu, rho_mu, xi_1, xi_2,
// tau_sq_mu_1, tau_sq_mu_2, then the sigma-side block when spatial_scale is
// on, then delta_mu_1_*, delta_mu_2_* (and delta_sigma_*_*).
// Sampling happens on transformed coordinates: log for positive scalars
// (a11, a22, xi, tau^2), 2*atanh for rho (the logit of (rho+1)/2), identity
// elsewhere; Jacobians are added to the target.
// ---------------------------------------------------------------------------
enum class Transform { identity, log_positive, shifted_logit };

struct ParamLayout {
  bool spatial_scale = true;
  int n_coef = 0;

  int dim() const;
  std::vector<std::string> names() const;
  std::vector<Transform> transforms() const;
  Eigen::VectorXd pack(const ModelParams& p) const;        // natural values
  ModelParams unpack(const Eigen::VectorXd& natural) const;

  Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& natural) const;
  Eigen::VectorXd to_natural(const Eigen::VectorXd& theta) const;
  double log_jacobian(const Eigen::VectorXd& theta) const;

  int index(const std::string& name) const;  // throws on unknown name
};

// ---------------------------------------------------------------------------
// Generic blocked random-walk Metropolis with per-block caching hooks.
// ---------------------------------------------------------------------------
class BlockTarget {
 public:
  virtual ~BlockTarget() = default;
  // Full evaluation; primes caches. Returns the log target.
  virtual double init_state(const Eigen::VectorXd& theta) = 0;
  // theta_new differs from the current state only inside block `b`.
  virtual double propose(const Eigen::VectorXd& theta_new, int b) = 0;
  // Commit the proposal last evaluated for block `b`.
  virtual void accept(int b) = 0;
};

struct BlockSpec {
  std::string name;
  std::vector<int> coords;
  double init_step = 0.1;
  // Per-coordinate proposal scales; empty means all ones. Scales make the
  // scalar step dimensionless for coordinates that live on the data scale.
  Eigen::VectorXd scales;
};

struct SamplerConfig {
  int n_iter = 8000;
  int n_burnin = 3000;
  int thin = 5;
  int n_chains = 1;
  std::uint64_t seed = 1;
  double target_accept = 0.234;
  int adapt_window = 50;
  std::vector<std::string> blocks;  // restrict to these block names; empty = all

  void validate() const;
};

struct ChainResult {
  Eigen::MatrixXd draws;            // retained x dim, transformed space
  std::vector<int> iterations;      // 1-based original iteration numbers
  std::map<std::string, double> accept_rate;
};

ChainResult run_chain(BlockTarget& target, const Eigen::VectorXd& theta0,
                      const std::vector<BlockSpec>& blocks,
                      const SamplerConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Diagnostics.
// ---------------------------------------------------------------------------

// Split R-hat over per-chain scalar sequences (each split in half).
double split_rhat(const std::vector<Eigen::VectorXd>& chains);

// Effective sample size of one scalar chain via the initial positive
// sequence estimator on autocorrelations.
double ess_scalar(const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// JLS-GEV fit.
// ---------------------------------------------------------------------------
struct PosteriorSamples {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;        // retained draws x scalars, natural space
  std::vector<int> chain;       // 1-based, per row
  std::vector<int> iteration;   // original iteration, per row

  int n_draws() const { return static_cast<int>(draws.rows()); }
};

void write_draws_csv(const std::string& path, const PosteriorSamples& s);
PosteriorSamples read_draws_csv(const std::string& path);

struct FitConfig {
  ModelConfig model;
  PriorConfig prior;
  SamplerConfig sampler;
  int levels = 3;
};

struct FitOutput {
  PosteriorSamples samples;
  KnotSet knots1, knots2;
  ModelConfig model;
  std::map<std::string, double> rhat;
  std::map<std::string, double> ess;
  std::map<std::string, double> accept;  // averaged over chains
  std::vector<std::string> warnings;     // rhat/acceptance flags, coverage
};

FitOutput fit(const Dataset& train, const Domain& domain, const FitConfig& cfg);

// Per-site (mu, sigma) ensembles for one process at new locations, one row
// per retained draw; xi is the per-draw shape. covered marks sites whose
// basis row is nonzero everywhere it is used.
struct SiteEnsembles {
  Eigen::MatrixXd mu;     // draws x sites
  Eigen::MatrixXd sigma;  // draws x sites
  Eigen::VectorXd xi;     // per draw
  std::vector<bool> covered;
};

SiteEnsembles predict_process(const PosteriorSamples& samples,
                              const KnotSet& knots1, const KnotSet& knots2,
                              const ModelConfig& model,
                              const std::vector<Eigen::Vector2d>& locations,
                              int process);

}  // namespace jlsgev
