#include "jlsgev/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "jlsgev/csv.hpp"
#include "jlsgev/errors.hpp"

namespace jlsgev {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kBaseScalars = 12;

std::string coef_name(const char* stem, int i) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s_%03d", stem, i + 1);
  return buf;
}
}  // namespace

// ---------------------------------------------------------------------------
// ParamLayout
// ---------------------------------------------------------------------------

int ParamLayout::dim() const {
  return (spatial_scale ? 18 : kBaseScalars) + n_coef * (spatial_scale ? 4 : 2);
}

std::vector<std::string> ParamLayout::names() const {
  std::vector<std::string> n = {"mu0_1",  "mu0_2",  "sigma0_1", "sigma0_2",
                                "a11_mu", "a21_mu", "a22_mu",   "rho_mu",
                                "xi_1",   "xi_2",   "tau_sq_mu_1", "tau_sq_mu_2"};
  if (spatial_scale) {
    n.insert(n.end(), {"a11_sigma", "a21_sigma", "a22_sigma", "rho_sigma",
                       "tau_sq_sigma_1", "tau_sq_sigma_2"});
  }
  for (int i = 0; i < n_coef; ++i) n.push_back(coef_name("delta_mu_1", i));
  for (int i = 0; i < n_coef; ++i) n.push_back(coef_name("delta_mu_2", i));
  if (spatial_scale) {
    for (int i = 0; i < n_coef; ++i) n.push_back(coef_name("delta_sigma_1", i));
    for (int i = 0; i < n_coef; ++i) n.push_back(coef_name("delta_sigma_2", i));
  }
  return n;
}

std::vector<Transform> ParamLayout::transforms() const {
  std::vector<Transform> t(dim(), Transform::identity);
  t[4] = Transform::log_positive;   // a11_mu
  t[6] = Transform::log_positive;   // a22_mu
  t[7] = Transform::shifted_logit;  // rho_mu
  t[8] = Transform::log_positive;   // xi_1
  t[9] = Transform::log_positive;   // xi_2
  t[10] = Transform::log_positive;  // tau_sq_mu_1
  t[11] = Transform::log_positive;
  if (spatial_scale) {
    t[12] = Transform::log_positive;  // a11_sigma
    t[14] = Transform::log_positive;  // a22_sigma
    t[15] = Transform::shifted_logit; // rho_sigma
    t[16] = Transform::log_positive;
    t[17] = Transform::log_positive;
  }
  return t;
}

Eigen::VectorXd ParamLayout::pack(const ModelParams& p) const {
  Eigen::VectorXd v(dim());
  v[0] = p.mu0[0];
  v[1] = p.mu0[1];
  v[2] = p.sigma0[0];
  v[3] = p.sigma0[1];
  v[4] = p.lmc_mu.a11;
  v[5] = p.lmc_mu.a21;
  v[6] = p.lmc_mu.a22;
  v[7] = p.rho_mu;
  v[8] = p.xi[0];
  v[9] = p.xi[1];
  v[10] = p.tau_sq_mu[0];
  v[11] = p.tau_sq_mu[1];
  int k = kBaseScalars;
  if (spatial_scale) {
    v[12] = p.lmc_sigma.a11;
    v[13] = p.lmc_sigma.a21;
    v[14] = p.lmc_sigma.a22;
    v[15] = p.rho_sigma;
    v[16] = p.tau_sq_sigma[0];
    v[17] = p.tau_sq_sigma[1];
    k = 18;
  }
  v.segment(k, n_coef) = p.delta_mu[0];
  v.segment(k + n_coef, n_coef) = p.delta_mu[1];
  if (spatial_scale) {
    v.segment(k + 2 * n_coef, n_coef) = p.delta_sigma[0];
    v.segment(k + 3 * n_coef, n_coef) = p.delta_sigma[1];
  }
  return v;
}

ModelParams ParamLayout::unpack(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) throw ValidationError("ParamLayout::unpack: bad size");
  ModelParams p;
  p.mu0 = {v[0], v[1]};
  p.sigma0 = {v[2], v[3]};
  p.lmc_mu = {v[4], v[5], v[6]};
  p.rho_mu = v[7];
  p.xi = {v[8], v[9]};
  p.tau_sq_mu = {v[10], v[11]};
  int k = kBaseScalars;
  if (spatial_scale) {
    p.lmc_sigma = {v[12], v[13], v[14]};
    p.rho_sigma = v[15];
    p.tau_sq_sigma = {v[16], v[17]};
    k = 18;
  }
  p.delta_mu[0] = v.segment(k, n_coef);
  p.delta_mu[1] = v.segment(k + n_coef, n_coef);
  if (spatial_scale) {
    p.delta_sigma[0] = v.segment(k + 2 * n_coef, n_coef);
    p.delta_sigma[1] = v.segment(k + 3 * n_coef, n_coef);
  } else {
    p.delta_sigma[0] = Eigen::VectorXd::Zero(n_coef);
    p.delta_sigma[1] = Eigen::VectorXd::Zero(n_coef);
  }
  return p;
}

Eigen::VectorXd ParamLayout::to_unconstrained(const Eigen::VectorXd& nat) const {
  const auto tr = transforms();
  Eigen::VectorXd t(nat.size());
  for (Eigen::Index i = 0; i < nat.size(); ++i) {
    switch (tr[i]) {
      case Transform::identity: t[i] = nat[i]; break;
      case Transform::log_positive: t[i] = std::log(nat[i]); break;
      case Transform::shifted_logit: t[i] = 2.0 * std::atanh(nat[i]); break;
    }
  }
  return t;
}

Eigen::VectorXd ParamLayout::to_natural(const Eigen::VectorXd& theta) const {
  const auto tr = transforms();
  Eigen::VectorXd v(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    switch (tr[i]) {
      case Transform::identity: v[i] = theta[i]; break;
      case Transform::log_positive: v[i] = std::exp(theta[i]); break;
      case Transform::shifted_logit: v[i] = std::tanh(0.5 * theta[i]); break;
    }
  }
  return v;
}

double ParamLayout::log_jacobian(const Eigen::VectorXd& theta) const {
  const auto tr = transforms();
  double j = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    switch (tr[i]) {
      case Transform::identity: break;
      case Transform::log_positive: j += theta[i]; break;
      case Transform::shifted_logit: {
        const double r = std::tanh(0.5 * theta[i]);
        j += std::log1p(-r * r) - std::numbers::ln2;
        break;
      }
    }
  }
  return j;
}

int ParamLayout::index(const std::string& name) const {
  const auto all = names();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] == name) return static_cast<int>(i);
  }
  throw ValidationError("unknown parameter name '" + name + "'");
}

// ---------------------------------------------------------------------------
// Sampler core
// ---------------------------------------------------------------------------

void SamplerConfig::validate() const {
  if (n_iter < 1) throw ValidationError("sampler: n_iter must be positive");
  if (n_burnin < 0 || n_burnin >= n_iter) {
    throw ValidationError("sampler: need 0 <= n_burnin < n_iter");
  }
  if (thin < 1) throw ValidationError("sampler: thin must be >= 1");
  if (n_chains < 1) throw ValidationError("sampler: n_chains must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ValidationError("sampler: target_accept must lie in (0, 1)");
  }
  if (adapt_window < 1) throw ValidationError("sampler: adapt_window must be >= 1");
}

ChainResult run_chain(BlockTarget& target, const Eigen::VectorXd& theta0,
                      const std::vector<BlockSpec>& blocks,
                      const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (blocks.empty()) throw ValidationError("run_chain: no parameter blocks");

  Eigen::VectorXd theta = theta0;
  double lp = target.init_state(theta);
  if (!std::isfinite(lp)) {
    throw ConvergenceError("run_chain: non-finite target at the start value");
  }

  const int nb = static_cast<int>(blocks.size());
  std::vector<double> step(nb);
  std::vector<Eigen::VectorXd> scl(nb);
  for (int b = 0; b < nb; ++b) {
    step[b] = blocks[b].init_step;
    const int d = static_cast<int>(blocks[b].coords.size());
    if (blocks[b].scales.size() == 0) {
      scl[b] = Eigen::VectorXd::Ones(d);
    } else if (blocks[b].scales.size() == d &&
               (blocks[b].scales.array() > 0.0).all()) {
      scl[b] = blocks[b].scales;
    } else {
      throw ValidationError("run_chain: block '" + blocks[b].name +
                            "' has invalid proposal scales");
    }
  }
  std::vector<long> win_acc(nb, 0), post_acc(nb, 0), post_n(nb, 0);

  // Per-block proposal shape: the empirical covariance of the block is
  // accumulated over the second half of burn-in and its Cholesky factor
  // (normalised to unit mean diagonal so the scalar step keeps its meaning)
  // shapes the Gaussian proposal.  Covariances are accumulated on coordinates
  // divided by their static scales so the normalisation weights commensurate
  // quantities; the proposal multiplies the scales back in, so the shaped
  // proposal covariance tracks the raw-space posterior covariance.  Shape and
  // step freeze when burn-in ends.
  struct BlockShape {
    long n = 0;
    Eigen::VectorXd mean, scratch;
    Eigen::MatrixXd m2;
    Eigen::MatrixXd chol;  // lower-triangular; identity until enough samples
    bool shaped = false;
  };
  std::vector<BlockShape> shape(nb);
  for (int b = 0; b < nb; ++b) {
    const int d = static_cast<int>(blocks[b].coords.size());
    shape[b].mean = Eigen::VectorXd::Zero(d);
    shape[b].scratch = Eigen::VectorXd::Zero(d);
    shape[b].m2 = Eigen::MatrixXd::Zero(d, d);
    shape[b].chol = Eigen::MatrixXd::Identity(d, d);
  }
  const int accumulate_from = cfg.n_burnin / 4;

  const int n_keep = (cfg.n_iter - cfg.n_burnin) / cfg.thin;
  ChainResult res;
  res.draws.resize(n_keep, theta.size());
  res.iterations.reserve(n_keep);
  int kept = 0;

  Eigen::VectorXd prop = theta;
  Eigen::VectorXd z;
  for (int iter = 1; iter <= cfg.n_iter; ++iter) {
    const bool burnin = iter <= cfg.n_burnin;
    for (int b = 0; b < nb; ++b) {
      const auto& coords = blocks[b].coords;
      const int d = static_cast<int>(coords.size());
      prop = theta;
      z.resize(d);
      for (int i = 0; i < d; ++i) z[i] = rng.normal();
      if (shape[b].shaped) z = (shape[b].chol * z).eval();
      for (int i = 0; i < d; ++i) prop[coords[i]] += step[b] * scl[b][i] * z[i];
      const double lpp = target.propose(prop, b);
      double u = rng.uniform();
      if (u <= 0.0) u = 1e-300;
      const bool ok = std::isfinite(lpp) && std::log(u) < lpp - lp;
      if (ok) {
        theta = prop;
        lp = lpp;
        target.accept(b);
        ++win_acc[b];
        if (!burnin) ++post_acc[b];
      }
      if (!burnin) ++post_n[b];
      if (burnin && d > 1 && iter > accumulate_from) {
        BlockShape& s = shape[b];
        for (int i = 0; i < d; ++i) s.scratch[i] = theta[coords[i]] / scl[b][i];
        ++s.n;
        const Eigen::VectorXd delta = s.scratch - s.mean;
        s.mean += delta / static_cast<double>(s.n);
        s.m2.noalias() += delta * (s.scratch - s.mean).transpose();
      }
    }
    if (burnin && iter % cfg.adapt_window == 0) {
      for (int b = 0; b < nb; ++b) {
        const double rate =
            static_cast<double>(win_acc[b]) / cfg.adapt_window;
        // Trust region: with scaled proposals every block's step is
        // dimensionless, so honest adaptation stays within a few orders of
        // magnitude of the initial step.  The bounds stop transient
        // misadaptation from opening teleport-sized moves.
        step[b] = std::clamp(step[b] * std::exp(rate - cfg.target_accept),
                             blocks[b].init_step / 1024.0,
                             blocks[b].init_step * 64.0);
        win_acc[b] = 0;
        BlockShape& s = shape[b];
        const int d = static_cast<int>(blocks[b].coords.size());
        if (d > 1 && s.n >= 10 * d) {
          Eigen::MatrixXd cov = s.m2 / static_cast<double>(s.n - 1);
          const double scale = cov.diagonal().mean();
          if (scale > 0.0 && std::isfinite(scale)) {
            cov /= scale;
            cov.diagonal().array() += 1e-4;
            const Eigen::LLT<Eigen::MatrixXd> llt(cov);
            if (llt.info() == Eigen::Success) {
              s.chol = llt.matrixL();
              s.shaped = true;
            }
          }
        }
      }
    }
    if (!burnin && (iter - cfg.n_burnin) % cfg.thin == 0 && kept < n_keep) {
      res.draws.row(kept) = theta.transpose();
      res.iterations.push_back(iter);
      ++kept;
    }
    // Temporary diagnostics hook.
    if (const char* ev = std::getenv("JLSGEV_TRACE")) {
      const int every = std::atoi(ev);
      if (every > 0 && iter % every == 0) {
        std::fprintf(stderr, "TRACE iter %d lp %.3f |", iter, lp);
        const int head = std::min<int>(12, theta.size());
        for (int i = 0; i < head; ++i) std::fprintf(stderr, " %.3f", theta[i]);
        if (theta.size() > 12) {
          const int rest = static_cast<int>(theta.size()) - 12;
          std::fprintf(stderr, " | d1 %.1f d2 %.1f", theta.segment(12, rest / 2).norm(),
                       theta.segment(12 + rest / 2, rest - rest / 2).norm());
        }
        std::fprintf(stderr, " | steps");
        for (int b = 0; b < nb; ++b) std::fprintf(stderr, " %.2g", step[b]);
        std::fprintf(stderr, "\n");
      }
    }
  }
  for (int b = 0; b < nb; ++b) {
    res.accept_rate[blocks[b].name] =
        post_n[b] > 0 ? static_cast<double>(post_acc[b]) / post_n[b] : 0.0;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.empty()) throw ValidationError("split_rhat: no chains");
  std::size_t half = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) {
    half = std::min(half, static_cast<std::size_t>(c.size()) / 2);
  }
  if (half < 2) return 1.0;  // too short to judge
  std::vector<Eigen::VectorXd> seqs;
  for (const auto& c : chains) {
    seqs.push_back(c.head(half));
    seqs.push_back(c.tail(half));
  }
  const double m = static_cast<double>(seqs.size());
  const double L = static_cast<double>(half);
  double grand = 0.0;
  std::vector<double> means;
  for (const auto& s : seqs) {
    means.push_back(s.mean());
    grand += s.mean();
  }
  grand /= m;
  double W = 0.0, B = 0.0;
  for (std::size_t j = 0; j < seqs.size(); ++j) {
    W += (seqs[j].array() - means[j]).square().sum() / (L - 1.0);
    B += (means[j] - grand) * (means[j] - grand);
  }
  W /= m;
  B *= L / (m - 1.0);
  if (W <= 0.0) return B <= 0.0 ? 1.0 : kInf;
  const double var_hat = (L - 1.0) / L * W + B / L;
  return std::sqrt(var_hat / W);
}

double ess_scalar(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = x.mean();
  const Eigen::ArrayXd d = x.array() - mean;
  const double c0 = d.square().sum() / n;
  if (c0 <= 0.0) return static_cast<double>(n);
  auto rho = [&](Eigen::Index k) {
    return (d.head(n - k) * d.tail(n - k)).sum() / n / c0;
  };
  // Initial positive sequence on paired autocorrelations.
  double sum_pairs = 0.0;
  double gamma0 = 1.0 + rho(1);
  Eigen::Index k = 2;
  while (gamma0 > 0.0) {
    sum_pairs += gamma0;
    if (k + 1 >= n) break;
    gamma0 = rho(k) + rho(k + 1);
    k += 2;
  }
  const double tau = std::max(1.0, 2.0 * sum_pairs - 1.0);
  return static_cast<double>(n) / tau;
}

// ---------------------------------------------------------------------------
// JLS-GEV target with per-block caching
// ---------------------------------------------------------------------------

namespace {

enum class BlockKind {
  delta_mu1, delta_mu2, delta_sigma1, delta_sigma2,
  offsets, lmc, rho, xi, tau
};

struct BlockInfo {
  BlockKind kind;
  int coef_lo = 0;  // level coefficient range for delta blocks
  int coef_len = 0;
};

// Cached basis-coefficient products; mu/sigma surfaces assemble from these
// with O(n) work, so only delta blocks pay matrix-vector costs.
struct Gcache {
  Eigen::VectorXd mu_11, mu_21, mu_22;  // B(z1,k1)dmu1, B(z2,k1)dmu1, B(z2,k2)dmu2
  Eigen::VectorXd sg_11, sg_21, sg_22;
};

class JlsgevTarget : public BlockTarget {
 public:
  JlsgevTarget(const Dataset& data, const BasisEval& basis,
               const ModelConfig& model, const PriorConfig& prior,
               const ParamLayout& layout, std::vector<BlockInfo> info)
      : data_(data), basis_(basis), model_(model), prior_(prior),
        layout_(layout), info_(std::move(info)) {}

  double init_state(const Eigen::VectorXd& theta) override {
    cur_p_ = layout_.unpack(layout_.to_natural(theta));
    cur_g_.mu_11 = basis_.at[0][0] * cur_p_.delta_mu[0];
    cur_g_.mu_21 = basis_.at[1][0] * cur_p_.delta_mu[0];
    cur_g_.mu_22 = basis_.at[1][1] * cur_p_.delta_mu[1];
    cur_g_.sg_11 = basis_.at[0][0] * cur_p_.delta_sigma[0];
    cur_g_.sg_21 = basis_.at[1][0] * cur_p_.delta_sigma[0];
    cur_g_.sg_22 = basis_.at[1][1] * cur_p_.delta_sigma[1];
    cur_ll1_ = process_ll(1, cur_p_, cur_g_);
    cur_ll2_ = process_ll(2, cur_p_, cur_g_);
    cur_prior_ = log_prior(cur_p_, model_, prior_);
    cur_jac_ = layout_.log_jacobian(theta);
    return total(cur_prior_, cur_ll1_, cur_ll2_, cur_jac_);
  }

  double propose(const Eigen::VectorXd& theta_new, int b) override {
    const BlockInfo& bi = info_[b];
    prop_p_ = layout_.unpack(layout_.to_natural(theta_new));
    prop_g_ = cur_g_;  // vector copies; delta blocks overwrite incrementally

    bool ll1 = false, ll2 = false;
    switch (bi.kind) {
      case BlockKind::delta_mu1: {
        const Eigen::VectorXd diff =
            prop_p_.delta_mu[0].segment(bi.coef_lo, bi.coef_len) -
            cur_p_.delta_mu[0].segment(bi.coef_lo, bi.coef_len);
        prop_g_.mu_11 = cur_g_.mu_11 +
                        basis_.at[0][0].middleCols(bi.coef_lo, bi.coef_len) * diff;
        prop_g_.mu_21 = cur_g_.mu_21 +
                        basis_.at[1][0].middleCols(bi.coef_lo, bi.coef_len) * diff;
        ll1 = true;
        ll2 = cur_p_.lmc_mu.a21 != 0.0;
        break;
      }
      case BlockKind::delta_mu2: {
        const Eigen::VectorXd diff =
            prop_p_.delta_mu[1].segment(bi.coef_lo, bi.coef_len) -
            cur_p_.delta_mu[1].segment(bi.coef_lo, bi.coef_len);
        prop_g_.mu_22 = cur_g_.mu_22 +
                        basis_.at[1][1].middleCols(bi.coef_lo, bi.coef_len) * diff;
        ll2 = true;
        break;
      }
      case BlockKind::delta_sigma1: {
        const Eigen::VectorXd diff =
            prop_p_.delta_sigma[0].segment(bi.coef_lo, bi.coef_len) -
            cur_p_.delta_sigma[0].segment(bi.coef_lo, bi.coef_len);
        prop_g_.sg_11 = cur_g_.sg_11 +
                        basis_.at[0][0].middleCols(bi.coef_lo, bi.coef_len) * diff;
        prop_g_.sg_21 = cur_g_.sg_21 +
                        basis_.at[1][0].middleCols(bi.coef_lo, bi.coef_len) * diff;
        ll1 = true;
        ll2 = cur_p_.lmc_sigma.a21 != 0.0;
        break;
      }
      case BlockKind::delta_sigma2: {
        const Eigen::VectorXd diff =
            prop_p_.delta_sigma[1].segment(bi.coef_lo, bi.coef_len) -
            cur_p_.delta_sigma[1].segment(bi.coef_lo, bi.coef_len);
        prop_g_.sg_22 = cur_g_.sg_22 +
                        basis_.at[1][1].middleCols(bi.coef_lo, bi.coef_len) * diff;
        ll2 = true;
        break;
      }
      case BlockKind::offsets:
      case BlockKind::lmc:
        ll1 = ll2 = true;
        break;
      case BlockKind::xi:
        ll1 = ll2 = true;
        break;
      case BlockKind::rho:
      case BlockKind::tau:
        break;  // prior-only
    }

    prop_prior_ = log_prior(prop_p_, model_, prior_);
    if (prop_prior_ == -kInf) return -kInf;
    prop_ll1_ = ll1 ? process_ll(1, prop_p_, prop_g_) : cur_ll1_;
    if (prop_ll1_ == -kInf) return -kInf;
    prop_ll2_ = ll2 ? process_ll(2, prop_p_, prop_g_) : cur_ll2_;
    if (prop_ll2_ == -kInf) return -kInf;
    prop_jac_ = layout_.log_jacobian(theta_new);
    return total(prop_prior_, prop_ll1_, prop_ll2_, prop_jac_);
  }

  void accept(int /*b*/) override {
    std::swap(cur_p_, prop_p_);
    std::swap(cur_g_, prop_g_);
    cur_ll1_ = prop_ll1_;
    cur_ll2_ = prop_ll2_;
    cur_prior_ = prop_prior_;
    cur_jac_ = prop_jac_;
  }

 private:
  static double total(double prior, double ll1, double ll2, double jac) {
    const double t = prior + ll1 + ll2 + jac;
    return std::isfinite(t) ? t : -kInf;
  }

  double process_ll(int process, const ModelParams& p, const Gcache& g) const {
    if (process == 1) {
      Eigen::VectorXd mu = (p.mu0[0] + p.lmc_mu.a11 * g.mu_11.array()).matrix();
      Eigen::VectorXd sigma;
      if (model_.spatial_scale) {
        sigma = (p.sigma0[0] + p.lmc_sigma.a11 * g.sg_11.array()).exp().matrix();
      } else {
        sigma = Eigen::VectorXd::Constant(mu.size(), std::exp(p.sigma0[0]));
      }
      return log_likelihood_process(data_.z1.obs, mu, sigma, p.xi[0]);
    }
    Eigen::VectorXd mu = (p.mu0[1] + p.lmc_mu.a21 * g.mu_21.array() +
                          p.lmc_mu.a22 * g.mu_22.array())
                             .matrix();
    Eigen::VectorXd sigma;
    if (model_.spatial_scale) {
      sigma = (p.sigma0[1] + p.lmc_sigma.a21 * g.sg_21.array() +
               p.lmc_sigma.a22 * g.sg_22.array())
                  .exp()
                  .matrix();
    } else {
      sigma = Eigen::VectorXd::Constant(mu.size(), std::exp(p.sigma0[1]));
    }
    return log_likelihood_process(data_.z2.obs, mu, sigma, p.xi[1]);
  }

  const Dataset& data_;
  const BasisEval& basis_;
  ModelConfig model_;
  PriorConfig prior_;
  ParamLayout layout_;
  std::vector<BlockInfo> info_;

  ModelParams cur_p_, prop_p_;
  Gcache cur_g_, prop_g_;
  double cur_ll1_ = 0, cur_ll2_ = 0, cur_prior_ = 0, cur_jac_ = 0;
  double prop_ll1_ = 0, prop_ll2_ = 0, prop_prior_ = 0, prop_jac_ = 0;
};

struct BlockPlan {
  std::vector<BlockSpec> specs;
  std::vector<BlockInfo> info;
};

// Sample standard deviation over the finite entries; 1.0 when degenerate.
double finite_sd(const Eigen::MatrixXd& m) {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j);
      if (!std::isfinite(v)) continue;
      n += 1.0;
      const double d = v - mean;
      mean += d / n;
      m2 += d * (v - mean);
    }
  }
  if (n < 2.0) return 1.0;
  const double sd = std::sqrt(m2 / (n - 1.0));
  return (std::isfinite(sd) && sd > 0.0) ? sd : 1.0;
}

BlockPlan build_blocks(const ParamLayout& layout, const KnotSet& knots,
                       const ModelConfig& model, double sd1, double sd2) {
  BlockPlan plan;
  const int base = layout.spatial_scale ? 18 : kBaseScalars;
  const int p = layout.n_coef;

  auto add = [&](const std::string& name, std::vector<int> coords,
                 BlockKind kind, double step, int lo = 0, int len = 0,
                 Eigen::VectorXd scales = Eigen::VectorXd()) {
    plan.specs.push_back({name, std::move(coords), step, std::move(scales)});
    plan.info.push_back({kind, lo, len});
  };
  auto level_coords = [&](int delta_block, int level) {
    std::vector<int> c;
    const int lo = knots.level_offset[level];
    const int hi = knots.level_offset[level + 1];
    for (int i = lo; i < hi; ++i) c.push_back(base + delta_block * p + i);
    return c;
  };

  // mu-side delta coefficients live on the data scale of their process.
  for (int proc = 0; proc < 2; ++proc) {
    const double sd = proc == 0 ? sd1 : sd2;
    for (int l = 0; l < knots.levels; ++l) {
      const int len = knots.level_offset[l + 1] - knots.level_offset[l];
      add("delta_mu_" + std::to_string(proc + 1) + "_l" + std::to_string(l + 1),
          level_coords(proc, l),
          proc == 0 ? BlockKind::delta_mu1 : BlockKind::delta_mu2, 0.25,
          knots.level_offset[l], len, Eigen::VectorXd::Constant(len, sd));
    }
  }
  if (layout.spatial_scale) {
    for (int proc = 0; proc < 2; ++proc) {
      for (int l = 0; l < knots.levels; ++l) {
        add("delta_sigma_" + std::to_string(proc + 1) + "_l" +
                std::to_string(l + 1),
            level_coords(2 + proc, l),
            proc == 0 ? BlockKind::delta_sigma1 : BlockKind::delta_sigma2,
            0.25, knots.level_offset[l],
            knots.level_offset[l + 1] - knots.level_offset[l]);
      }
    }
  }
  Eigen::VectorXd off_scales(4);
  off_scales << sd1, sd2, 1.0, 1.0;  // mu0 on data scale, sigma0 on log scale
  add("offsets", {0, 1, 2, 3}, BlockKind::offsets, 0.1, 0, 0, off_scales);

  std::vector<int> lmc = {4, 6};  // a11_mu, a22_mu
  std::vector<double> lmc_s = {1.0, 1.0};
  if (model.variant != ModelVariant::independent) {
    lmc.insert(lmc.begin() + 1, 5);
    // a21_mu regresses process-2 levels on the process-1 field.
    lmc_s.insert(lmc_s.begin() + 1, std::max(1.0, sd2 / sd1));
  }
  if (layout.spatial_scale) {
    lmc.push_back(12);
    lmc_s.push_back(1.0);
    if (model.variant != ModelVariant::independent) {
      lmc.push_back(13);
      lmc_s.push_back(1.0);
    }
    lmc.push_back(14);
    lmc_s.push_back(1.0);
  }
  add("lmc", std::move(lmc), BlockKind::lmc, 0.1, 0, 0,
      Eigen::Map<const Eigen::VectorXd>(lmc_s.data(),
                                        static_cast<Eigen::Index>(lmc_s.size())));

  if (model.variant == ModelVariant::joint_asymmetric) {
    std::vector<int> rho = {7};
    if (layout.spatial_scale) rho.push_back(15);
    add("rho", std::move(rho), BlockKind::rho, 0.2);
  }
  add("xi", {8, 9}, BlockKind::xi, 0.05);

  std::vector<int> tau = {10, 11};
  if (layout.spatial_scale) {
    tau.push_back(16);
    tau.push_back(17);
  }
  add("tau", std::move(tau), BlockKind::tau, 0.5);
  return plan;
}

}  // namespace

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

FitOutput fit(const Dataset& train, const Domain& domain, const FitConfig& cfg) {
  train.validate();
  cfg.sampler.validate();

  FitOutput out;
  out.model = cfg.model;
  KnotSet knots = build_knots(domain, cfg.levels);
  std::vector<Eigen::Vector2d> all_locs = train.z1.locations;
  all_locs.insert(all_locs.end(), train.z2.locations.begin(),
                  train.z2.locations.end());
  ensure_coverage(knots, all_locs, &out.warnings);
  out.knots1 = knots;
  out.knots2 = knots;  // shared by default

  const BasisEval basis = BasisEval::build(out.knots1, out.knots2, train);
  const ParamLayout layout{cfg.model.spatial_scale, knots.size()};

  const ModelParams p0 =
      init_params(train, basis, cfg.model, cfg.prior, knots.size());
  const Eigen::VectorXd theta0 = layout.to_unconstrained(layout.pack(p0));

  BlockPlan plan = build_blocks(layout, knots, cfg.model,
                                finite_sd(train.z1.obs),
                                finite_sd(train.z2.obs));
  if (!cfg.sampler.blocks.empty()) {
    BlockPlan filtered;
    for (const auto& want : cfg.sampler.blocks) {
      bool found = false;
      for (std::size_t i = 0; i < plan.specs.size(); ++i) {
        if (plan.specs[i].name == want) {
          filtered.specs.push_back(plan.specs[i]);
          filtered.info.push_back(plan.info[i]);
          found = true;
          break;
        }
      }
      if (!found) throw ValidationError("unknown sampler block '" + want + "'");
    }
    plan = std::move(filtered);
  }

  const int n_keep = (cfg.sampler.n_iter - cfg.sampler.n_burnin) / cfg.sampler.thin;
  out.samples.names = layout.names();
  out.samples.draws.resize(n_keep * cfg.sampler.n_chains, layout.dim());

  std::map<std::string, double> accept_sum;
  const int scalar_base = cfg.model.spatial_scale ? 18 : 12;
  for (int c = 0; c < cfg.sampler.n_chains; ++c) {
    JlsgevTarget target(train, basis, cfg.model, cfg.prior, layout, plan.info);
    // Overdispersed starts: each chain perturbs the basis coefficients around
    // the moment-based start.  All chains launching from delta = 0 exactly
    // would sit on the degenerate slice where the joint coefficient prior
    // rewards |rho| -> 1 without bound, and a chain reaching that corner
    // freezes; any nonzero delta seals it off.  Distinct starts also give the
    // split-Rhat diagnostic traction.  Falls back to the unperturbed start if
    // the perturbed log posterior is not finite.
    Rng jrng = Rng::derive(cfg.sampler.seed, 2000 + static_cast<std::uint64_t>(c));
    Eigen::VectorXd theta_c = theta0;
    double jscale = 0.5;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::VectorXd cand = theta0;
      for (int i = scalar_base; i < cand.size(); ++i) {
        cand[i] += jscale * jrng.normal();
      }
      if (std::isfinite(target.init_state(cand))) {
        theta_c = cand;
        break;
      }
      jscale *= 0.25;
    }
    Rng rng = Rng::derive(cfg.sampler.seed, 1000 + static_cast<std::uint64_t>(c));
    const ChainResult res = run_chain(target, theta_c, plan.specs, cfg.sampler, rng);
    for (int r = 0; r < res.draws.rows(); ++r) {
      out.samples.draws.row(c * n_keep + r) =
          layout.to_natural(res.draws.row(r).transpose()).transpose();
      out.samples.chain.push_back(c + 1);
      out.samples.iteration.push_back(res.iterations[r]);
    }
    for (const auto& [name, rate] : res.accept_rate) accept_sum[name] += rate;
  }
  for (const auto& [name, s] : accept_sum) {
    const double rate = s / cfg.sampler.n_chains;
    out.accept[name] = rate;
    if (rate < 0.1 || rate > 0.6) {
      out.warnings.push_back("acceptance rate outside [0.1, 0.6] for block " +
                             name);
    }
  }

  // Diagnostics over sampled coordinates only (frozen ones stay constant).
  std::vector<bool> active(layout.dim(), false);
  for (const auto& b : plan.specs) {
    for (int c : b.coords) active[c] = true;
  }
  const auto names = layout.names();
  for (int j = 0; j < layout.dim(); ++j) {
    if (!active[j]) continue;
    std::vector<Eigen::VectorXd> per_chain;
    for (int c = 0; c < cfg.sampler.n_chains; ++c) {
      per_chain.push_back(out.samples.draws.col(j).segment(c * n_keep, n_keep));
    }
    const double r = split_rhat(per_chain);
    double e = 0.0;
    for (const auto& seq : per_chain) e += ess_scalar(seq);
    out.rhat[names[j]] = r;
    out.ess[names[j]] = e;
    if (r > 1.1) out.warnings.push_back("rhat above 1.1 for " + names[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Draws CSV
// ---------------------------------------------------------------------------

void write_draws_csv(const std::string& path, const PosteriorSamples& s) {
  std::vector<std::string> lines;
  std::string header = "chain,iteration";
  for (const auto& n : s.names) header += ',' + n;
  lines.push_back(std::move(header));
  for (int r = 0; r < s.n_draws(); ++r) {
    std::string row = std::to_string(s.chain[r]);
    row += ',' + std::to_string(s.iteration[r]);
    for (int j = 0; j < s.draws.cols(); ++j) {
      row += ',' + csv::format_double(s.draws(r, j));
    }
    lines.push_back(std::move(row));
  }
  csv::write_lines(path, lines);
}

PosteriorSamples read_draws_csv(const std::string& path) {
  const csv::Table t = csv::read_table(path);
  if (t.header.size() < 3 || t.header[0] != "chain" || t.header[1] != "iteration") {
    throw IoError(path + ": expected chain,iteration,... header");
  }
  PosteriorSamples s;
  s.names.assign(t.header.begin() + 2, t.header.end());
  s.draws.resize(t.rows.size(), s.names.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string ctx = path + " row " + std::to_string(i + 2);
    s.chain.push_back(static_cast<int>(csv::parse_long(t.rows[i][0], ctx)));
    s.iteration.push_back(static_cast<int>(csv::parse_long(t.rows[i][1], ctx)));
    for (std::size_t j = 0; j < s.names.size(); ++j) {
      s.draws(i, j) = csv::parse_double(t.rows[i][2 + j], ctx);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Posterior surfaces at new sites
// ---------------------------------------------------------------------------

SiteEnsembles predict_process(const PosteriorSamples& samples,
                              const KnotSet& knots1, const KnotSet& knots2,
                              const ModelConfig& model,
                              const std::vector<Eigen::Vector2d>& locations,
                              int process) {
  if (process != 1 && process != 2) {
    throw ValidationError("predict_process: process must be 1 or 2");
  }
  const ParamLayout layout{model.spatial_scale, knots1.size()};
  if (layout.names() != samples.names) {
    throw ValidationError("predict_process: sample columns do not match model");
  }
  const int M = samples.n_draws();
  const int S = static_cast<int>(locations.size());
  const Eigen::MatrixXd b1 = eval_matrix(knots1, locations);
  const Eigen::MatrixXd b2 = eval_matrix(knots2, locations);

  SiteEnsembles out;
  out.mu.resize(M, S);
  out.sigma.resize(M, S);
  out.xi.resize(M);
  out.covered.resize(S);
  for (int i = 0; i < S; ++i) {
    const bool c1 = b1.row(i).maxCoeff() > 0.0;
    const bool c2 = b2.row(i).maxCoeff() > 0.0;
    out.covered[i] = process == 1 ? c1 : (c1 && c2);
  }
  for (int m = 0; m < M; ++m) {
    const ModelParams p = layout.unpack(samples.draws.row(m).transpose());
    Eigen::VectorXd mu, sigma;
    if (process == 1) {
      mu = (p.mu0[0] + p.lmc_mu.a11 * (b1 * p.delta_mu[0]).array()).matrix();
      if (model.spatial_scale) {
        sigma = (p.sigma0[0] + p.lmc_sigma.a11 * (b1 * p.delta_sigma[0]).array())
                    .exp()
                    .matrix();
      } else {
        sigma = Eigen::VectorXd::Constant(S, std::exp(p.sigma0[0]));
      }
      out.xi[m] = p.xi[0];
    } else {
      mu = (p.mu0[1] + p.lmc_mu.a21 * (b1 * p.delta_mu[0]).array() +
            p.lmc_mu.a22 * (b2 * p.delta_mu[1]).array())
               .matrix();
      if (model.spatial_scale) {
        sigma = (p.sigma0[1] + p.lmc_sigma.a21 * (b1 * p.delta_sigma[0]).array() +
                 p.lmc_sigma.a22 * (b2 * p.delta_sigma[1]).array())
                    .exp()
                    .matrix();
      } else {
        sigma = Eigen::VectorXd::Constant(S, std::exp(p.sigma0[1]));
      }
      out.xi[m] = p.xi[1];
    }
    out.mu.row(m) = mu.transpose();
    out.sigma.row(m) = sigma.transpose();
  }
  return out;
}

}  // namespace jlsgev
