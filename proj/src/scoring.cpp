#include "jlsgev/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jlsgev/csv.hpp"
#include "jlsgev/errors.hpp"
#include "jlsgev/gev.hpp"

namespace jlsgev {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double aggregate(std::vector<double> v, Aggregation agg) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (agg == Aggregation::mean) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
  }
  return quantile_type7(
      Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()), 0.5);
}
}  // namespace

double rmse(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  if (truth.size() != pred.size()) {
    throw ValidationError("rmse: length mismatch");
  }
  if (truth.size() == 0) throw ValidationError("rmse: empty input");
  return std::sqrt((truth - pred).squaredNorm() / truth.size());
}

SortedSample::SortedSample(const Eigen::VectorXd& draws) {
  if (draws.size() == 0) throw ValidationError("crps: empty sample");
  x_.assign(draws.data(), draws.data() + draws.size());
  std::sort(x_.begin(), x_.end());
  const std::size_t m = x_.size();
  prefix_.resize(m + 1);
  prefix_[0] = 0.0;
  double pairs = 0.0;  // sum over i<j of (x_j - x_i)
  for (std::size_t i = 0; i < m; ++i) {
    prefix_[i + 1] = prefix_[i] + x_[i];
    pairs += i * x_[i] - prefix_[i];
  }
  pair_term_ = pairs / (static_cast<double>(m) * m);  // (1/(2m^2)) * 2 * pairs
}

double SortedSample::crps(double y) const {
  const std::size_t m = x_.size();
  const std::size_t k =
      std::lower_bound(x_.begin(), x_.end(), y) - x_.begin();
  const double below = k * y - prefix_[k];
  const double above = (prefix_[m] - prefix_[k]) - (m - k) * y;
  return (below + above) / m - pair_term_;
}

double SortedSample::median() const {
  return quantile_type7(
      Eigen::Map<const Eigen::VectorXd>(x_.data(), x_.size()), 0.5);
}

double crps_sample(const Eigen::VectorXd& draws, double y) {
  return SortedSample(draws).crps(y);
}

double logs_mixture(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma,
                    const Eigen::VectorXd& xi, double y) {
  const Eigen::Index m = mu.size();
  if (m == 0) throw ValidationError("logs_mixture: empty ensemble");
  if (sigma.size() != m || xi.size() != m) {
    throw ValidationError("logs_mixture: parameter length mismatch");
  }
  Eigen::VectorXd lp(m);
  double best = -kInf;
  for (Eigen::Index i = 0; i < m; ++i) {
    lp[i] = gev_logpdf(y, {mu[i], sigma[i], xi[i]});
    best = std::max(best, lp[i]);
  }
  if (best == -kInf) return kInf;
  double s = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) s += std::exp(lp[i] - best);
  return -(best + std::log(s / m));
}

double quantile_type7(const Eigen::VectorXd& x, double p) {
  if (x.size() == 0) throw ValidationError("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile: p outside [0,1]");
  std::vector<double> s(x.data(), x.data() + x.size());
  std::sort(s.begin(), s.end());
  const double h = (s.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  return s[lo] + (h - lo) * (s[lo + 1] - s[lo]);
}

std::vector<int> tail_subset(const Eigen::VectorXd& obs, double q) {
  if (obs.size() == 0) throw ValidationError("tail_subset: empty input");
  const double threshold = quantile_type7(obs, 1.0 - q);
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    if (obs[i] >= threshold) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

std::vector<MetricRow> score_process(const SiteEnsembles& ens,
                                     const ProcessEvaluation& eval,
                                     const std::string& variant, int process,
                                     Aggregation agg, std::uint64_t seed,
                                     std::vector<std::string>* warnings) {
  const int M = static_cast<int>(ens.mu.rows());
  const int S = static_cast<int>(ens.mu.cols());
  if (M == 0 || S == 0) throw ValidationError("score_process: empty ensembles");
  if (eval.obs.rows() != S) {
    throw ValidationError("score_process: observation rows do not match sites");
  }
  if (M < 100 && warnings) {
    warnings->push_back("ensemble size " + std::to_string(M) +
                        " below 100; LogS may be unstable");
  }

  std::vector<MetricRow> rows;
  auto emit = [&](const std::string& metric, double value) {
    rows.push_back({metric, variant, process, value});
  };

  if (eval.has_truth) {
    Eigen::VectorXd pm(S), ps(S), p10(S), p100(S);
    for (int j = 0; j < S; ++j) {
      pm[j] = ens.mu.col(j).mean();
      ps[j] = ens.sigma.col(j).mean();
      double r10 = 0.0, r100 = 0.0;
      for (int m = 0; m < M; ++m) {
        const GevParams p{ens.mu(m, j), ens.sigma(m, j), ens.xi[m]};
        r10 += return_level(10.0, p);
        r100 += return_level(100.0, p);
      }
      p10[j] = r10 / M;
      p100[j] = r100 / M;
    }
    emit("rmse_mu", rmse(eval.true_mu, pm));
    emit("rmse_sigma", rmse(eval.true_sigma, ps));
    emit("rmse_rl10", rmse(eval.true_rl10, p10));
    emit("rmse_rl100", rmse(eval.true_rl100, p100));
  }

  // Predictive sample per site: one draw from each retained parameter set.
  std::vector<SortedSample> pred;
  pred.reserve(S);
  for (int j = 0; j < S; ++j) {
    Rng rng = Rng::derive(seed, 500000 + static_cast<std::uint64_t>(j));
    Eigen::VectorXd sample(M);
    for (int m = 0; m < M; ++m) {
      sample[m] = gev_sample(rng, {ens.mu(m, j), ens.sigma(m, j), ens.xi[m]});
    }
    pred.emplace_back(sample);
  }

  std::vector<double> crps_all, logs_all, pooled, pred_median;
  std::vector<int> pooled_site;
  for (int j = 0; j < S; ++j) {
    const Eigen::VectorXd mu_j = ens.mu.col(j);
    const Eigen::VectorXd sg_j = ens.sigma.col(j);
    for (int t = 0; t < eval.obs.cols(); ++t) {
      const double y = eval.obs(j, t);
      if (std::isnan(y)) continue;
      crps_all.push_back(pred[j].crps(y));
      logs_all.push_back(logs_mixture(mu_j, sg_j, ens.xi, y));
      pooled.push_back(y);
      pooled_site.push_back(j);
    }
  }
  if (pooled.empty()) {
    throw ValidationError("score_process: no held-out observations");
  }
  emit("crps", aggregate(crps_all, agg));
  emit("logs", aggregate(logs_all, agg));

  const std::vector<int> tail = tail_subset(
      Eigen::Map<const Eigen::VectorXd>(pooled.data(), pooled.size()), 0.05);
  std::vector<double> crps_tail, logs_tail;
  Eigen::VectorXd tail_obs(tail.size()), tail_pred(tail.size());
  for (std::size_t k = 0; k < tail.size(); ++k) {
    const int i = tail[k];
    crps_tail.push_back(crps_all[i]);
    logs_tail.push_back(logs_all[i]);
    tail_obs[k] = pooled[i];
    tail_pred[k] = pred[pooled_site[i]].median();
  }
  emit("crps_tail", aggregate(crps_tail, agg));
  emit("logs_tail", aggregate(logs_tail, agg));
  emit("rmse_tail", rmse(tail_obs, tail_pred));
  return rows;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  std::vector<std::string> lines = {"metric,variant,process,value"};
  for (const auto& r : rows) {
    lines.push_back(r.metric + ',' + r.variant + ',' +
                    std::to_string(r.process) + ',' +
                    csv::format_double(r.value));
  }
  csv::write_lines(path, lines);
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  const csv::Table t = csv::read_table(path);
  const std::vector<std::string> want = {"metric", "variant", "process", "value"};
  if (t.header != want) throw IoError(path + ": unexpected metrics header");
  std::vector<MetricRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string ctx = path + " row " + std::to_string(i + 2);
    rows.push_back({t.rows[i][0], t.rows[i][1],
                    static_cast<int>(csv::parse_long(t.rows[i][2], ctx)),
                    csv::parse_double(t.rows[i][3], ctx)});
  }
  return rows;
}

}  // namespace jlsgev
