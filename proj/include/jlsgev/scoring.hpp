#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "jlsgev/mcmc.hpp"

namespace jlsgev {

// Root mean squared difference; throws on length mismatch or empty input.
double rmse(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);

// CRPS of the empirical distribution of `draws` at outcome y:
// (1/m) sum_i |x_i - y| - (1/(2 m^2)) sum_{i,j} |x_i - x_j|.
double crps_sample(const Eigen::VectorXd& draws, double y);

// Pre-sorted ensemble; crps(y) costs O(log m) after O(m log m) setup, and
// median() is the type-7 midpoint. Used when one predictive sample is scored
// against many held-out replicates.
class SortedSample {
 public:
  explicit SortedSample(const Eigen::VectorXd& draws);
  double crps(double y) const;
  double median() const;

 private:
  std::vector<double> x_;       // ascending
  std::vector<double> prefix_;  // prefix_[k] = sum of first k values
  double pair_term_ = 0.0;      // (1/(2 m^2)) sum_{i,j} |x_i - x_j|
};

// -log[(1/M) sum_m gev_pdf(y; theta_m)] via log-sum-exp; +inf when y lies
// outside every draw's support.
double logs_mixture(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma,
                    const Eigen::VectorXd& xi, double y);

// Empirical (1-q) quantile with type-7 interpolation; returns the indices of
// observations >= that threshold (ties included).
std::vector<int> tail_subset(const Eigen::VectorXd& obs, double q = 0.05);

// Type-7 (linear interpolation) empirical quantile, p in [0, 1].
double quantile_type7(const Eigen::VectorXd& x, double p);

enum class Aggregation { mean, median };

// Evaluation targets for one process, row-aligned with the prediction sites.
struct ProcessEvaluation {
  Eigen::MatrixXd obs;  // sites x replicates, NaN = missing
  bool has_truth = false;
  Eigen::VectorXd true_mu, true_sigma, true_rl10, true_rl100;
};

struct MetricRow {
  std::string metric;
  std::string variant;
  int process = 0;
  double value = 0.0;
};

// Scores one process's posterior ensembles against truth surfaces (when
// present) and held-out observations. Predictive samples for CRPS/rmse_tail
// take one gev_sample per retained draw with an rng derived from (seed,
// site); the tail set pools observations across sites and replicates.
std::vector<MetricRow> score_process(const SiteEnsembles& ens,
                                     const ProcessEvaluation& eval,
                                     const std::string& variant, int process,
                                     Aggregation agg, std::uint64_t seed,
                                     std::vector<std::string>* warnings);

// `metric,variant,process,value` with %.17g values, deterministic row order.
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(const std::string& path);

}  // namespace jlsgev
