#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "jlsgev/basis.hpp"
#include "jlsgev/dataset.hpp"
#include "jlsgev/rng.hpp"

namespace jlsgev {

enum class CrossCovKind { symmetric, asymmetric };
enum class SpatialVariation { location_only, location_and_scale };

// Benchmark scenario: two GEV processes whose mu (and optionally log sigma)
// surfaces are driven by coupled Matern fields,
//   w2(s) = -coupling * w1(s + delay) + sqrt(1 - coupling^2) * e(s),
// delay = 0 for symmetric scenarios. Process 1 is observed at every training
// site; process 2 only at a sampled fraction of them.
struct ScenarioConfig {
  double observed_fraction = 0.1;
  CrossCovKind cross_cov = CrossCovKind::symmetric;
  SpatialVariation spatial_variation = SpatialVariation::location_only;
  int n_train = 400;
  int n_holdout = 400;
  int replicates = 10;
  double matern_range = 1.0;
  double matern_sill = 1.0;
  double matern_nu = 1.5;
  double coupling = 0.8;
  double delay_x = 0.5;
  double delay_y = 0.0;
  double xi1 = 0.1;
  double xi2 = 0.1;
  double mu_offset1 = 10.0;
  double mu_offset2 = 5.0;
  double mu_scale1 = 1.0;
  double mu_scale2 = 1.0;
  double sigma0_1 = 0.6931471805599453;  // log 2
  double sigma0_2 = 0.0;
  double sigma_scale = 0.3;
  Domain domain{0.0, 5.0, 0.0, 5.0};
  std::uint64_t seed = 1;
  // Above this many field evaluation points, fields are drawn on a fine grid
  // and interpolated bilinearly.
  int grid_site_threshold = 3000;

  void validate() const;
};

// The 20-scenario benchmark grid: fractions {1/10, 1/15, 1/25, 1/35, 1/50}
// x {symmetric, asymmetric} x {location_only, location_and_scale}, numbered
// 1..20 fraction-major, symmetric before asymmetric, location_only first.
ScenarioConfig scenario_preset(int id);

struct SimulatedTruth {
  std::vector<std::string> site_ids;       // train then holdout
  std::vector<Eigen::Vector2d> sites;
  std::vector<int> split;                  // 0 train, 1 holdout
  Eigen::VectorXd mu1, mu2, sigma1, sigma2;
  double xi1 = 0.1, xi2 = 0.1;
  std::vector<int> observed2;              // train site indices with z2 data
};

struct SimulatedData {
  Dataset train;    // z2 restricted to the observed mask
  Dataset holdout;  // both processes at every holdout site
  SimulatedTruth truth;
};

// Coupled field pair at the given points; pair.first = w1, pair.second = w2.
std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_field_pair(
    const std::vector<Eigen::Vector2d>& pts, const ScenarioConfig& cfg,
    Rng& rng);

SimulatedData generate_scenario(const ScenarioConfig& cfg);

void export_scenario(const std::string& dir, const ScenarioConfig& cfg,
                     const SimulatedData& data);

struct LoadedScenario {
  SimulatedData data;
  Domain domain;
  SpatialVariation spatial_variation = SpatialVariation::location_only;
};
LoadedScenario load_scenario(const std::string& dir);

}  // namespace jlsgev
