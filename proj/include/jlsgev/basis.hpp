#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace jlsgev {

struct Domain {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

// Quad-tree knot grid: level l holds a 2^l x 2^l grid of cell centers, with
// one bandwidth per level (1.5 x minimum pairwise knot distance at that
// level). Cell-center offsets are odd multiples of distinct dyadic
// fractions, so knots never coincide across levels.
struct KnotSet {
  Domain domain;
  int levels = 0;
  std::vector<Eigen::Vector2d> knots;  // level-major, row-major within level
  std::vector<double> bandwidth;       // size levels
  std::vector<int> level_offset;       // size levels+1, knot range per level

  int size() const { return static_cast<int>(knots.size()); }
  int level_of(int knot_index) const;  // 1-based level

  nlohmann::json to_json() const;
  static KnotSet from_json(const nlohmann::json& j);
};

KnotSet build_knots(const Domain& domain, int levels);

// {1 - (d/bandwidth)^2}^2 for d < bandwidth, else 0.
double bisquare(double dist, double bandwidth);

// rows = locations, cols = knots.
Eigen::MatrixXd eval_matrix(const KnotSet& ks,
                            const std::vector<Eigen::Vector2d>& locations);

// If any location has an all-zero basis row, widen the coarsest level's
// bandwidth once (x1.5) and record a warning. Returns true when widened.
bool ensure_coverage(KnotSet& ks, const std::vector<Eigen::Vector2d>& locations,
                     std::vector<std::string>* warnings);

}  // namespace jlsgev
