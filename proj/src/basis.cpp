#include "jlsgev/basis.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "jlsgev/errors.hpp"

namespace jlsgev {

int KnotSet::level_of(int knot_index) const {
  for (int l = 0; l < levels; ++l) {
    if (knot_index < level_offset[l + 1]) return l + 1;
  }
  throw ValidationError("knot index out of range");
}

KnotSet build_knots(const Domain& domain, int levels) {
  if (levels < 1) throw ValidationError("build_knots: levels must be >= 1");
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0)) {
    throw ValidationError("build_knots: degenerate domain");
  }
  KnotSet ks;
  ks.domain = domain;
  ks.levels = levels;
  ks.level_offset.push_back(0);
  for (int l = 1; l <= levels; ++l) {
    const int g = 1 << l;
    const double sx = domain.width() / g;
    const double sy = domain.height() / g;
    const int first = ks.size();
    for (int iy = 0; iy < g; ++iy) {
      for (int ix = 0; ix < g; ++ix) {
        ks.knots.emplace_back(domain.xmin + (ix + 0.5) * sx,
                              domain.ymin + (iy + 0.5) * sy);
      }
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (int i = first; i < ks.size(); ++i) {
      for (int j = i + 1; j < ks.size(); ++j) {
        min_dist = std::min(min_dist, (ks.knots[i] - ks.knots[j]).norm());
      }
    }
    ks.bandwidth.push_back(1.5 * min_dist);
    ks.level_offset.push_back(ks.size());
  }
  return ks;
}

double bisquare(double dist, double bandwidth) {
  if (!(bandwidth > 0.0)) throw ValidationError("bisquare: bandwidth must be positive");
  if (dist < 0.0) throw ValidationError("bisquare: negative distance");
  if (dist >= bandwidth) return 0.0;
  const double r = dist / bandwidth;
  const double t = 1.0 - r * r;
  return t * t;
}

Eigen::MatrixXd eval_matrix(const KnotSet& ks,
                            const std::vector<Eigen::Vector2d>& locations) {
  const int n = static_cast<int>(locations.size());
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, ks.size());
  for (int l = 0; l < ks.levels; ++l) {
    const double bw = ks.bandwidth[l];
    for (int m = ks.level_offset[l]; m < ks.level_offset[l + 1]; ++m) {
      const Eigen::Vector2d& u = ks.knots[m];
      for (int i = 0; i < n; ++i) {
        const double d = (locations[i] - u).norm();
        if (d < bw) phi(i, m) = bisquare(d, bw);
      }
    }
  }
  return phi;
}

bool ensure_coverage(KnotSet& ks, const std::vector<Eigen::Vector2d>& locations,
                     std::vector<std::string>* warnings) {
  const Eigen::MatrixXd phi = eval_matrix(ks, locations);
  bool uncovered = false;
  for (int i = 0; i < phi.rows(); ++i) {
    if (phi.row(i).cwiseAbs().maxCoeff() == 0.0) {
      uncovered = true;
      break;
    }
  }
  if (!uncovered) return false;
  ks.bandwidth[0] *= 1.5;
  if (warnings) {
    warnings->push_back("basis coverage: widened coarsest bandwidth to " +
                        std::to_string(ks.bandwidth[0]));
  }
  return true;
}

nlohmann::json KnotSet::to_json() const {
  nlohmann::json j;
  j["domain"] = {{"xmin", domain.xmin}, {"xmax", domain.xmax},
                 {"ymin", domain.ymin}, {"ymax", domain.ymax}};
  j["levels"] = levels;
  j["bandwidth"] = bandwidth;
  j["level_offset"] = level_offset;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& k : knots) pts.push_back({k.x(), k.y()});
  j["knots"] = std::move(pts);
  return j;
}

KnotSet KnotSet::from_json(const nlohmann::json& j) {
  KnotSet ks;
  ks.domain = {j.at("domain").at("xmin").get<double>(),
               j.at("domain").at("xmax").get<double>(),
               j.at("domain").at("ymin").get<double>(),
               j.at("domain").at("ymax").get<double>()};
  ks.levels = j.at("levels").get<int>();
  ks.bandwidth = j.at("bandwidth").get<std::vector<double>>();
  ks.level_offset = j.at("level_offset").get<std::vector<int>>();
  for (const auto& p : j.at("knots")) {
    ks.knots.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  }
  if (static_cast<int>(ks.bandwidth.size()) != ks.levels ||
      static_cast<int>(ks.level_offset.size()) != ks.levels + 1 ||
      ks.level_offset.back() != ks.size()) {
    throw ValidationError("KnotSet::from_json: inconsistent fields");
  }
  return ks;
}

}  // namespace jlsgev
