#include "jlsgev/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "jlsgev/csv.hpp"
#include "jlsgev/errors.hpp"
#include "jlsgev/gev.hpp"
#include "jlsgev/ingest.hpp"
#include "jlsgev/matern.hpp"

namespace jlsgev {

namespace {

std::string cross_cov_name(CrossCovKind k) {
  return k == CrossCovKind::symmetric ? "symmetric" : "asymmetric";
}

std::string spatial_name(SpatialVariation s) {
  return s == SpatialVariation::location_only ? "location_only"
                                              : "location_and_scale";
}

CrossCovKind parse_cross_cov(const std::string& s) {
  if (s == "symmetric") return CrossCovKind::symmetric;
  if (s == "asymmetric") return CrossCovKind::asymmetric;
  throw ValidationError("unknown cross_cov '" + s + "'");
}

SpatialVariation parse_spatial(const std::string& s) {
  if (s == "location_only") return SpatialVariation::location_only;
  if (s == "location_and_scale") return SpatialVariation::location_and_scale;
  throw ValidationError("unknown spatial_variation '" + s + "'");
}

std::string padded_id(char prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%05d", prefix, i);
  return buf;
}

// Regular grid draw plus bilinear interpolation, for large site counts.
struct GridField {
  double x0, y0, step;
  int nx, ny;
  Eigen::VectorXd values;  // row-major, y-major

  double at(const Eigen::Vector2d& p) const {
    double fx = (p.x() - x0) / step;
    double fy = (p.y() - y0) / step;
    fx = std::clamp(fx, 0.0, static_cast<double>(nx - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(ny - 1));
    const int ix = std::min(static_cast<int>(fx), nx - 2);
    const int iy = std::min(static_cast<int>(fy), ny - 2);
    const double ax = fx - ix;
    const double ay = fy - iy;
    const double v00 = values[iy * nx + ix];
    const double v10 = values[iy * nx + ix + 1];
    const double v01 = values[(iy + 1) * nx + ix];
    const double v11 = values[(iy + 1) * nx + ix + 1];
    return (1.0 - ay) * ((1.0 - ax) * v00 + ax * v10) +
           ay * ((1.0 - ax) * v01 + ax * v11);
  }
};

GridField draw_grid_field(double x0, double x1, double y0, double y1,
                          const ScenarioConfig& cfg, Rng& rng) {
  GridField g;
  g.step = cfg.matern_range / 10.0;
  g.x0 = x0;
  g.y0 = y0;
  g.nx = static_cast<int>(std::ceil((x1 - x0) / g.step)) + 2;
  g.ny = static_cast<int>(std::ceil((y1 - y0) / g.step)) + 2;
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<std::size_t>(g.nx) * g.ny);
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      pts.emplace_back(x0 + ix * g.step, y0 + iy * g.step);
    }
  }
  g.values = sample_gaussian(
      matern_cov(pts, cfg.matern_range, cfg.matern_sill, cfg.matern_nu), rng);
  return g;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!(observed_fraction > 0.0 && observed_fraction <= 1.0)) {
    throw ValidationError("observed_fraction must lie in (0, 1]");
  }
  if (n_train < 1 || n_holdout < 1 || replicates < 1) {
    throw ValidationError("site and replicate counts must be positive");
  }
  if (!(matern_range > 0.0) || !(matern_sill > 0.0) || !(matern_nu > 0.0)) {
    throw ValidationError("Matern parameters must be positive");
  }
  if (!(coupling > -1.0 && coupling < 1.0)) {
    throw ValidationError("coupling must lie in (-1, 1)");
  }
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0)) {
    throw ValidationError("degenerate domain");
  }
  if (xi1 < 0.0 || xi2 < 0.0) throw ValidationError("xi must be >= 0");
  if (std::lround(observed_fraction * n_train) < 1) {
    throw ValidationError("observed_fraction leaves process 2 with no sites");
  }
}

ScenarioConfig scenario_preset(int id) {
  if (id < 1 || id > 20) throw ValidationError("scenario id must lie in 1..20");
  static constexpr double fractions[5] = {1.0 / 10, 1.0 / 15, 1.0 / 25,
                                          1.0 / 35, 1.0 / 50};
  ScenarioConfig cfg;
  cfg.observed_fraction = fractions[(id - 1) / 4];
  cfg.cross_cov = ((id - 1) % 4) < 2 ? CrossCovKind::symmetric
                                     : CrossCovKind::asymmetric;
  cfg.spatial_variation = ((id - 1) % 2) == 0
                              ? SpatialVariation::location_only
                              : SpatialVariation::location_and_scale;
  return cfg;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_field_pair(
    const std::vector<Eigen::Vector2d>& pts, const ScenarioConfig& cfg,
    Rng& rng) {
  const int n = static_cast<int>(pts.size());
  const bool asym = cfg.cross_cov == CrossCovKind::asymmetric;
  const Eigen::Vector2d h(cfg.delay_x, cfg.delay_y);
  const double c = cfg.coupling;
  const double mix = std::sqrt(1.0 - c * c);
  Eigen::VectorXd w1(n), w1_shift(n), e(n);

  const int exact_dim = asym ? 2 * n : n;
  if (exact_dim <= cfg.grid_site_threshold) {
    if (asym) {
      std::vector<Eigen::Vector2d> ext = pts;
      ext.reserve(2 * pts.size());
      for (const auto& p : pts) ext.push_back(p + h);
      const Eigen::VectorXd full = sample_gaussian(
          matern_cov(ext, cfg.matern_range, cfg.matern_sill, cfg.matern_nu),
          rng);
      w1 = full.head(n);
      w1_shift = full.tail(n);
    } else {
      w1 = sample_gaussian(
          matern_cov(pts, cfg.matern_range, cfg.matern_sill, cfg.matern_nu),
          rng);
      w1_shift = w1;
    }
    e = sample_gaussian(
        matern_cov(pts, cfg.matern_range, cfg.matern_sill, cfg.matern_nu), rng);
  } else {
    double x0 = cfg.domain.xmin, x1 = cfg.domain.xmax;
    double y0 = cfg.domain.ymin, y1 = cfg.domain.ymax;
    if (asym) {
      x0 += std::min(0.0, h.x());
      x1 += std::max(0.0, h.x());
      y0 += std::min(0.0, h.y());
      y1 += std::max(0.0, h.y());
    }
    const GridField g1 = draw_grid_field(x0, x1, y0, y1, cfg, rng);
    const GridField ge = draw_grid_field(cfg.domain.xmin, cfg.domain.xmax,
                                         cfg.domain.ymin, cfg.domain.ymax,
                                         cfg, rng);
    for (int i = 0; i < n; ++i) {
      w1[i] = g1.at(pts[i]);
      w1_shift[i] = asym ? g1.at(pts[i] + h) : w1[i];
      e[i] = ge.at(pts[i]);
    }
  }
  return {w1, -c * w1_shift + mix * e};
}

SimulatedData generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const int n_all = cfg.n_train + cfg.n_holdout;

  Rng site_rng = Rng::derive(cfg.seed, 0);
  std::vector<Eigen::Vector2d> sites;
  sites.reserve(n_all);
  for (int i = 0; i < n_all; ++i) {
    sites.emplace_back(cfg.domain.xmin + site_rng.uniform() * cfg.domain.width(),
                       cfg.domain.ymin + site_rng.uniform() * cfg.domain.height());
  }

  Rng mu_rng = Rng::derive(cfg.seed, 1);
  const auto [w1, w2] = sample_field_pair(sites, cfg, mu_rng);

  SimulatedTruth truth;
  truth.sites = sites;
  truth.xi1 = cfg.xi1;
  truth.xi2 = cfg.xi2;
  truth.mu1 = cfg.mu_offset1 + cfg.mu_scale1 * w1.array();
  truth.mu2 = cfg.mu_offset2 + cfg.mu_scale2 * w2.array();
  if (cfg.spatial_variation == SpatialVariation::location_and_scale) {
    Rng sig_rng = Rng::derive(cfg.seed, 2);
    const auto [u1, u2] = sample_field_pair(sites, cfg, sig_rng);
    truth.sigma1 = (cfg.sigma0_1 + cfg.sigma_scale * u1.array()).exp();
    truth.sigma2 = (cfg.sigma0_2 + cfg.sigma_scale * u2.array()).exp();
  } else {
    truth.sigma1 = Eigen::VectorXd::Constant(n_all, std::exp(cfg.sigma0_1));
    truth.sigma2 = Eigen::VectorXd::Constant(n_all, std::exp(cfg.sigma0_2));
  }
  for (int i = 0; i < n_all; ++i) {
    truth.split.push_back(i < cfg.n_train ? 0 : 1);
    truth.site_ids.push_back(i < cfg.n_train ? padded_id('t', i)
                                             : padded_id('h', i - cfg.n_train));
  }

  // Process-2 training mask: partial Fisher-Yates, reported ascending.
  const int k = static_cast<int>(std::lround(cfg.observed_fraction * cfg.n_train));
  Rng mask_rng = Rng::derive(cfg.seed, 3);
  std::vector<int> idx(cfg.n_train);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(mask_rng.uniform() * (cfg.n_train - i));
    std::swap(idx[i], idx[std::min(j, cfg.n_train - 1)]);
  }
  truth.observed2.assign(idx.begin(), idx.begin() + k);
  std::sort(truth.observed2.begin(), truth.observed2.end());

  const auto draw_obs = [&](Rng& rng, const std::vector<int>& rows, double xi,
                            const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& sigma) {
    Eigen::MatrixXd obs(rows.size(), cfg.replicates);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const GevParams gp{mu[rows[r]], sigma[rows[r]], xi};
      for (int j = 0; j < cfg.replicates; ++j) obs(r, j) = gev_sample(rng, gp);
    }
    return obs;
  };

  std::vector<int> train_rows(cfg.n_train);
  std::iota(train_rows.begin(), train_rows.end(), 0);
  std::vector<int> holdout_rows(cfg.n_holdout);
  std::iota(holdout_rows.begin(), holdout_rows.end(), cfg.n_train);

  SimulatedData out;
  out.truth = truth;

  Rng r10 = Rng::derive(cfg.seed, 10);
  out.train.z1.obs = draw_obs(r10, train_rows, cfg.xi1, truth.mu1, truth.sigma1);
  Rng r11 = Rng::derive(cfg.seed, 11);
  out.train.z2.obs = draw_obs(r11, truth.observed2, cfg.xi2, truth.mu2, truth.sigma2);
  Rng r12 = Rng::derive(cfg.seed, 12);
  out.holdout.z1.obs = draw_obs(r12, holdout_rows, cfg.xi1, truth.mu1, truth.sigma1);
  Rng r13 = Rng::derive(cfg.seed, 13);
  out.holdout.z2.obs = draw_obs(r13, holdout_rows, cfg.xi2, truth.mu2, truth.sigma2);

  for (int i : train_rows) {
    out.train.z1.site_ids.push_back(truth.site_ids[i]);
    out.train.z1.locations.push_back(sites[i]);
  }
  for (int i : truth.observed2) {
    out.train.z2.site_ids.push_back(truth.site_ids[i]);
    out.train.z2.locations.push_back(sites[i]);
  }
  for (int i : holdout_rows) {
    out.holdout.z1.site_ids.push_back(truth.site_ids[i]);
    out.holdout.z1.locations.push_back(sites[i]);
    out.holdout.z2.site_ids.push_back(truth.site_ids[i]);
    out.holdout.z2.locations.push_back(sites[i]);
  }
  out.train.validate();
  out.holdout.validate();
  return out;
}

static nlohmann::json scenario_to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["observed_fraction"] = cfg.observed_fraction;
  j["cross_cov"] = cross_cov_name(cfg.cross_cov);
  j["spatial_variation"] = spatial_name(cfg.spatial_variation);
  j["n_train"] = cfg.n_train;
  j["n_holdout"] = cfg.n_holdout;
  j["replicates"] = cfg.replicates;
  j["matern_range"] = cfg.matern_range;
  j["matern_sill"] = cfg.matern_sill;
  j["matern_nu"] = cfg.matern_nu;
  j["coupling"] = cfg.coupling;
  j["delay_x"] = cfg.delay_x;
  j["delay_y"] = cfg.delay_y;
  j["xi1"] = cfg.xi1;
  j["xi2"] = cfg.xi2;
  j["mu_offset1"] = cfg.mu_offset1;
  j["mu_offset2"] = cfg.mu_offset2;
  j["mu_scale1"] = cfg.mu_scale1;
  j["mu_scale2"] = cfg.mu_scale2;
  j["sigma0_1"] = cfg.sigma0_1;
  j["sigma0_2"] = cfg.sigma0_2;
  j["sigma_scale"] = cfg.sigma_scale;
  j["domain"] = {{"xmin", cfg.domain.xmin}, {"xmax", cfg.domain.xmax},
                 {"ymin", cfg.domain.ymin}, {"ymax", cfg.domain.ymax}};
  j["seed"] = cfg.seed;
  j["grid_site_threshold"] = cfg.grid_site_threshold;
  return j;
}

void export_scenario(const std::string& dir, const ScenarioConfig& cfg,
                     const SimulatedData& data) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir);

  {
    std::ofstream out(dir + "/scenario.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + dir + "/scenario.json");
    out << scenario_to_json(cfg).dump(2) << '\n';
  }
  write_process_csv(dir + "/train_z1.csv", data.train.z1);
  write_process_csv(dir + "/train_z2.csv", data.train.z2);
  write_process_csv(dir + "/holdout_z1.csv", data.holdout.z1);
  write_process_csv(dir + "/holdout_z2.csv", data.holdout.z2);

  const auto& t = data.truth;
  std::vector<std::string> lines;
  lines.push_back(
      "site,split,x,y,mu1,mu2,sigma1,sigma2,xi1,xi2,"
      "rl10_1,rl100_1,rl10_2,rl100_2");
  for (std::size_t i = 0; i < t.sites.size(); ++i) {
    const GevParams g1{t.mu1[i], t.sigma1[i], t.xi1};
    const GevParams g2{t.mu2[i], t.sigma2[i], t.xi2};
    std::string row = t.site_ids[i];
    row += ',' + std::to_string(t.split[i]);
    for (double v : {t.sites[i].x(), t.sites[i].y(), t.mu1[i], t.mu2[i],
                     t.sigma1[i], t.sigma2[i], t.xi1, t.xi2,
                     return_level(10.0, g1), return_level(100.0, g1),
                     return_level(10.0, g2), return_level(100.0, g2)}) {
      row += ',' + csv::format_double(v);
    }
    lines.push_back(std::move(row));
  }
  csv::write_lines(dir + "/truth.csv", lines);
}

LoadedScenario load_scenario(const std::string& dir) {
  LoadedScenario out;
  nlohmann::json j;
  {
    std::ifstream in(dir + "/scenario.json");
    if (!in) throw IoError("cannot open " + dir + "/scenario.json");
    in >> j;
  }
  out.domain = {j.at("domain").at("xmin").get<double>(),
                j.at("domain").at("xmax").get<double>(),
                j.at("domain").at("ymin").get<double>(),
                j.at("domain").at("ymax").get<double>()};
  out.spatial_variation = parse_spatial(j.at("spatial_variation"));

  out.data.train.z1 = read_process_csv(dir + "/train_z1.csv");
  out.data.train.z2 = read_process_csv(dir + "/train_z2.csv");
  out.data.holdout.z1 = read_process_csv(dir + "/holdout_z1.csv");
  out.data.holdout.z2 = read_process_csv(dir + "/holdout_z2.csv");
  out.data.train.validate();
  out.data.holdout.validate();

  const csv::Table truth = csv::read_table(dir + "/truth.csv");
  auto col = [&](const char* name) {
    const int c = truth.column(name);
    if (c < 0) throw IoError(dir + "/truth.csv: missing column " + std::string(name));
    return c;
  };
  SimulatedTruth& t = out.data.truth;
  const int n = static_cast<int>(truth.rows.size());
  t.mu1.resize(n); t.mu2.resize(n); t.sigma1.resize(n); t.sigma2.resize(n);
  const int c_site = col("site"), c_split = col("split"), c_x = col("x"),
            c_y = col("y"), c_mu1 = col("mu1"), c_mu2 = col("mu2"),
            c_s1 = col("sigma1"), c_s2 = col("sigma2"), c_xi1 = col("xi1"),
            c_xi2 = col("xi2");
  for (int i = 0; i < n; ++i) {
    const auto& r = truth.rows[i];
    const std::string ctx = dir + "/truth.csv row " + std::to_string(i + 2);
    t.site_ids.push_back(r[c_site]);
    t.split.push_back(static_cast<int>(csv::parse_long(r[c_split], ctx)));
    t.sites.emplace_back(csv::parse_double(r[c_x], ctx),
                         csv::parse_double(r[c_y], ctx));
    t.mu1[i] = csv::parse_double(r[c_mu1], ctx);
    t.mu2[i] = csv::parse_double(r[c_mu2], ctx);
    t.sigma1[i] = csv::parse_double(r[c_s1], ctx);
    t.sigma2[i] = csv::parse_double(r[c_s2], ctx);
    t.xi1 = csv::parse_double(r[c_xi1], ctx);
    t.xi2 = csv::parse_double(r[c_xi2], ctx);
  }
  // Recover the process-2 training mask from the exported site list.
  for (const auto& id : out.data.train.z2.site_ids) {
    for (std::size_t i = 0; i < t.site_ids.size(); ++i) {
      if (t.site_ids[i] == id) {
        t.observed2.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  return out;
}

}  // namespace jlsgev
