#include "commands.hpp"

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <thread>

#include "jlsgev/csv.hpp"
#include "jlsgev/errors.hpp"
#include "jlsgev/gev.hpp"
#include "jlsgev/ingest.hpp"
#include "jlsgev/mcmc.hpp"
#include "jlsgev/scoring.hpp"
#include "jlsgev/simgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace jlsgev::cli {
namespace {

// ---------------------------------------------------------------------------
// Small shared helpers
// ---------------------------------------------------------------------------

ModelVariant parse_variant(const std::string& s) {
  if (s == "joint_asymmetric") return ModelVariant::joint_asymmetric;
  if (s == "joint_symmetric") return ModelVariant::joint_symmetric;
  if (s == "independent") return ModelVariant::independent;
  throw ValidationError("unknown variant '" + s +
                        "' (expected joint_asymmetric, joint_symmetric, or "
                        "independent)");
}

std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::joint_asymmetric: return "joint_asymmetric";
    case ModelVariant::joint_symmetric: return "joint_symmetric";
    case ModelVariant::independent: return "independent";
  }
  return "";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

// "1,3,5", "2-4", "1..20", or combinations thereof.
std::vector<long> parse_int_list(const std::string& text) {
  std::vector<long> out;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    std::size_t sep = token.find("..");
    std::size_t skip = 2;
    if (sep == std::string::npos) {
      sep = token.find('-', 1);
      skip = 1;
    }
    if (sep == std::string::npos) {
      out.push_back(csv::parse_long(token, "list '" + text + "'"));
    } else {
      const long a = csv::parse_long(token.substr(0, sep), "list '" + text + "'");
      const long b =
          csv::parse_long(token.substr(sep + skip), "list '" + text + "'");
      if (b < a) throw ValidationError("descending range '" + token + "'");
      for (long v = a; v <= b; ++v) out.push_back(v);
    }
  }
  if (out.empty()) throw ValidationError("empty list '" + text + "'");
  return out;
}

double parse_fraction(const std::string& text) {
  static const std::vector<std::pair<std::string, double>> allowed = {
      {"1/10", 1.0 / 10}, {"1/15", 1.0 / 15}, {"1/25", 1.0 / 25},
      {"1/35", 1.0 / 35}, {"1/50", 1.0 / 50}};
  for (const auto& [name, value] : allowed) {
    if (text == name) return value;
  }
  throw ValidationError("fraction '" + text +
                        "' not in {1/10, 1/15, 1/25, 1/35, 1/50}");
}

std::string fraction_label(double f) {
  const long denom = std::lround(1.0 / f);
  return "1/" + std::to_string(denom);
}

Domain bounding_domain(const std::vector<Eigen::Vector2d>& locs) {
  if (locs.empty()) throw ValidationError("no locations for domain");
  Domain d{locs[0].x(), locs[0].x(), locs[0].y(), locs[0].y()};
  for (const auto& p : locs) {
    d.xmin = std::min(d.xmin, p.x());
    d.xmax = std::max(d.xmax, p.x());
    d.ymin = std::min(d.ymin, p.y());
    d.ymax = std::max(d.ymax, p.y());
  }
  const double px = std::max(0.05 * (d.xmax - d.xmin), 1e-6);
  const double py = std::max(0.05 * (d.ymax - d.ymin), 1e-6);
  return {d.xmin - px, d.xmax + px, d.ymin - py, d.ymax + py};
}

// If --config names a JSON file, keys fill in options the command line left
// at their defaults; explicit flags always win.
class ConfigMerge {
 public:
  void bind(CLI::Option* opt, const char* key, std::function<void(const json&)> set) {
    entries_.push_back({opt, key, std::move(set)});
  }
  template <typename T>
  void bind_value(CLI::Option* opt, const char* key, T& var) {
    bind(opt, key, [&var, key](const json& j) { var = j.at(key).get<T>(); });
  }
  void apply(const std::string& config_path) const {
    if (config_path.empty()) return;
    const json j = read_json_file(config_path);
    for (const auto& e : entries_) {
      if (e.opt->count() == 0 && j.contains(e.key)) e.set(j);
    }
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::string key;
    std::function<void(const json&)> set;
  };
  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Sampler options shared by fit and sweep
// ---------------------------------------------------------------------------

struct SamplerCli {
  int iters = 8000;
  int burnin = 3000;
  int thin = 5;
  int chains = 1;
  int levels = 3;

  void add(CLI::App* cmd, ConfigMerge& merge) {
    merge.bind_value(cmd->add_option("--iters", iters, "MCMC iterations"),
                     "iters", iters);
    merge.bind_value(cmd->add_option("--burnin", burnin, "Burn-in iterations"),
                     "burnin", burnin);
    merge.bind_value(cmd->add_option("--thin", thin, "Thinning stride"),
                     "thin", thin);
    merge.bind_value(cmd->add_option("--chains", chains, "Chain count"),
                     "chains", chains);
    merge.bind_value(cmd->add_option("--levels", levels, "Basis resolutions"),
                     "levels", levels);
  }
  json to_json() const {
    return {{"iters", iters}, {"burnin", burnin}, {"thin", thin},
            {"chains", chains}, {"levels", levels}};
  }
  SamplerConfig config(std::uint64_t seed) const {
    SamplerConfig s;
    s.n_iter = iters;
    s.n_burnin = burnin;
    s.thin = thin;
    s.n_chains = chains;
    s.seed = seed;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Fit directory serialization
// ---------------------------------------------------------------------------

void write_fit_dir(const std::string& dir, const FitOutput& out) {
  fs::create_directories(dir);
  write_draws_csv(dir + "/draws.csv", out.samples);
  json bases;
  bases["variant"] = variant_name(out.model.variant);
  bases["spatial_scale"] = out.model.spatial_scale;
  bases["knots1"] = out.knots1.to_json();
  bases["knots2"] = out.knots2.to_json();
  write_json_file(dir + "/bases.json", bases);
  json diag;
  diag["rhat"] = out.rhat;
  diag["ess"] = out.ess;
  diag["accept"] = out.accept;
  diag["warnings"] = out.warnings;
  double max_rhat = 0.0;
  for (const auto& [name, r] : out.rhat) max_rhat = std::max(max_rhat, r);
  diag["max_rhat"] = max_rhat;
  write_json_file(dir + "/diagnostics.json", diag);
}

struct LoadedFit {
  PosteriorSamples samples;
  KnotSet knots1, knots2;
  ModelConfig model;
};

LoadedFit load_fit_dir(const std::string& dir) {
  if (!fs::exists(dir + "/bases.json")) {
    throw IoError("fit directory " + dir + " is missing bases.json");
  }
  const json bases = read_json_file(dir + "/bases.json");
  LoadedFit lf;
  lf.model.variant = parse_variant(bases.at("variant").get<std::string>());
  lf.model.spatial_scale = bases.at("spatial_scale").get<bool>();
  lf.knots1 = KnotSet::from_json(bases.at("knots1"));
  lf.knots2 = KnotSet::from_json(bases.at("knots2"));
  lf.samples = read_draws_csv(dir + "/draws.csv");
  return lf;
}

double max_rhat_of(const FitOutput& out) {
  double m = 0.0;
  for (const auto& [name, r] : out.rhat) m = std::max(m, r);
  return m;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  int scenario = 0;
  bool all = false;
  std::string seeds = "1";
  std::string fraction;
  int n_train = -1;
  int n_holdout = -1;
  int replicates = -1;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  if (!a.all && (a.scenario < 1 || a.scenario > 20)) {
    throw ValidationError("simulate: --scenario must be 1..20 (or use --all)");
  }
  std::vector<long> ids;
  if (a.all) {
    for (long i = 1; i <= 20; ++i) ids.push_back(i);
  } else {
    ids.push_back(a.scenario);
  }
  const std::vector<long> seeds = parse_int_list(a.seeds);
  for (long s : seeds) {
    if (s < 0) throw ValidationError("simulate: seeds must be nonnegative");
  }

  for (long id : ids) {
    for (long seed : seeds) {
      ScenarioConfig cfg = scenario_preset(static_cast<int>(id));
      if (!a.fraction.empty()) cfg.observed_fraction = parse_fraction(a.fraction);
      if (a.n_train > 0) cfg.n_train = a.n_train;
      if (a.n_holdout > 0) cfg.n_holdout = a.n_holdout;
      if (a.replicates > 0) cfg.replicates = a.replicates;
      cfg.seed = static_cast<std::uint64_t>(seed);
      cfg.validate();

      char name[64];
      std::snprintf(name, sizeof(name), "scenario_%02ld_seed_%ld", id, seed);
      const std::string dir = a.out + "/" + name;
      fs::create_directories(dir);
      const SimulatedData data = generate_scenario(cfg);
      export_scenario(dir, cfg, data);

      json resolved;
      resolved["command"] = "simulate";
      resolved["scenario"] = id;
      resolved["seed"] = seed;
      resolved["fraction"] = fraction_label(cfg.observed_fraction);
      resolved["n_train"] = cfg.n_train;
      resolved["n_holdout"] = cfg.n_holdout;
      resolved["replicates"] = cfg.replicates;
      write_json_file(dir + "/resolved_config.json", resolved);
      std::cout << "wrote " << dir << '\n';
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string config;
  std::string data;
  std::string ghcnd1, ghcnd2, element1, element2;
  int min_days = 20;
  std::string variant = "joint_asymmetric";
  std::string spatial = "auto";
  std::uint64_t seed = 1;
  double rhat_limit = 1.1;
  bool allow_unconverged = false;
  SamplerCli sampler;
  std::string out;
};

struct FitInputs {
  Dataset train;
  Domain domain;
  bool spatial_default = true;
};

FitInputs load_fit_inputs(const FitArgs& a) {
  FitInputs in;
  if (!a.ghcnd1.empty() || !a.ghcnd2.empty()) {
    if (a.ghcnd1.empty() || a.ghcnd2.empty() || a.element1.empty() ||
        a.element2.empty()) {
      throw ValidationError(
          "fit: station input needs --ghcnd1/--ghcnd2 and --element1/--element2");
    }
    const auto s1 = block_maxima(read_ghcnd_csv(a.ghcnd1, a.element1), a.min_days);
    const auto s2 = block_maxima(read_ghcnd_csv(a.ghcnd2, a.element2), a.min_days);
    const AssembledDataset asm_data = assemble_dataset(s1, s2);
    in.train = asm_data.data;
    std::vector<Eigen::Vector2d> locs = in.train.z1.locations;
    locs.insert(locs.end(), in.train.z2.locations.begin(),
                in.train.z2.locations.end());
    in.domain = bounding_domain(locs);
    in.spatial_default = true;
    return in;
  }
  if (a.data.empty()) {
    throw ValidationError("fit: need --data or --ghcnd1/--ghcnd2");
  }
  const LoadedScenario sc = load_scenario(a.data);
  in.train = sc.data.train;
  in.domain = sc.domain;
  in.spatial_default =
      sc.spatial_variation == SpatialVariation::location_and_scale;
  return in;
}

int cmd_fit(const FitArgs& a) {
  if (a.out.empty()) throw ValidationError("fit: --out is required");
  const FitInputs in = load_fit_inputs(a);

  FitConfig fc;
  fc.model.variant = parse_variant(a.variant);
  if (a.spatial == "auto") {
    fc.model.spatial_scale = in.spatial_default;
  } else if (a.spatial == "on") {
    fc.model.spatial_scale = true;
  } else if (a.spatial == "off") {
    fc.model.spatial_scale = false;
  } else {
    throw ValidationError("fit: --spatial-scale must be auto, on, or off");
  }
  fc.sampler = a.sampler.config(a.seed);
  fc.levels = a.sampler.levels;

  const FitOutput out = fit(in.train, in.domain, fc);
  write_fit_dir(a.out, out);

  json resolved;
  resolved["command"] = "fit";
  resolved["data"] = a.data;
  resolved["variant"] = a.variant;
  resolved["spatial_scale"] = fc.model.spatial_scale;
  resolved["seed"] = a.seed;
  resolved["rhat_limit"] = a.rhat_limit;
  resolved["allow_unconverged"] = a.allow_unconverged;
  resolved.update(a.sampler.to_json());
  write_json_file(a.out + "/resolved_config.json", resolved);

  for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
  const double mr = max_rhat_of(out);
  std::cout << "fit complete: " << out.samples.n_draws()
            << " draws, max R-hat " << mr << '\n';
  if (!a.allow_unconverged && !(mr <= a.rhat_limit)) {
    throw ConvergenceError("max R-hat " + std::to_string(mr) + " exceeds " +
                           std::to_string(a.rhat_limit) +
                           " (rerun with --allow-unconverged to keep going)");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string config;
  std::string fit_dir;
  std::string sites;
  int process = 2;
  std::string return_levels = "10,100";
  std::uint64_t seed = 1;
  std::string out;
};

void read_sites_csv(const std::string& path, std::vector<std::string>& ids,
                    std::vector<Eigen::Vector2d>& locs) {
  const csv::Table t = csv::read_table(path);
  if (t.header.size() < 3 || t.header[0] != "site" || t.header[1] != "x" ||
      t.header[2] != "y") {
    throw IoError(path + ": expected site,x,y,... header");
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string ctx = path + " row " + std::to_string(i + 2);
    ids.push_back(t.rows[i][0]);
    locs.emplace_back(csv::parse_double(t.rows[i][1], ctx),
                      csv::parse_double(t.rows[i][2], ctx));
  }
  if (ids.empty()) throw ValidationError(path + ": no sites");
}

void append_summary(std::string& row, const Eigen::VectorXd& col) {
  row += ',' + csv::format_double(col.mean());
  row += ',' + csv::format_double(quantile_type7(col, 0.5));
  row += ',' + csv::format_double(quantile_type7(col, 0.025));
  row += ',' + csv::format_double(quantile_type7(col, 0.975));
}

int cmd_predict(const PredictArgs& a) {
  if (a.out.empty()) throw ValidationError("predict: --out is required");
  if (a.process != 1 && a.process != 2) {
    throw ValidationError("predict: --process must be 1 or 2");
  }
  const LoadedFit lf = load_fit_dir(a.fit_dir);
  std::vector<std::string> ids;
  std::vector<Eigen::Vector2d> locs;
  read_sites_csv(a.sites, ids, locs);
  std::vector<long> horizons = parse_int_list(a.return_levels);
  for (long T : horizons) {
    if (T <= 1) throw ValidationError("predict: return periods must exceed 1");
  }

  const SiteEnsembles ens =
      predict_process(lf.samples, lf.knots1, lf.knots2, lf.model, locs, a.process);
  const int M = static_cast<int>(ens.mu.rows());

  std::string header = "site,x,y,covered";
  for (const char* q : {"mu", "sigma"}) {
    for (const char* s : {"mean", "median", "q025", "q975"}) {
      header += ',' + std::string(q) + '_' + s;
    }
  }
  for (long T : horizons) {
    for (const char* s : {"mean", "median", "q025", "q975"}) {
      header += ",rl" + std::to_string(T) + '_' + s;
    }
  }
  std::vector<std::string> lines = {header};
  Eigen::VectorXd rl(M);
  for (std::size_t j = 0; j < locs.size(); ++j) {
    std::string row = ids[j];
    row += ',' + csv::format_double(locs[j].x());
    row += ',' + csv::format_double(locs[j].y());
    row += ',' + std::string(ens.covered[j] ? "1" : "0");
    append_summary(row, ens.mu.col(j));
    append_summary(row, ens.sigma.col(j));
    for (long T : horizons) {
      for (int m = 0; m < M; ++m) {
        rl[m] = return_level(static_cast<double>(T),
                             {ens.mu(m, j), ens.sigma(m, j), ens.xi[m]});
      }
      append_summary(row, rl);
    }
    lines.push_back(std::move(row));
  }
  csv::write_lines(a.out, lines);

  json resolved;
  resolved["command"] = "predict";
  resolved["fit"] = a.fit_dir;
  resolved["sites"] = a.sites;
  resolved["process"] = a.process;
  resolved["return_levels"] = a.return_levels;
  resolved["seed"] = a.seed;
  write_json_file(fs::path(a.out).replace_extension("").string() +
                      "_config.json",
                  resolved);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string config;
  std::string scenario;
  std::vector<std::string> fits;  // "label=dir" or "dir"
  std::string aggregate = "mean";
  std::uint64_t seed = 1;
  std::string out;
  std::string paper_table;
};

ProcessEvaluation truth_eval(const LoadedScenario& sc, int process) {
  const ProcessData& holdout = process == 1 ? sc.data.holdout.z1 : sc.data.holdout.z2;
  const SimulatedTruth& t = sc.data.truth;
  std::map<std::string, int> by_id;
  for (std::size_t i = 0; i < t.site_ids.size(); ++i) {
    by_id[t.site_ids[i]] = static_cast<int>(i);
  }
  ProcessEvaluation ev;
  ev.obs = holdout.obs;
  ev.has_truth = true;
  const int S = holdout.n_sites();
  ev.true_mu.resize(S);
  ev.true_sigma.resize(S);
  ev.true_rl10.resize(S);
  ev.true_rl100.resize(S);
  const double xi = process == 1 ? t.xi1 : t.xi2;
  for (int j = 0; j < S; ++j) {
    const auto it = by_id.find(holdout.site_ids[j]);
    if (it == by_id.end()) {
      throw ValidationError("truth table is missing site " + holdout.site_ids[j]);
    }
    const int i = it->second;
    const double mu = process == 1 ? t.mu1[i] : t.mu2[i];
    const double sg = process == 1 ? t.sigma1[i] : t.sigma2[i];
    ev.true_mu[j] = mu;
    ev.true_sigma[j] = sg;
    ev.true_rl10[j] = return_level(10.0, {mu, sg, xi});
    ev.true_rl100[j] = return_level(100.0, {mu, sg, xi});
  }
  return ev;
}

std::vector<MetricRow> score_fit_dirs(
    const LoadedScenario& sc,
    const std::vector<std::pair<std::string, std::string>>& fits,
    Aggregation agg, std::uint64_t seed, std::vector<std::string>* warnings) {
  std::vector<MetricRow> rows;
  for (const auto& [label, dir] : fits) {
    const LoadedFit lf = load_fit_dir(dir);
    for (int process : {1, 2}) {
      const ProcessData& holdout =
          process == 1 ? sc.data.holdout.z1 : sc.data.holdout.z2;
      const SiteEnsembles ens =
          predict_process(lf.samples, lf.knots1, lf.knots2, lf.model,
                          holdout.locations, process);
      const ProcessEvaluation ev = truth_eval(sc, process);
      const auto part =
          score_process(ens, ev, label, process, agg, seed, warnings);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }
  return rows;
}

void write_paper_table(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  // Columns follow the canonical variant order; rows keep first-seen order.
  const std::vector<std::string> canonical = {"joint_asymmetric",
                                              "joint_symmetric", "independent"};
  std::vector<std::string> variants;
  for (const auto& v : canonical) {
    for (const auto& r : rows) {
      if (r.variant == v) {
        variants.push_back(v);
        break;
      }
    }
  }
  for (const auto& r : rows) {
    if (std::find(variants.begin(), variants.end(), r.variant) ==
        variants.end()) {
      variants.push_back(r.variant);
    }
  }
  std::vector<std::pair<std::string, int>> keys;
  for (const auto& r : rows) {
    const std::pair<std::string, int> k{r.metric, r.process};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  std::string header = "metric,process";
  for (const auto& v : variants) header += ',' + v;
  std::vector<std::string> lines = {header};
  for (const auto& [metric, process] : keys) {
    std::string line = metric + ',' + std::to_string(process);
    for (const auto& v : variants) {
      double value = std::numeric_limits<double>::quiet_NaN();
      for (const auto& r : rows) {
        if (r.metric == metric && r.process == process && r.variant == v) {
          value = r.value;
          break;
        }
      }
      line += ',' + csv::format_double(value);
    }
    lines.push_back(std::move(line));
  }
  csv::write_lines(path, lines);
}

int cmd_score(const ScoreArgs& a) {
  if (a.out.empty()) throw ValidationError("score: --out is required");
  if (a.fits.empty()) throw ValidationError("score: at least one --fit is required");
  Aggregation agg;
  if (a.aggregate == "mean") {
    agg = Aggregation::mean;
  } else if (a.aggregate == "median") {
    agg = Aggregation::median;
  } else {
    throw ValidationError("score: --aggregate must be mean or median");
  }

  std::vector<std::pair<std::string, std::string>> fits;
  for (const auto& spec : a.fits) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos) {
      if (!fs::exists(spec + "/bases.json")) {
        throw IoError("fit directory " + spec + " is missing bases.json");
      }
      const json bases = read_json_file(spec + "/bases.json");
      fits.emplace_back(bases.at("variant").get<std::string>(), spec);
    } else {
      fits.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
    }
  }

  const LoadedScenario sc = load_scenario(a.scenario);
  std::vector<std::string> warnings;
  const std::vector<MetricRow> rows =
      score_fit_dirs(sc, fits, agg, a.seed, &warnings);
  write_metrics_csv(a.out, rows);
  if (!a.paper_table.empty()) write_paper_table(a.paper_table, rows);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  json resolved;
  resolved["command"] = "score";
  resolved["scenario"] = a.scenario;
  json jf = json::array();
  for (const auto& [label, dir] : fits) jf.push_back(label + "=" + dir);
  resolved["fits"] = jf;
  resolved["aggregate"] = a.aggregate;
  resolved["seed"] = a.seed;
  write_json_file(fs::path(a.out).replace_extension("").string() +
                      "_config.json",
                  resolved);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string scenarios;
  std::string seeds = "1";
  std::string variants = "joint_asymmetric,joint_symmetric,independent";
  int n_train = -1;
  int n_holdout = -1;
  int replicates = -1;
  int jobs = 1;
  std::string aggregate = "mean";
  SamplerCli sampler;
  std::string out;
};

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

int effective_jobs(int requested) {
  int jobs = std::max(1, requested);
  if (const char* env = std::getenv("JLSGEV_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) jobs = std::min<long>(jobs, cap);
  }
  return jobs;
}

int cmd_sweep(const SweepArgs& a) {
  if (a.out.empty()) throw ValidationError("sweep: --out is required");
  const std::vector<long> ids = parse_int_list(a.scenarios);
  for (long id : ids) {
    if (id < 1 || id > 20) {
      throw ValidationError("sweep: scenario ids must be 1..20");
    }
  }
  const std::vector<long> seeds = parse_int_list(a.seeds);
  const std::vector<std::string> variant_names = split_names(a.variants);
  if (variant_names.empty()) throw ValidationError("sweep: no variants");
  std::vector<ModelVariant> variants;
  for (const auto& v : variant_names) variants.push_back(parse_variant(v));
  const Aggregation agg =
      a.aggregate == "median" ? Aggregation::median : Aggregation::mean;

  struct Job {
    long id, seed;
    std::string dir;
  };
  std::vector<Job> jobs_list;
  for (long id : ids) {
    for (long seed : seeds) {
      char name[64];
      std::snprintf(name, sizeof(name), "scenario_%02ld_seed_%ld", id, seed);
      jobs_list.push_back({id, seed, a.out + "/" + name});
    }
  }
  fs::create_directories(a.out);

  // Each job fills its own slot, so the merged output is order-stable no
  // matter how the pool schedules.
  std::vector<std::vector<std::string>> slot_lines(jobs_list.size());
  std::vector<std::string> slot_errors(jobs_list.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs_list.size()) return;
      const Job& job = jobs_list[k];
      try {
        ScenarioConfig cfg = scenario_preset(static_cast<int>(job.id));
        if (a.n_train > 0) cfg.n_train = a.n_train;
        if (a.n_holdout > 0) cfg.n_holdout = a.n_holdout;
        if (a.replicates > 0) cfg.replicates = a.replicates;
        cfg.seed = static_cast<std::uint64_t>(job.seed);
        cfg.validate();
        fs::create_directories(job.dir);
        const SimulatedData data = generate_scenario(cfg);
        export_scenario(job.dir, cfg, data);
        const LoadedScenario sc = load_scenario(job.dir);

        std::vector<std::pair<std::string, std::string>> fit_dirs;
        for (std::size_t v = 0; v < variants.size(); ++v) {
          FitConfig fc;
          fc.model.variant = variants[v];
          fc.model.spatial_scale =
              sc.spatial_variation == SpatialVariation::location_and_scale;
          fc.sampler = a.sampler.config(static_cast<std::uint64_t>(job.seed));
          fc.levels = a.sampler.levels;
          const FitOutput out = fit(sc.data.train, sc.domain, fc);
          const std::string fdir = job.dir + "/fit_" + variant_names[v];
          write_fit_dir(fdir, out);
          fit_dirs.emplace_back(variant_names[v], fdir);
        }
        std::vector<std::string> warnings;
        const auto rows =
            score_fit_dirs(sc, fit_dirs, agg,
                           static_cast<std::uint64_t>(job.seed), &warnings);
        write_metrics_csv(job.dir + "/metrics.csv", rows);
        write_paper_table(job.dir + "/paper_table.csv", rows);

        const std::string frac = fraction_label(cfg.observed_fraction);
        for (const auto& r : rows) {
          slot_lines[k].push_back(std::to_string(job.id) + ',' +
                                  std::to_string(job.seed) + ',' + frac + ',' +
                                  r.metric + ',' + r.variant + ',' +
                                  std::to_string(r.process) + ',' +
                                  csv::format_double(r.value));
        }
      } catch (const std::exception& e) {
        slot_errors[k] = e.what();
      }
    }
  };

  const int n_workers =
      std::min<std::size_t>(effective_jobs(a.jobs), jobs_list.size());
  std::vector<std::thread> pool;
  for (int t = 1; t < n_workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t k = 0; k < jobs_list.size(); ++k) {
    if (!slot_errors[k].empty()) {
      throw ValidationError("sweep job " + jobs_list[k].dir + " failed: " +
                            slot_errors[k]);
    }
  }

  std::vector<std::string> lines = {
      "scenario,seed,fraction,metric,variant,process,value"};
  for (const auto& s : slot_lines) lines.insert(lines.end(), s.begin(), s.end());
  csv::write_lines(a.out + "/all_metrics.csv", lines);

  // Per-scenario seed averages, Table-1 style at desk scale.
  struct Acc {
    double sum = 0.0;
    int n = 0;
  };
  std::map<std::string, Acc> acc;  // key keeps output order lexicographic
  for (std::size_t k = 0; k < jobs_list.size(); ++k) {
    const std::string frac = fraction_label(
        scenario_preset(static_cast<int>(jobs_list[k].id)).observed_fraction);
    for (const auto& line : slot_lines[k]) {
      const auto f = csv::split(line);
      char key[160];
      std::snprintf(key, sizeof(key), "%02ld,%s,%s,%s,%s",
                    jobs_list[k].id, frac.c_str(), f[4].c_str(), f[5].c_str(),
                    f[3].c_str());
      auto& slot = acc[key];
      slot.sum += csv::parse_double(f[6], "all_metrics row");
      slot.n += 1;
    }
  }
  std::vector<std::string> summary = {
      "scenario,fraction,variant,process,metric,mean_value,n_seeds"};
  for (const auto& [key, slot] : acc) {
    summary.push_back(key + ',' + csv::format_double(slot.sum / slot.n) + ',' +
                      std::to_string(slot.n));
  }
  csv::write_lines(a.out + "/summary.csv", summary);

  json resolved;
  resolved["command"] = "sweep";
  resolved["scenarios"] = a.scenarios;
  resolved["seeds"] = a.seeds;
  resolved["variants"] = a.variants;
  resolved["n_train"] = a.n_train;
  resolved["n_holdout"] = a.n_holdout;
  resolved["replicates"] = a.replicates;
  resolved["jobs"] = a.jobs;
  resolved["aggregate"] = a.aggregate;
  resolved.update(a.sampler.to_json());
  write_json_file(a.out + "/resolved_config.json", resolved);
  std::cout << "wrote " << a.out << "/all_metrics.csv and summary.csv\n";
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Argument wiring
// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Joint spatial GEV inference engine"};
  app.require_subcommand(1);

  SimulateArgs sim;
  ConfigMerge sim_merge;
  auto* c_sim = app.add_subcommand("simulate", "Generate benchmark scenarios");
  c_sim->add_option("--config", sim.config, "JSON config file");
  sim_merge.bind_value(
      c_sim->add_option("--scenario", sim.scenario, "Scenario id 1..20"),
      "scenario", sim.scenario);
  sim_merge.bind_value(c_sim->add_flag("--all", sim.all, "All 20 scenarios"),
                       "all", sim.all);
  sim_merge.bind_value(
      c_sim->add_option("--seeds", sim.seeds, "Seed list, e.g. 1..5 or 1,7"),
      "seeds", sim.seeds);
  sim_merge.bind_value(
      c_sim->add_option("--fraction", sim.fraction,
                        "Override observed fraction (1/10..1/50)"),
      "fraction", sim.fraction);
  sim_merge.bind_value(c_sim->add_option("--n-train", sim.n_train, ""),
                       "n_train", sim.n_train);
  sim_merge.bind_value(c_sim->add_option("--n-holdout", sim.n_holdout, ""),
                       "n_holdout", sim.n_holdout);
  sim_merge.bind_value(c_sim->add_option("--replicates", sim.replicates, ""),
                       "replicates", sim.replicates);
  sim_merge.bind_value(
      c_sim->add_option("--out", sim.out, "Output directory")->required(),
      "out", sim.out);

  FitArgs fit_args;
  ConfigMerge fit_merge;
  auto* c_fit = app.add_subcommand("fit", "Fit a model variant");
  c_fit->add_option("--config", fit_args.config, "JSON config file");
  fit_merge.bind_value(
      c_fit->add_option("--data", fit_args.data, "Scenario directory"),
      "data", fit_args.data);
  fit_merge.bind_value(c_fit->add_option("--ghcnd1", fit_args.ghcnd1,
                                         "Station CSV for process 1"),
                       "ghcnd1", fit_args.ghcnd1);
  fit_merge.bind_value(c_fit->add_option("--ghcnd2", fit_args.ghcnd2,
                                         "Station CSV for process 2"),
                       "ghcnd2", fit_args.ghcnd2);
  fit_merge.bind_value(c_fit->add_option("--element1", fit_args.element1, ""),
                       "element1", fit_args.element1);
  fit_merge.bind_value(c_fit->add_option("--element2", fit_args.element2, ""),
                       "element2", fit_args.element2);
  fit_merge.bind_value(c_fit->add_option("--min-days", fit_args.min_days, ""),
                       "min_days", fit_args.min_days);
  fit_merge.bind_value(
      c_fit->add_option("--variant", fit_args.variant,
                        "joint_asymmetric | joint_symmetric | independent"),
      "variant", fit_args.variant);
  fit_merge.bind_value(
      c_fit->add_option("--spatial-scale", fit_args.spatial, "auto | on | off"),
      "spatial_scale", fit_args.spatial);
  fit_merge.bind_value(c_fit->add_option("--seed", fit_args.seed, ""),
                       "seed", fit_args.seed);
  fit_merge.bind_value(
      c_fit->add_option("--rhat-limit", fit_args.rhat_limit, ""),
      "rhat_limit", fit_args.rhat_limit);
  fit_merge.bind_value(
      c_fit->add_flag("--allow-unconverged", fit_args.allow_unconverged, ""),
      "allow_unconverged", fit_args.allow_unconverged);
  fit_args.sampler.add(c_fit, fit_merge);
  fit_merge.bind_value(
      c_fit->add_option("--out", fit_args.out, "Output directory")->required(),
      "out", fit_args.out);

  PredictArgs pred;
  ConfigMerge pred_merge;
  auto* c_pred = app.add_subcommand("predict", "Posterior surfaces at sites");
  c_pred->add_option("--config", pred.config, "JSON config file");
  pred_merge.bind_value(
      c_pred->add_option("--fit", pred.fit_dir, "Fit directory")->required(),
      "fit", pred.fit_dir);
  pred_merge.bind_value(
      c_pred->add_option("--sites", pred.sites, "CSV of site,x,y")->required(),
      "sites", pred.sites);
  pred_merge.bind_value(c_pred->add_option("--process", pred.process, "1 or 2"),
                        "process", pred.process);
  pred_merge.bind_value(
      c_pred->add_option("--return-levels", pred.return_levels,
                         "Comma list of periods"),
      "return_levels", pred.return_levels);
  pred_merge.bind_value(c_pred->add_option("--seed", pred.seed, ""),
                        "seed", pred.seed);
  pred_merge.bind_value(
      c_pred->add_option("--out", pred.out, "Output CSV")->required(),
      "out", pred.out);

  ScoreArgs score;
  ConfigMerge score_merge;
  auto* c_score = app.add_subcommand("score", "Score fits against a scenario");
  c_score->add_option("--config", score.config, "JSON config file");
  score_merge.bind_value(
      c_score->add_option("--scenario", score.scenario, "Scenario directory")
          ->required(),
      "scenario", score.scenario);
  score_merge.bind_value(
      c_score->add_option("--fit", score.fits,
                          "label=dir or dir (repeatable)"),
      "fits", score.fits);
  score_merge.bind_value(
      c_score->add_option("--aggregate", score.aggregate, "mean | median"),
      "aggregate", score.aggregate);
  score_merge.bind_value(c_score->add_option("--seed", score.seed, ""),
                         "seed", score.seed);
  score_merge.bind_value(
      c_score->add_option("--out", score.out, "Metrics CSV")->required(),
      "out", score.out);
  score_merge.bind_value(
      c_score->add_option("--paper-table", score.paper_table,
                          "Pivoted per-variant table CSV"),
      "paper_table", score.paper_table);

  SweepArgs sweep;
  ConfigMerge sweep_merge;
  auto* c_sweep = app.add_subcommand("sweep", "Simulate+fit+score a grid");
  c_sweep->add_option("--config", sweep.config, "JSON config file");
  sweep_merge.bind_value(
      c_sweep->add_option("--scenarios", sweep.scenarios, "e.g. 17-20 or 1,5")
          ->required(),
      "scenarios", sweep.scenarios);
  sweep_merge.bind_value(c_sweep->add_option("--seeds", sweep.seeds, ""),
                         "seeds", sweep.seeds);
  sweep_merge.bind_value(
      c_sweep->add_option("--variants", sweep.variants, "Comma list"),
      "variants", sweep.variants);
  sweep_merge.bind_value(c_sweep->add_option("--n-train", sweep.n_train, ""),
                         "n_train", sweep.n_train);
  sweep_merge.bind_value(
      c_sweep->add_option("--n-holdout", sweep.n_holdout, ""),
      "n_holdout", sweep.n_holdout);
  sweep_merge.bind_value(
      c_sweep->add_option("--replicates", sweep.replicates, ""),
      "replicates", sweep.replicates);
  sweep_merge.bind_value(
      c_sweep->add_option("--jobs", sweep.jobs, "Worker count"),
      "jobs", sweep.jobs);
  sweep_merge.bind_value(
      c_sweep->add_option("--aggregate", sweep.aggregate, "mean | median"),
      "aggregate", sweep.aggregate);
  sweep.sampler.add(c_sweep, sweep_merge);
  sweep_merge.bind_value(
      c_sweep->add_option("--out", sweep.out, "Output directory")->required(),
      "out", sweep.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (c_sim->parsed()) {
      sim_merge.apply(sim.config);
      return cmd_simulate(sim);
    }
    if (c_fit->parsed()) {
      fit_merge.apply(fit_args.config);
      return cmd_fit(fit_args);
    }
    if (c_pred->parsed()) {
      pred_merge.apply(pred.config);
      return cmd_predict(pred);
    }
    if (c_score->parsed()) {
      score_merge.apply(score.config);
      return cmd_score(score);
    }
    if (c_sweep->parsed()) {
      sweep_merge.apply(sweep.config);
      return cmd_sweep(sweep);
    }
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace jlsgev::cli
