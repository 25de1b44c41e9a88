#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(JLSGEV_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    ADD_FAILURE() << "popen failed for: " << cmd;
    return {};
  }
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) {
    out.append(buf, n);
  }
  const int status = pclose(pipe);
  CliResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.output = std::move(out);
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  EXPECT_TRUE(in.good()) << p;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fresh_dir(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

TEST(Cli, HelpExitsZero) {
  const CliResult r = run_cli("--help");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.output.find("simulate"), std::string::npos);
  EXPECT_NE(r.output.find("sweep"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli("simulate --no-such-flag").exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
  EXPECT_EQ(run_cli("predict --process 3 --fit x --sites y --out z").exit_code,
            2);
}

TEST(Cli, InvalidFractionNamesTheAllowedSet) {
  const std::string out = fresh_dir("cli_badfrac");
  const CliResult r = run_cli("simulate --scenario 1 --fraction 1/7 --out " +
                              out);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("1/10"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("1/35"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("1/50"), std::string::npos) << r.output;
}

TEST(Cli, MissingInputsExitFour) {
  EXPECT_EQ(run_cli("fit --data /nonexistent_dir_xyz --out " +
                    fresh_dir("cli_fit4"))
                .exit_code,
            4);
  EXPECT_EQ(run_cli("predict --fit /nonexistent_dir_xyz --sites s --out o")
                .exit_code,
            4);
  EXPECT_EQ(run_cli("score --scenario /nonexistent_dir_xyz --fit x --out o")
                .exit_code,
            4);
}

TEST(Cli, SimulateWritesPresetMetadataDeterministically) {
  const std::string out_a = fresh_dir("cli_sim_a");
  const std::string out_b = fresh_dir("cli_sim_b");
  const std::string flags =
      " --scenario 20 --seeds 3 --n-train 25 --n-holdout 10 --replicates 4"
      " --out ";
  ASSERT_EQ(run_cli("simulate" + flags + out_a).exit_code, 0);
  ASSERT_EQ(run_cli("simulate" + flags + out_b).exit_code, 0);

  const fs::path dir_a = fs::path(out_a) / "scenario_20_seed_3";
  ASSERT_TRUE(fs::exists(dir_a / "scenario.json"));
  const std::string meta = slurp(dir_a / "scenario.json");
  EXPECT_NE(meta.find("asymmetric"), std::string::npos);
  EXPECT_NE(meta.find("location_and_scale"), std::string::npos);
  EXPECT_NE(meta.find("0.02"), std::string::npos);  // 1/50

  const fs::path dir_b = fs::path(out_b) / "scenario_20_seed_3";
  for (const char* f : {"train_z1.csv", "train_z2.csv", "holdout_z1.csv",
                        "holdout_z2.csv", "truth.csv", "scenario.json"}) {
    EXPECT_EQ(slurp(dir_a / f), slurp(dir_b / f)) << f;
  }
}

TEST(Cli, FitPredictScorePipeline) {
  const std::string sim = fresh_dir("cli_pipe_sim");
  ASSERT_EQ(run_cli("simulate --scenario 4 --seeds 1 --n-train 20"
                    " --n-holdout 8 --replicates 5 --out " +
                    sim)
                .exit_code,
            0);
  const std::string scenario = sim + "/scenario_04_seed_1";
  const std::string sampler =
      " --iters 400 --burnin 200 --thin 2 --chains 2 --levels 1"
      " --variant independent --spatial-scale off --seed 5 --data " +
      scenario;

  // An unreachable R-hat limit trips the convergence gate, but the fit
  // artifacts are still written for inspection.
  const std::string gated = fresh_dir("cli_pipe_gated");
  const CliResult g = run_cli("fit" + sampler + " --rhat-limit 0.5 --out " +
                              gated);
  EXPECT_EQ(g.exit_code, 3) << g.output;
  for (const char* f : {"draws.csv", "bases.json", "diagnostics.json",
                        "resolved_config.json"}) {
    EXPECT_TRUE(fs::exists(fs::path(gated) / f)) << f;
  }

  const std::string fit_a = fresh_dir("cli_pipe_fit_a");
  const std::string fit_b = fresh_dir("cli_pipe_fit_b");
  ASSERT_EQ(run_cli("fit" + sampler + " --allow-unconverged --out " + fit_a)
                .exit_code,
            0);
  ASSERT_EQ(run_cli("fit" + sampler + " --allow-unconverged --out " + fit_b)
                .exit_code,
            0);
  EXPECT_EQ(slurp(fit_a + "/draws.csv"), slurp(fit_b + "/draws.csv"));
  EXPECT_EQ(slurp(fit_a + "/draws.csv"), slurp(gated + "/draws.csv"));

  // Predict at hand-picked sites.
  const std::string sites = fresh_dir("cli_pipe_misc") + "/sites.csv";
  {
    std::ofstream out(sites);
    out << "site,x,y\np1,1.0,1.0\np2,4.0,3.5\n";
  }
  const std::string pred = fresh_dir("cli_pipe_pred") + "/surfaces.csv";
  ASSERT_EQ(run_cli("predict --fit " + fit_a + " --sites " + sites +
                    " --process 1 --return-levels 10,100 --out " + pred)
                .exit_code,
            0);
  const std::string pred_body = slurp(pred);
  EXPECT_EQ(pred_body.rfind("site,x,y,covered,mu_mean,mu_median,mu_q025", 0),
            0u)
      << pred_body.substr(0, 120);
  EXPECT_NE(pred_body.find("rl10_mean"), std::string::npos);
  EXPECT_NE(pred_body.find("rl100_q975"), std::string::npos);
  EXPECT_NE(pred_body.find("\np1,"), std::string::npos);
  EXPECT_TRUE(fs::exists(fs::path(pred).parent_path() / "surfaces_config.json"));

  // Score against the scenario truth and holdout.
  const std::string score_dir = fresh_dir("cli_pipe_score");
  const std::string metrics = score_dir + "/metrics.csv";
  const std::string table = score_dir + "/paper_table.csv";
  const CliResult s = run_cli("score --scenario " + scenario + " --fit " +
                              fit_a + " --out " + metrics + " --paper-table " +
                              table);
  ASSERT_EQ(s.exit_code, 0) << s.output;
  const std::string mbody = slurp(metrics);
  EXPECT_EQ(mbody.rfind("metric,variant,process,value", 0), 0u);
  EXPECT_NE(mbody.find("rmse_rl10,independent,1,"), std::string::npos);
  EXPECT_NE(mbody.find("crps,independent,2,"), std::string::npos);
  const std::string tbody = slurp(table);
  EXPECT_EQ(tbody.rfind("metric,process,independent", 0), 0u);

  // Scoring the same fit twice is byte-stable.
  const std::string metrics2 = score_dir + "/metrics2.csv";
  ASSERT_EQ(run_cli("score --scenario " + scenario + " --fit " + fit_a +
                    " --out " + metrics2)
                .exit_code,
            0);
  EXPECT_EQ(slurp(metrics2), mbody);
}

TEST(Cli, SweepProducesMergedTables) {
  const std::string out = fresh_dir("cli_sweep");
  const CliResult r = run_cli(
      "sweep --scenarios 1 --seeds 1,2 --variants independent"
      " --n-train 15 --n-holdout 6 --replicates 4 --jobs 1"
      " --iters 200 --burnin 100 --thin 2 --chains 1 --levels 1 --out " +
      out);
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const std::string all = slurp(fs::path(out) / "all_metrics.csv");
  EXPECT_EQ(all.rfind("scenario,seed,fraction,metric,variant,process,value", 0),
            0u);
  EXPECT_NE(all.find("\n1,1,1/10,"), std::string::npos);
  EXPECT_NE(all.find("\n1,2,1/10,"), std::string::npos);
  const std::string summary = slurp(fs::path(out) / "summary.csv");
  EXPECT_EQ(summary.rfind(
                "scenario,fraction,variant,process,metric,mean_value,n_seeds",
                0),
            0u);
  EXPECT_NE(summary.find(",2"), std::string::npos);  // both seeds aggregated
  EXPECT_TRUE(fs::exists(fs::path(out) / "resolved_config.json"));
}

}  // namespace
