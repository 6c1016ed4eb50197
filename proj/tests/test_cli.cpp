#include "commands.hpp"

#include "mlvine/errors.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mlv;
using namespace mlv::cli;
namespace fs = std::filesystem;

namespace {

Json base_config() {
  return Json::parse(R"cfg({
    "seed": 5, "n_subjects": 60, "periods": 3, "holdout_periods": 1, "monte_carlo_draws": 1000,
    "outcomes": [
      {"name": "a", "marginal": {"family": "poisson", "mean_terms": ["(Intercept)", "x1"],
        "parameters": {"mean:(Intercept)": 0.1, "mean:x1": 0.3}},
       "vine": {"trees": [{"family": "joe180", "tau": 0.3}, {"family": "clayton", "theta": 0.9}]},
       "candidates": ["joe180", "clayton"]},
      {"name": "b", "marginal": {"family": "zip", "mean_terms": ["(Intercept)"], "inflation_terms": ["(Intercept)"],
        "parameters": {"mean:(Intercept)": 0.4, "zero:(Intercept)": -1.0}},
       "vine": {"trees": [{"family": "frank", "theta": 3.0}], "truncation_level": 1}}
    ],
    "cross": {"rho": {"a-b": 0.4}}
  })cfg");
}

std::string config_error(const Json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "mlvine");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Config, ParsesTruthModel) {
  const RunConfig c = parse_config(base_config());
  ASSERT_TRUE(c.has_truth());
  const JointModel m = c.truth();
  EXPECT_EQ(m.n_outcomes(), 2);
  EXPECT_NEAR(m.outcome(0).vine.trees()[0].tau(), 0.3, 1e-9);
  EXPECT_EQ(m.outcome(1).vine.truncation_level(), 1);
  EXPECT_DOUBLE_EQ(m.cross().corr()(0, 1), 0.4);
  EXPECT_EQ(c.fit_options(1).outcomes[0].candidates.size(), 2u);
}

TEST(Config, ErrorsNameTheField) {
  Json j = base_config();
  j["outcomes"][1]["marginal"]["family"] = "poison";
  EXPECT_NE(config_error(j).find("outcomes[1].marginal.family: unknown marginal family 'poison'"), std::string::npos);
  j = base_config();
  j["n_subjects"] = 0;
  EXPECT_NE(config_error(j).find("n_subjects"), std::string::npos);
  j = base_config();
  j["bootstrap_reps"] = 10;
  EXPECT_NE(config_error(j).find("bootstrap_reps"), std::string::npos);
  j = base_config();
  j["colour"] = 1;
  EXPECT_NE(config_error(j).find("colour: unknown field"), std::string::npos);
  j = base_config();
  j["outcomes"][0]["vine"]["trees"][0]["family"] = "joe45";
  EXPECT_NE(config_error(j).find("outcomes[0].vine.trees[0].family"), std::string::npos);
  j = base_config();
  j["outcomes"][0]["marginal"]["parameters"]["mean:x9"] = 1.0;
  EXPECT_NE(config_error(j).find("outcomes[0].marginal.parameters.mean:x9"), std::string::npos);
  j = base_config();
  j["cross"]["rho"]["a-c"] = 0.2;
  EXPECT_NE(config_error(j).find("cross.rho.a-c"), std::string::npos);
  j = base_config();
  j["cross"] = Json::parse(R"({"correlation": [[1, 1.5], [1.5, 1]]})");
  EXPECT_NE(config_error(j).find("cross"), std::string::npos);
  j = base_config();
  j["outcomes"][1]["name"] = "a";
  EXPECT_NE(config_error(j).find("duplicate"), std::string::npos);
}

TEST(Tau, ConvertsBothWays) {
  std::ostringstream a, b;
  cmd_tau("joe180", 18.74, std::nullopt, a);
  EXPECT_EQ(a.str().substr(0, 31), "family,theta,tau\njoe180,18.74,0");
  cmd_tau("gumbel", std::nullopt, 0.5, b);
  EXPECT_EQ(b.str(), "family,theta,tau\ngumbel,2,0.5\n");
  std::ostringstream c;
  EXPECT_THROW(cmd_tau("clayton", std::nullopt, -0.2, c), ConfigError);
  EXPECT_THROW(cmd_tau("clayton", 1.0, 0.2, c), ConfigError);
  EXPECT_THROW(cmd_tau("nope", 1.0, std::nullopt, c), ConfigError);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = fs::temp_directory_path() / "mlvine_cli_codes";
  fs::create_directories(dir);
  EXPECT_EQ(run({"tau", "--family", "frank", "--theta", "1.529"}), 0);
  EXPECT_EQ(run({"tau", "--family", "frank"}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  {
    std::ofstream(dir / "bad.json") << R"({"outcomes": []})";
  }
  EXPECT_EQ(run({"simulate", "--config", (dir / "bad.json").string(), "--out", dir.string()}), 2);
  {
    Json j = base_config();
    std::ofstream(dir / "ok.json") << j.dump();
    std::ofstream(dir / "broken.csv") << "subject_id,outcome_id,period,value,x1\n1,a,1,0.5,0\n";
  }
  EXPECT_EQ(run({"fit", "--config", (dir / "ok.json").string(), "--data", (dir / "broken.csv").string(), "--out",
                 dir.string()}),
            3);
  fs::remove_all(dir);
}

TEST(Cli, SimulateFitValidateRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "mlvine_cli_e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    Json j = base_config();
    j["covariates"] = Json::parse(R"({"names": ["x1", "x2"]})");
    std::ofstream(dir / "cfg.json") << j.dump();
  }
  const std::string cfg = (dir / "cfg.json").string();
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", dir.string()}), 0);
  ASSERT_EQ(run({"fit", "--config", cfg, "--data", (dir / "train.csv").string(), "--out", dir.string()}), 0);
  for (const char* f : {"model.json", "report.json", "parameters.csv", "report.txt"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  ASSERT_EQ(run({"validate", "--config", cfg, "--model", (dir / "model.json").string(), "--train",
                 (dir / "train.csv").string(), "--holdout", (dir / "holdout.csv").string(), "--out", dir.string()}),
            0);
  const Json v = Json::parse(slurp(dir / "validation.json"));
  EXPECT_EQ(v["subjects"], 60);
  EXPECT_TRUE(v["superiority"].contains("qs"));
  // training set as hold-out: wrong period
  EXPECT_EQ(run({"validate", "--config", cfg, "--model", (dir / "model.json").string(), "--train",
                 (dir / "train.csv").string(), "--holdout", (dir / "train.csv").string(), "--out", dir.string()}),
            3);
  const JointModel back = read_model((dir / "model.json").string());
  EXPECT_EQ(back.n_outcomes(), 2);
  EXPECT_EQ(model_to_json(back).dump(), Json::parse(slurp(dir / "model.json")).dump());
  fs::remove_all(dir);
}

TEST(Experiment, SummaryStatistics) {
  Json j = base_config();
  j["replications"] = 3;
  j["n_subjects"] = 80;
  const RunConfig c = parse_config(j);
  const ExperimentResult r = run_experiment(c, 11, 2);
  EXPECT_EQ(r.failures, 0);
  ASSERT_FALSE(r.rows.empty());
  EXPECT_EQ(r.rows[0].name, "zeta:a:1");
  std::vector<double> est;
  for (const auto& rep : r.estimates)
    for (const auto& p : rep)
      if (p.name == "zeta:a:1") est.push_back(p.estimate);
  ASSERT_EQ(est.size(), 3u);
  EXPECT_NEAR(r.rows[0].mean, mean(est), 1e-12);
  EXPECT_NEAR(r.rows[0].sd, sample_sd(est), 1e-12);
  EXPECT_TRUE(std::isnan(r.rows[0].cover90));
  const ExperimentResult again = run_experiment(c, 11, 1);
  EXPECT_EQ(experiment_csv(r), experiment_csv(again));
  EXPECT_EQ(experiment_csv(r).substr(0, 9), "parameter");
}
