#include "commands.hpp"

#include "mlvine/errors.hpp"
#include "mlvine/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mlv::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZ90 = 1.6448536269514722, kZ95 = 1.959963984540054, kZ99 = 2.5758293035489004;

std::string num(double x) { return std::isfinite(x) ? format_real(x) : "NA"; }

Json jnum(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

std::string fixed(double x, int digits = 4) {
  if (!std::isfinite(x)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::uint64_t require_seed(const RunConfig& cfg, const CommonOptions& opt, const char* cmd) {
  if (opt.seed) return *opt.seed;
  if (cfg.seed) return *cfg.seed;
  throw ConfigError(std::string("seed: required for ") + cmd + " (config field or --seed)");
}

int threads_of(const RunConfig& cfg, const CommonOptions& opt) { return std::max(1, opt.threads.value_or(cfg.threads)); }

std::string out_path(const CommonOptions& opt, const std::string& name) {
  fs::create_directories(opt.out);
  return (fs::path(opt.out) / name).string();
}

std::string csv_text(const PanelDataset& d) {
  std::ostringstream s;
  write_panel_csv(s, d);
  return s.str();
}

std::vector<Scale> data_scales(const PanelDataset& data, const JointModel& m) {
  std::vector<Scale> out;
  for (const auto& name : data.outcomes()) {
    const auto it = std::find_if(m.outcomes().begin(), m.outcomes().end(),
                                 [&](const OutcomeModel& o) { return o.name == name; });
    if (it == m.outcomes().end()) throw DataError("outcome '" + name + "' is not part of the model");
    out.push_back(it->marginal->scale());
  }
  return out;
}

std::vector<Scale> config_scales(const PanelDataset& data, const RunConfig& cfg) {
  std::vector<Scale> out;
  for (const auto& name : data.outcomes()) {
    const auto it = std::find_if(cfg.outcomes.begin(), cfg.outcomes.end(),
                                 [&](const OutcomeConfig& o) { return o.spec.name == name; });
    if (it == cfg.outcomes.end()) throw DataError("outcome '" + name + "' is not named in the config");
    out.push_back(scale_of_family(it->spec.marginal.family));
  }
  return out;
}

std::string report_text(const StagewiseFit& fit) {
  std::ostringstream s;
  const auto& rep = fit.report;
  s << "Stage 1: marginal regressions\n";
  std::size_t pos = 0;
  for (std::size_t j = 0; j < rep.marginals.size(); ++j) {
    const auto& mf = rep.marginals[j];
    s << "\n" << fit.model.outcome(static_cast<int>(j)).name << " (" << mf.model->family() << ")  loglik "
      << fixed(mf.loglik, 3) << "  AIC " << fixed(mf.aic, 3) << (mf.converged ? "" : "  [not converged]")
      << (mf.boundary ? "  [inflation at bound]" : "") << "\n";
    s << "  " << pad("parameter", 28) << pad("estimate", 14) << pad("hessian_se", 14) << "bootstrap_se\n";
    for (const auto& name : mf.model->parameter_names()) {
      const auto& row = rep.parameters[pos++];
      s << "  " << pad(name, 28) << pad(fixed(row.estimate), 14) << pad(fixed(row.hessian_se), 14) << fixed(row.se)
        << "\n";
    }
  }
  s << "\nStage 2: D-vine copulas by tree\n";
  s << "  " << pad("outcome", 12) << pad("tree", 6) << pad("family", 14) << pad("theta", 12) << pad("tau", 10)
    << pad("se", 12) << "AIC\n";
  for (std::size_t j = 0; j < rep.vines.size(); ++j) {
    const auto& name = fit.model.outcome(static_cast<int>(j)).name;
    const auto& vf = rep.vines[j];
    for (std::size_t t = 0; t < vf.trees.size(); ++t) {
      const auto& tf = vf.trees[t];
      double se = kNaN;
      const std::string key = "zeta:" + name + ":" + std::to_string(t + 1);
      for (const auto& p : rep.parameters)
        if (p.name == key) se = p.se;
      s << "  " << pad(name, 12) << pad(std::to_string(t + 1), 6) << pad(tf.copula.name(), 14)
        << pad(fixed(tf.copula.theta()), 12) << pad(fixed(tf.copula.tau()), 10) << pad(fixed(se), 12)
        << fixed(tf.aic, 3) << "\n";
    }
    s << "  " << name << ": truncation level " << vf.model.truncation_level() << "\n";
  }
  s << "\nStage 3: cross-outcome correlation\n";
  const auto& r = rep.cross.copula.corr().matrix();
  s << pad("", 12);
  for (const auto& o : fit.model.outcomes()) s << pad(o.name, 12);
  s << "\n";
  for (int a = 0; a < fit.model.n_outcomes(); ++a) {
    s << pad(fit.model.outcome(a).name, 12);
    for (int b = 0; b < fit.model.n_outcomes(); ++b) s << pad(fixed(r(a, b), 3), 12);
    s << "\n";
  }
  if (rep.cross.projected) s << "(pairwise estimates projected to a positive definite matrix)\n";
  s << "\nlog-likelihood " << fixed(rep.loglik, 3) << "\n";
  if (rep.bootstrap_successes > 0)
    s << "bootstrap replicates: " << rep.bootstrap_successes << " succeeded, " << rep.bootstrap_failures << " failed\n";
  if (rep.floored > 0) s << "floored probability cells: " << rep.floored << "\n";
  return s.str();
}

std::string parameters_csv(const FitReport& rep) {
  std::ostringstream s;
  s << "parameter,estimate,se,hessian_se\n";
  for (const auto& p : rep.parameters)
    s << p.name << ',' << num(p.estimate) << ',' << num(p.se) << ',' << num(p.hessian_se) << '\n';
  return s.str();
}

Json comparison_json(const Comparison& c) {
  return {{"n", c.n}, {"wins", c.wins}, {"ties", c.ties}, {"fraction", jnum(c.fraction)}, {"p_value", jnum(c.p_value)}};
}

}  // namespace

void write_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << text;
    if (!out) throw DataError("write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

ExperimentResult run_experiment(const RunConfig& cfg, std::uint64_t seed, int threads, std::ostream* log) {
  const JointModel truth = cfg.truth();
  std::vector<NamedValue> truth_values = dependence_parameters(truth);
  for (auto& m : marginal_parameters(truth)) truth_values.push_back(std::move(m));
  const auto gen = cfg.generator();

  ExperimentResult res;
  res.replications = cfg.replications;
  res.estimates.resize(static_cast<std::size_t>(cfg.replications));
  std::vector<std::string> errors(static_cast<std::size_t>(cfg.replications));
  parallel_for(static_cast<std::size_t>(cfg.replications), threads, [&](std::size_t r) {
    try {
      const std::uint64_t data_seed = RngStream(seed, {7, r}).next();
      const std::uint64_t boot_seed = RngStream(seed, {8, r}).next();
      const PanelDataset data =
          simulate_dataset(truth, cfg.n_subjects, cfg.periods, cfg.covariates, gen, data_seed, 1);
      FitOptions fo = cfg.fit_options(boot_seed);
      fo.threads = 1;
      res.estimates[r] = fit_stagewise(fo, data).report.parameters;
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  });
  for (std::size_t r = 0; r < errors.size(); ++r) {
    if (errors[r].empty()) continue;
    ++res.failures;
    if (log) *log << "replication " << r + 1 << " failed: " << errors[r] << "\n";
  }

  for (const auto& tv : truth_values) {
    ParameterSummary row;
    row.name = tv.name;
    row.truth = tv.value;
    std::vector<double> est;
    int covered[3] = {0, 0, 0}, with_se = 0;
    for (const auto& rep : res.estimates)
      for (const auto& p : rep) {
        if (p.name != tv.name) continue;
        est.push_back(p.estimate);
        if (std::isfinite(p.se)) {
          ++with_se;
          const double err = std::abs(p.estimate - tv.value);
          covered[0] += err <= kZ90 * p.se;
          covered[1] += err <= kZ95 * p.se;
          covered[2] += err <= kZ99 * p.se;
        }
      }
    row.n = static_cast<int>(est.size());
    row.mean = est.empty() ? kNaN : mean(est);
    row.bias = row.mean - tv.value;
    row.sd = est.size() > 1 ? sample_sd(est) : kNaN;
    row.mc_se = est.size() > 1 ? row.sd / std::sqrt(static_cast<double>(est.size())) : kNaN;
    row.cover90 = with_se ? static_cast<double>(covered[0]) / with_se : kNaN;
    row.cover95 = with_se ? static_cast<double>(covered[1]) / with_se : kNaN;
    row.cover99 = with_se ? static_cast<double>(covered[2]) / with_se : kNaN;
    res.rows.push_back(row);
  }
  return res;
}

std::string experiment_csv(const ExperimentResult& r) {
  std::ostringstream s;
  if (r.replications == 1) {
    s << "parameter,true,estimate,bias,se\n";
    for (const auto& row : r.rows) {
      double se = kNaN;
      for (const auto& p : r.estimates.front())
        if (p.name == row.name) se = p.se;
      s << row.name << ',' << num(row.truth) << ',' << num(row.mean) << ',' << num(row.bias) << ',' << num(se) << '\n';
    }
    return s.str();
  }
  s << "parameter,true,n,mean,bias,sd,mc_se,cover90,cover95,cover99\n";
  for (const auto& row : r.rows)
    s << row.name << ',' << num(row.truth) << ',' << row.n << ',' << num(row.mean) << ',' << num(row.bias) << ','
      << num(row.sd) << ',' << num(row.mc_se) << ',' << num(row.cover90) << ',' << num(row.cover95) << ','
      << num(row.cover99) << '\n';
  return s.str();
}

std::string experiment_json(const ExperimentResult& r) {
  Json j;
  j["replications"] = r.replications;
  j["failures"] = r.failures;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json e;
    e["parameter"] = row.name;
    e["true"] = jnum(row.truth);
    e["n"] = row.n;
    e["mean"] = jnum(row.mean);
    e["bias"] = jnum(row.bias);
    if (r.replications > 1) {
      e["sd"] = jnum(row.sd);
      e["mc_se"] = jnum(row.mc_se);
      e["coverage"] = {{"90", jnum(row.cover90)}, {"95", jnum(row.cover95)}, {"99", jnum(row.cover99)}};
    }
    rows.push_back(std::move(e));
  }
  j["parameters"] = std::move(rows);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

ValidationReport run_validation(const JointModel& m, const PanelDataset& train, const PanelDataset& holdout, int B,
                                std::uint64_t seed, int threads) {
  if (holdout.n_subjects() == 0) throw DataError("validation: empty hold-out");
  if (holdout.first_period() != train.first_period() + train.n_periods())
    throw DataError("validation: hold-out period " + std::to_string(holdout.first_period()) +
                    " does not follow the training periods");
  if (holdout.n_subjects() != train.n_subjects()) throw DataError("validation: hold-out and training subjects differ");
  for (const auto& s : holdout.subjects()) train.subject_index(s);

  ValidationReport rep;
  rep.copula = validate_model(m, train, holdout, B, seed, 0, threads);
  rep.independence = validate_model(m.independence(), train, holdout, B, seed, 1, threads);
  auto scores = [](const ValidationResult& v, double SubjectScore::*f) {
    std::vector<double> out;
    for (const auto& s : v.scores) out.push_back(s.*f);
    return out;
  };
  rep.rps = compare_models(scores(rep.copula, &SubjectScore::rps), scores(rep.independence, &SubjectScore::rps));
  if (!rep.copula.scores.empty() && std::isfinite(rep.copula.scores.front().qs)) {
    rep.qs = compare_models(scores(rep.copula, &SubjectScore::qs), scores(rep.independence, &SubjectScore::qs));
    rep.sphs = compare_models(scores(rep.copula, &SubjectScore::sphs), scores(rep.independence, &SubjectScore::sphs));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg, const CommonOptions& opt) {
  const std::uint64_t seed = require_seed(cfg, opt, "simulate");
  const JointModel truth = cfg.truth();
  const PanelDataset all = simulate_dataset(truth, cfg.n_subjects, cfg.periods + cfg.holdout_periods, cfg.covariates,
                                            cfg.generator(), seed, threads_of(cfg, opt));
  write_atomic(out_path(opt, "train.csv"), csv_text(all.slice_periods(0, cfg.periods)));
  if (cfg.holdout_periods > 0)
    write_atomic(out_path(opt, "holdout.csv"), csv_text(all.slice_periods(cfg.periods, cfg.holdout_periods)));
  return 0;
}

int cmd_experiment(const RunConfig& cfg, const CommonOptions& opt) {
  const std::uint64_t seed = require_seed(cfg, opt, "experiment");
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult r = run_experiment(cfg, seed, threads_of(cfg, opt), &std::cerr);
  write_atomic(out_path(opt, "experiment.csv"), experiment_csv(r));
  write_atomic(out_path(opt, "experiment.json"), experiment_json(r));
  std::ostringstream reps;
  reps << "replication,parameter,estimate,se\n";
  for (std::size_t k = 0; k < r.estimates.size(); ++k)
    for (const auto& p : r.estimates[k]) reps << k + 1 << ',' << p.name << ',' << num(p.estimate) << ',' << num(p.se) << '\n';
  write_atomic(out_path(opt, "replications.csv"), reps.str());
  std::cerr << "experiment: " << r.replications - r.failures << " of " << r.replications << " replications in "
            << fixed(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1) << " s\n";
  if (r.failures > cfg.max_failure_rate * r.replications) {
    std::cerr << "experiment: failure rate above " << cfg.max_failure_rate << "\n";
    return 4;
  }
  return 0;
}

int cmd_fit(const RunConfig& cfg, const std::string& data_path, const CommonOptions& opt) {
  const PanelDataset data = read_panel_csv(data_path);
  validate_scales(data, config_scales(data, cfg));
  FitOptions fo = cfg.fit_options(opt.seed.value_or(cfg.seed.value_or(1)));
  fo.threads = threads_of(cfg, opt);
  const StagewiseFit fit = fit_stagewise(fo, data);
  write_atomic(out_path(opt, "model.json"), model_to_json(fit.model).dump(2) + "\n");
  write_atomic(out_path(opt, "report.json"), report_to_json(fit).dump(2) + "\n");
  write_atomic(out_path(opt, "parameters.csv"), parameters_csv(fit.report));
  write_atomic(out_path(opt, "report.txt"), report_text(fit));
  const auto& sec = fit.report.seconds;
  std::cerr << "fit: stage 1 " << fixed(sec[0], 2) << " s, stage 2 " << fixed(sec[1], 2) << " s, stage 3 "
            << fixed(sec[2], 2) << " s, bootstrap " << fixed(sec[3], 2) << " s\n";
  if (!fit.report.converged) std::cerr << "fit: warning: not all stages converged\n";
  return 0;
}

int cmd_validate(const RunConfig& cfg, const std::string& model_path, const std::string& train_path,
                 const std::string& holdout_path, const CommonOptions& opt) {
  const JointModel m = read_model(model_path);
  const PanelDataset train = read_panel_csv(train_path);
  const PanelDataset holdout = read_panel_csv(holdout_path);
  validate_scales(train, data_scales(train, m));
  validate_scales(holdout, data_scales(holdout, m));
  const std::uint64_t seed = opt.seed.value_or(cfg.seed.value_or(1));
  const ValidationReport rep = run_validation(m, train, holdout, cfg.monte_carlo_draws, seed, threads_of(cfg, opt));

  Json j;
  j["subjects"] = holdout.n_subjects();
  j["draws"] = cfg.monte_carlo_draws;
  j["ks"] = {{"copula", {{"statistic", jnum(rep.copula.ks.statistic)}, {"p_value", jnum(rep.copula.ks.p_value)}}},
             {"independence",
              {{"statistic", jnum(rep.independence.ks.statistic)}, {"p_value", jnum(rep.independence.ks.p_value)}}}};
  Json sup;
  sup["rps"] = comparison_json(rep.rps);
  if (rep.qs) sup["qs"] = comparison_json(*rep.qs);
  if (rep.sphs) sup["sphs"] = comparison_json(*rep.sphs);
  j["superiority"] = std::move(sup);
  write_atomic(out_path(opt, "validation.json"), j.dump(2) + "\n");

  std::ostringstream scores, u;
  scores << "subject,model,rule,score\n";
  u << "subject,observed,u_copula,u_independence,rps_copula,rps_independence,rps_difference\n";
  const bool discrete = rep.qs.has_value();
  for (std::size_t k = 0; k < rep.copula.scores.size(); ++k) {
    const auto& c = rep.copula.scores[k];
    const auto& i = rep.independence.scores[k];
    for (const auto* s : {&c, &i}) {
      const char* model = s == &c ? "copula" : "independence";
      scores << s->subject << ',' << model << ",rps," << num(s->rps) << '\n';
      if (discrete) {
        scores << s->subject << ',' << model << ",qs," << num(s->qs) << '\n';
        scores << s->subject << ',' << model << ",sphs," << num(s->sphs) << '\n';
      }
    }
    u << c.subject << ',' << num(c.observed) << ',' << num(c.u) << ',' << num(i.u) << ',' << num(c.rps) << ','
      << num(i.rps) << ',' << num(c.rps - i.rps) << '\n';
  }
  write_atomic(out_path(opt, "scores.csv"), scores.str());
  write_atomic(out_path(opt, "u_values.csv"), u.str());

  std::ostringstream txt;
  txt << "Kolmogorov-Smirnov test of the generalized transform\n";
  txt << "  " << pad("model", 16) << pad("statistic", 12) << "p-value\n";
  txt << "  " << pad("independence", 16) << pad(fixed(rep.independence.ks.statistic), 12)
      << fixed(rep.independence.ks.p_value) << "\n";
  txt << "  " << pad("copula", 16) << pad(fixed(rep.copula.ks.statistic), 12) << fixed(rep.copula.ks.p_value) << "\n";
  txt << "\nShare of subjects where the copula model scores better\n";
  txt << "  " << pad("rule", 8) << pad("share", 12) << "binomial p\n";
  auto line = [&](const char* name, const Comparison& c) {
    txt << "  " << pad(name, 8) << pad(fixed(100.0 * c.fraction, 2) + "%", 12) << fixed(c.p_value) << "\n";
  };
  line("RPS", rep.rps);
  if (rep.qs) line("QS", *rep.qs);
  if (rep.sphs) line("SPHS", *rep.sphs);
  write_atomic(out_path(opt, "validation.txt"), txt.str());
  return 0;
}

int cmd_tau(const std::string& family, std::optional<double> theta, std::optional<double> tau, std::ostream& out) {
  CopulaFamily fam;
  try {
    fam = CopulaFamily::parse(family);
  } catch (const std::exception&) {
    throw ConfigError("family: unknown copula family '" + family + "'");
  }
  if (theta.has_value() == tau.has_value()) throw ConfigError("tau: give exactly one of --theta and --tau");
  double th = 0.0, t = 0.0;
  try {
    if (theta) {
      th = *theta;
      t = BivariateCopula::tau(fam, th);
    } else {
      t = *tau;
      th = BivariateCopula::theta_from_tau(fam, t);
    }
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string(theta ? "theta" : "tau") + ": " + e.what());
  }
  out << "family,theta,tau\n" << fam.name() << ',' << format_real(th) << ',' << format_real(t) << '\n';
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Pair-copula models for multivariate longitudinal outcomes"};
  app.require_subcommand(1);
  std::string config_path;
  CommonOptions opt;
  std::uint64_t seed = 0;
  int threads = 0;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    if (needs_config) c->required();
    sub->add_option("--seed", seed, "root random seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out, "output directory");
  };
  auto* sim = app.add_subcommand("simulate", "simulate training and hold-out panels");
  add_common(sim, true);
  auto* exp = app.add_subcommand("experiment", "replicated simulate-and-fit study");
  add_common(exp, true);
  auto* fit = app.add_subcommand("fit", "stage-wise estimation on a panel CSV");
  add_common(fit, true);
  std::string data_path, model_path, train_path, holdout_path;
  fit->add_option("--data", data_path, "panel CSV")->required()->check(CLI::ExistingFile);
  auto* val = app.add_subcommand("validate", "out-of-sample validation of a fitted model");
  add_common(val, false);
  val->add_option("--model", model_path, "model JSON from fit")->required()->check(CLI::ExistingFile);
  val->add_option("--train", train_path, "training panel CSV")->required()->check(CLI::ExistingFile);
  val->add_option("--holdout", holdout_path, "hold-out panel CSV")->required()->check(CLI::ExistingFile);
  auto* tau = app.add_subcommand("tau", "convert between copula parameter and Kendall's tau");
  add_common(tau, false);
  std::string family;
  std::optional<double> theta_opt, tau_opt;
  tau->add_option("--family", family, "copula family, e.g. joe180")->required();
  tau->add_option("--theta", theta_opt, "copula parameter");
  tau->add_option("--tau", tau_opt, "Kendall's tau");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (auto* sub : {sim, exp, fit, val, tau}) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--threads")) opt.threads = threads;
  }

  try {
    if (tau->parsed()) return cmd_tau(family, theta_opt, tau_opt, std::cout);
    RunConfig cfg;
    if (!config_path.empty()) cfg = read_config(config_path);
    else cfg.monte_carlo_draws = 10000;
    if (sim->parsed()) return cmd_simulate(cfg, opt);
    if (exp->parsed()) return cmd_experiment(cfg, opt);
    if (fit->parsed()) return cmd_fit(cfg, data_path, opt);
    if (val->parsed()) return cmd_validate(cfg, model_path, train_path, holdout_path, opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mlv::cli
