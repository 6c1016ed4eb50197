#include "config.hpp"

#include "mlvine/errors.hpp"

#include <fstream>
#include <set>

namespace mlv::cli {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void allow_keys(const Json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) fail(join(path, k), "unknown field");
}

long long get_int(const Json& j, const std::string& path, const char* key, long long def, long long min) {
  if (!j.contains(key)) return def;
  const Json& v = j.at(key);
  if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
  const long long x = v.get<long long>();
  if (x < min) fail(join(path, key), "must be >= " + std::to_string(min));
  return x;
}

double get_real(const Json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

std::string get_string(const Json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<std::string> get_strings(const Json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_string(v[i], index(path, i)));
  return out;
}

CopulaFamily get_family(const Json& v, const std::string& path) {
  const std::string s = get_string(v, path);
  try {
    return CopulaFamily::parse(s);
  } catch (const std::exception&) {
    fail(path, "unknown copula family '" + s + "'");
  }
}

OutcomeConfig parse_outcome(const Json& j, const std::string& path) {
  allow_keys(j, path, {"name", "marginal", "vine", "candidates"});
  OutcomeConfig o;
  if (!j.contains("name")) fail(join(path, "name"), "missing");
  o.spec.name = get_string(j.at("name"), join(path, "name"));
  if (o.spec.name.empty()) fail(join(path, "name"), "must not be empty");

  const std::string mp = join(path, "marginal");
  if (!j.contains("marginal")) fail(mp, "missing");
  const Json& m = j.at("marginal");
  allow_keys(m, mp, {"family", "mean_terms", "inflation_terms", "parameters"});
  if (!m.contains("family")) fail(join(mp, "family"), "missing");
  o.spec.marginal.family = get_string(m.at("family"), join(mp, "family"));
  try {
    scale_of_family(o.spec.marginal.family);
  } catch (const std::exception&) {
    fail(join(mp, "family"), "unknown marginal family '" + o.spec.marginal.family + "'");
  }
  if (m.contains("mean_terms")) o.spec.marginal.mean_terms = get_strings(m.at("mean_terms"), join(mp, "mean_terms"));
  if (m.contains("inflation_terms"))
    o.spec.marginal.inflation_terms = get_strings(m.at("inflation_terms"), join(mp, "inflation_terms"));
  std::unique_ptr<Marginal> proto;
  try {
    proto = make_marginal(o.spec.marginal);
  } catch (const std::exception& e) {
    fail(mp, e.what());
  }
  if (m.contains("parameters")) {
    const std::string pp = join(mp, "parameters");
    const Json& p = m.at("parameters");
    if (!p.is_object()) fail(pp, "expected an object of name: value");
    const auto names = proto->parameter_names();
    for (const auto& [k, v] : p.items())
      if (std::find(names.begin(), names.end(), k) == names.end()) fail(join(pp, k), "not a parameter of this family");
    for (const auto& n : names) {
      if (!p.contains(n)) fail(join(pp, n), "missing");
      o.true_parameters.push_back({n, get_real(p.at(n), join(pp, n))});
    }
  }

  if (j.contains("vine")) {
    const std::string vp = join(path, "vine");
    const Json& v = j.at("vine");
    allow_keys(v, vp, {"trees", "truncation_level"});
    if (!v.contains("trees") || !v.at("trees").is_array()) fail(join(vp, "trees"), "expected an array");
    const Json& trees = v.at("trees");
    for (std::size_t k = 0; k < trees.size(); ++k) {
      const std::string tp = index(join(vp, "trees"), k);
      allow_keys(trees[k], tp, {"family", "theta", "tau"});
      if (!trees[k].contains("family")) fail(join(tp, "family"), "missing");
      const CopulaFamily fam = get_family(trees[k].at("family"), join(tp, "family"));
      double theta = 0.0;
      if (!fam.is_independence()) {
        try {
          if (trees[k].contains("theta")) {
            theta = get_real(trees[k].at("theta"), join(tp, "theta"));
            BivariateCopula(fam, theta);
          } else if (trees[k].contains("tau")) {
            theta = BivariateCopula::theta_from_tau(fam, get_real(trees[k].at("tau"), join(tp, "tau")));
          } else {
            fail(tp, "needs theta or tau");
          }
        } catch (const std::domain_error& e) {
          fail(tp, e.what());
        }
      }
      o.true_trees.emplace_back(fam.name(), theta);
    }
    o.true_truncation =
        static_cast<int>(get_int(v, vp, "truncation_level", static_cast<long long>(trees.size()), 0));
    if (o.true_truncation > static_cast<int>(trees.size())) fail(join(vp, "truncation_level"), "exceeds tree count");
  }

  if (j.contains("candidates")) {
    const std::string cp = join(path, "candidates");
    const Json& c = j.at("candidates");
    if (!c.is_array() || c.empty()) fail(cp, "expected a non-empty array");
    o.spec.candidates.clear();
    for (std::size_t k = 0; k < c.size(); ++k) o.spec.candidates.push_back(get_family(c[k], index(cp, k)));
  }
  return o;
}

}  // namespace

RunConfig parse_config(const Json& j) {
  allow_keys(j, "", {"seed", "n_subjects", "periods", "holdout_periods", "replications", "bootstrap_reps",
                     "monte_carlo_draws", "threads", "max_trees", "simultaneous", "max_failure_rate",
                     "covariates", "outcomes", "cross"});
  RunConfig c;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) fail("seed", "expected a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.n_subjects = static_cast<int>(get_int(j, "", "n_subjects", c.n_subjects, 1));
  c.periods = static_cast<int>(get_int(j, "", "periods", c.periods, 1));
  c.holdout_periods = static_cast<int>(get_int(j, "", "holdout_periods", c.holdout_periods, 0));
  c.replications = static_cast<int>(get_int(j, "", "replications", c.replications, 1));
  c.bootstrap_reps = static_cast<int>(get_int(j, "", "bootstrap_reps", c.bootstrap_reps, 0));
  if (c.bootstrap_reps > 0 && c.bootstrap_reps < 30) fail("bootstrap_reps", "must be 0 or at least 30");
  c.monte_carlo_draws = static_cast<int>(get_int(j, "", "monte_carlo_draws", c.monte_carlo_draws, 1000));
  c.threads = static_cast<int>(get_int(j, "", "threads", c.threads, 1));
  c.max_trees = static_cast<int>(get_int(j, "", "max_trees", c.max_trees, -1));
  if (j.contains("simultaneous")) {
    if (!j.at("simultaneous").is_boolean()) fail("simultaneous", "expected true or false");
    c.simultaneous = j.at("simultaneous").get<bool>();
  }
  if (j.contains("max_failure_rate")) {
    c.max_failure_rate = get_real(j.at("max_failure_rate"), "max_failure_rate");
    if (!(c.max_failure_rate >= 0.0 && c.max_failure_rate <= 1.0)) fail("max_failure_rate", "must lie in [0, 1]");
  }

  if (j.contains("covariates")) {
    const Json& cv = j.at("covariates");
    allow_keys(cv, "covariates", {"names", "generator", "bernoulli_p"});
    if (cv.contains("names")) c.covariates = get_strings(cv.at("names"), "covariates.names");
    if (cv.contains("generator")) c.covariate_generator = get_string(cv.at("generator"), "covariates.generator");
    if (c.covariate_generator != "normal-bernoulli" && c.covariate_generator != "none")
      fail("covariates.generator", "expected 'normal-bernoulli' or 'none'");
    if (cv.contains("bernoulli_p")) {
      c.bernoulli_p = get_real(cv.at("bernoulli_p"), "covariates.bernoulli_p");
      if (!(c.bernoulli_p >= 0.0 && c.bernoulli_p <= 1.0)) fail("covariates.bernoulli_p", "must lie in [0, 1]");
    }
  }

  if (!j.contains("outcomes") || !j.at("outcomes").is_array() || j.at("outcomes").empty())
    fail("outcomes", "expected a non-empty array");
  std::set<std::string> seen;
  for (std::size_t k = 0; k < j.at("outcomes").size(); ++k) {
    c.outcomes.push_back(parse_outcome(j.at("outcomes")[k], index("outcomes", k)));
    if (!seen.insert(c.outcomes.back().spec.name).second) fail(index("outcomes", k) + ".name", "duplicate outcome");
  }

  if (j.contains("cross")) {
    const Json& cr = j.at("cross");
    allow_keys(cr, "cross", {"correlation", "rho"});
    const auto J = static_cast<Eigen::Index>(c.outcomes.size());
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(J, J);
    if (cr.contains("correlation")) {
      const Json& m = cr.at("correlation");
      if (!m.is_array() || static_cast<Eigen::Index>(m.size()) != J) fail("cross.correlation", "expected a J x J array");
      for (Eigen::Index a = 0; a < J; ++a) {
        const Json& row = m[static_cast<std::size_t>(a)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != J)
          fail(index("cross.correlation", static_cast<std::size_t>(a)), "expected J entries");
        for (Eigen::Index b = 0; b < J; ++b)
          r(a, b) = get_real(row[static_cast<std::size_t>(b)],
                             index(index("cross.correlation", static_cast<std::size_t>(a)), static_cast<std::size_t>(b)));
      }
    } else if (cr.contains("rho")) {
      const Json& rho = cr.at("rho");
      if (!rho.is_object()) fail("cross.rho", "expected an object of \"a-b\": value");
      for (const auto& [k, v] : rho.items()) {
        bool found = false;
        for (Eigen::Index a = 0; a < J && !found; ++a)
          for (Eigen::Index b = a + 1; b < J && !found; ++b)
            if (pair_label(c.outcomes[static_cast<std::size_t>(a)].spec.name,
                           c.outcomes[static_cast<std::size_t>(b)].spec.name) == k) {
              r(a, b) = r(b, a) = get_real(v, join("cross.rho", k));
              found = true;
            }
        if (!found) fail(join("cross.rho", k), "no such outcome pair");
      }
    }
    try {
      CorrelationMatrix check(r);
      GaussianCrossCopula g(check);
    } catch (const std::exception& e) {
      fail("cross", e.what());
    }
    c.correlation = r;
  }
  return c;
}

RunConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

bool RunConfig::has_truth() const {
  return std::all_of(outcomes.begin(), outcomes.end(),
                     [](const OutcomeConfig& o) { return !o.true_parameters.empty(); });
}

JointModel RunConfig::truth() const {
  std::vector<OutcomeModel> outs;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const auto& o = outcomes[k];
    const std::string path = index("outcomes", k);
    if (o.true_parameters.empty()) fail(path + ".marginal.parameters", "missing; needed to simulate");
    auto m = make_marginal(o.spec.marginal);
    Eigen::VectorXd p(static_cast<Eigen::Index>(o.true_parameters.size()));
    for (std::size_t q = 0; q < o.true_parameters.size(); ++q) p(static_cast<Eigen::Index>(q)) = o.true_parameters[q].value;
    try {
      m->set_parameters(p);
    } catch (const std::exception& e) {
      fail(path + ".marginal.parameters", e.what());
    }
    std::vector<BivariateCopula> trees;
    for (const auto& [fam, theta] : o.true_trees) {
      const CopulaFamily f = CopulaFamily::parse(fam);
      trees.push_back(f.is_independence() ? BivariateCopula() : BivariateCopula(f, theta));
    }
    const Scale sc = m->scale();
    outs.push_back({o.spec.name, std::shared_ptr<const Marginal>(std::move(m)),
                    DVineModel(sc, trees, o.true_truncation < 0 ? static_cast<int>(trees.size()) : o.true_truncation)});
  }
  const int J = static_cast<int>(outs.size());
  GaussianCrossCopula cross = correlation ? GaussianCrossCopula(CorrelationMatrix(*correlation))
                                          : GaussianCrossCopula::identity(J);
  return JointModel(std::move(outs), std::move(cross));
}

FitOptions RunConfig::fit_options(std::uint64_t s) const {
  FitOptions f;
  for (const auto& o : outcomes) f.outcomes.push_back(o.spec);
  f.max_trees = max_trees;
  f.simultaneous = simultaneous;
  f.bootstrap_reps = bootstrap_reps;
  f.seed = s;
  f.threads = threads;
  f.max_failure_rate = 0.2;
  return f;
}

CovariateGenerator RunConfig::generator() const {
  if (covariate_generator == "none") return {};
  return normal_bernoulli_covariates(bernoulli_p);
}

}  // namespace mlv::cli
