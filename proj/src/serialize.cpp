#include "mlvine/serialize.hpp"

#include "mlvine/errors.hpp"

#include <cmath>
#include <fstream>

namespace mlv {

namespace {

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json matrix_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd matrix_from(const Json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != n) throw DataError("model: correlation matrix is not square");
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string(what) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string(what) + ": " + e.what());
  } catch (const std::domain_error& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
}

std::vector<std::string> inflation_terms(const Marginal& m) {
  if (const auto* c = dynamic_cast<const CountMarginal*>(&m)) {
    if (c->zero_predictor().size() > 0) return c->zero_predictor().terms();
    return c->one_predictor().terms();
  }
  if (const auto* s = dynamic_cast<const SemiContinuousMarginal*>(&m)) return s->zero_predictor().terms();
  return {};
}

}  // namespace

Json marginal_to_json(const Marginal& m) {
  Json j;
  j["family"] = m.family();
  j["scale"] = to_string(m.scale());
  const auto preds = m.predictors();
  j["mean_terms"] = preds.front()->terms();
  if (m.scale() == Scale::SemiContinuous) j["mean_terms"] = preds.back()->terms();
  j["inflation_terms"] = inflation_terms(m);
  Json params = Json::object();
  const auto names = m.parameter_names();
  const Eigen::VectorXd p = m.parameters();
  for (std::size_t k = 0; k < names.size(); ++k) params[names[k]] = p(static_cast<Eigen::Index>(k));
  j["parameters"] = std::move(params);
  return j;
}

std::unique_ptr<Marginal> marginal_from_json(const Json& j) {
  return guarded("model marginal", [&] {
    MarginalSpec spec;
    spec.family = j.at("family").get<std::string>();
    spec.mean_terms = j.at("mean_terms").get<std::vector<std::string>>();
    spec.inflation_terms = j.value("inflation_terms", std::vector<std::string>{});
    auto m = make_marginal(spec);
    const auto names = m->parameter_names();
    const Json& params = j.at("parameters");
    if (params.size() != names.size()) throw DataError("model marginal: parameter count mismatch");
    Eigen::VectorXd p(static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) p(static_cast<Eigen::Index>(k)) = params.at(names[k]).get<double>();
    m->set_parameters(p);
    return m;
  });
}

Json vine_to_json(const DVineModel& v) {
  Json j;
  j["scale"] = to_string(v.scale());
  j["truncation_level"] = v.truncation_level();
  Json trees = Json::array();
  for (const auto& c : v.trees()) {
    Json t;
    t["family"] = c.name();
    t["theta"] = c.theta();
    t["tau"] = c.tau();
    trees.push_back(std::move(t));
  }
  j["trees"] = std::move(trees);
  return j;
}

DVineModel vine_from_json(const Json& j) {
  return guarded("model vine", [&] {
    std::vector<BivariateCopula> trees;
    for (const auto& t : j.at("trees")) {
      const CopulaFamily fam = CopulaFamily::parse(t.at("family").get<std::string>());
      trees.push_back(fam.is_independence() ? BivariateCopula() : BivariateCopula(fam, t.at("theta").get<double>()));
    }
    return DVineModel(parse_scale(j.at("scale").get<std::string>()), std::move(trees),
                      j.at("truncation_level").get<int>());
  });
}

Json model_to_json(const JointModel& m) {
  Json j;
  Json outs = Json::array();
  for (const auto& o : m.outcomes()) {
    Json e;
    e["name"] = o.name;
    e["marginal"] = marginal_to_json(*o.marginal);
    e["vine"] = vine_to_json(o.vine);
    outs.push_back(std::move(e));
  }
  j["outcomes"] = std::move(outs);
  j["correlation"] = matrix_json(m.cross().corr().matrix());
  return j;
}

JointModel model_from_json(const Json& j) {
  return guarded("model", [&] {
    std::vector<OutcomeModel> outs;
    for (const auto& e : j.at("outcomes"))
      outs.push_back({e.at("name").get<std::string>(), marginal_from_json(e.at("marginal")), vine_from_json(e.at("vine"))});
    const Eigen::MatrixXd r = matrix_from(j.at("correlation"));
    return JointModel(std::move(outs), GaussianCrossCopula(CorrelationMatrix(r)));
  });
}

Json report_to_json(const StagewiseFit& fit) {
  const FitReport& r = fit.report;
  Json j;
  j["loglik"] = number(r.loglik);
  j["converged"] = r.converged;
  j["floored_cells"] = r.floored;
  j["bootstrap"] = {{"successes", r.bootstrap_successes}, {"failures", r.bootstrap_failures}};
  Json params = Json::array();
  for (const auto& p : r.parameters)
    params.push_back({{"name", p.name}, {"estimate", number(p.estimate)}, {"se", number(p.se)},
                      {"hessian_se", number(p.hessian_se)}});
  j["parameters"] = std::move(params);

  Json margs = Json::array();
  for (std::size_t k = 0; k < r.marginals.size(); ++k) {
    const auto& mf = r.marginals[k];
    margs.push_back({{"outcome", fit.model.outcome(static_cast<int>(k)).name},
                     {"family", mf.model->family()},
                     {"loglik", number(mf.loglik)},
                     {"aic", number(mf.aic)},
                     {"converged", mf.converged},
                     {"boundary", mf.boundary},
                     {"n_obs", mf.n_obs}});
  }
  j["marginals"] = std::move(margs);

  Json vines = Json::array();
  for (std::size_t k = 0; k < r.vines.size(); ++k) {
    const auto& vf = r.vines[k];
    Json trees = Json::array();
    for (std::size_t t = 0; t < vf.trees.size(); ++t) {
      const auto& tf = vf.trees[t];
      Json cands = Json::array();
      for (const auto& c : tf.candidates)
        cands.push_back({{"family", c.family.name()},
                         {"theta", number(c.theta)},
                         {"loglik", number(c.loglik)},
                         {"aic", number(c.aic)},
                         {"converged", c.converged}});
      trees.push_back({{"tree", t + 1},
                       {"selected", tf.copula.name()},
                       {"theta", number(tf.copula.theta())},
                       {"tau", number(tf.copula.tau())},
                       {"loglik", number(tf.loglik)},
                       {"aic", number(tf.aic)},
                       {"converged", tf.converged},
                       {"candidates", std::move(cands)}});
    }
    vines.push_back({{"outcome", fit.model.outcome(static_cast<int>(k)).name},
                     {"truncation_level", vf.model.truncation_level()},
                     {"floored_cells", vf.floored},
                     {"trees", std::move(trees)}});
  }
  j["vines"] = std::move(vines);

  j["cross"] = {{"correlation", matrix_json(r.cross.copula.corr().matrix())},
                {"pairwise_rho", matrix_json(r.cross.pairwise_rho)},
                {"projected", r.cross.projected},
                {"converged", r.cross.converged},
                {"composite_loglik", number(r.cross.loglik)}};
  return j;
}

JointModel read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace mlv
