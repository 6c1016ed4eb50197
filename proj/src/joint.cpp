#include "mlvine/joint.hpp"

#include "mlvine/errors.hpp"
#include "mlvine/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mlv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

double floored_log(double p, long* floored) {
  if (p >= kProbFloor) return std::log(p);
  if (floored) ++*floored;
  return std::log(kProbFloor);
}

}  // namespace

JointModel::JointModel(std::vector<OutcomeModel> outcomes, GaussianCrossCopula cross)
    : outcomes_(std::move(outcomes)), cross_(std::move(cross)) {
  if (outcomes_.empty()) throw std::invalid_argument("JointModel: no outcomes");
  if (cross_.dim() == 0) cross_ = GaussianCrossCopula::identity(n_outcomes());
  if (cross_.dim() != n_outcomes()) throw std::invalid_argument("JointModel: cross copula dimension mismatch");
  for (const auto& o : outcomes_) {
    if (!o.marginal) throw std::invalid_argument("JointModel: missing marginal for " + o.name);
    if (o.marginal->scale() != o.vine.scale())
      throw std::invalid_argument("JointModel: marginal and vine scales differ for " + o.name);
  }
}

JointModel JointModel::bound(const std::vector<std::string>& schema) const {
  auto out = *this;
  for (auto& o : out.outcomes_) {
    auto m = o.marginal->clone();
    m->bind(schema);
    o.marginal = std::move(m);
  }
  return out;
}

JointModel JointModel::independence() const {
  auto out = *this;
  for (auto& o : out.outcomes_) o.vine = o.vine.truncate(0);
  out.cross_ = GaussianCrossCopula::identity(n_outcomes());
  return out;
}

double period_loglik(const JointModel& m, const CrossSection& points, long* floored) {
  const int J = m.n_outcomes();
  if (static_cast<int>(points.size()) != J) throw std::invalid_argument("period_loglik: dimension mismatch");
  double s = 0.0;
  if (m.cross().is_identity()) {
    for (const auto& p : points) s += floored_log(p.f, floored);
    return s;
  }
  Eigen::VectorXd lo(J), hi(J);
  std::vector<bool> cont(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    const CdfPoint& p = points[static_cast<std::size_t>(j)];
    cont[static_cast<std::size_t>(j)] = !p.atom;
    lo(j) = p.atom ? p.F_minus : p.F;
    hi(j) = p.F;
    if (!p.atom) s += floored_log(p.f, floored);
  }
  return s + floored_log(m.cross().hybrid(lo, hi, cont), floored);
}

std::vector<CrossSection> conditional_points(const JointModel& m, const PanelDataset& data, int subject,
                                             long* floored) {
  const int J = m.n_outcomes(), T = data.n_periods();
  std::vector<CrossSection> rows(static_cast<std::size_t>(T), CrossSection(static_cast<std::size_t>(J)));
  for (int j = 0; j < J; ++j) {
    const auto& o = m.outcome(j);
    const int jd = data.outcome_index(o.name);
    Trajectory tr;
    tr.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) tr.push_back(o.marginal->evaluate(data.covariates(subject, jd, t), data.value(subject, jd, t)));
    const VineWorkspace ws = step1_evaluate(o.vine, tr);
    if (floored) *floored += ws.floored;
    for (int t = 0; t < T; ++t)
      rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = ws.fwd[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)];
  }
  return rows;
}

double total_loglik(const JointModel& m, const PanelDataset& data, long* floored) {
  const JointModel b = m.bound(data.covariate_names());
  double s = 0.0;
  for (int i = 0; i < data.n_subjects(); ++i)
    for (const auto& row : conditional_points(b, data, i, floored)) s += period_loglik(b, row, floored);
  return s;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

NextPeriodSampler::NextPeriodSampler(const JointModel& m, const std::vector<Trajectory>& histories,
                                     std::vector<Eigen::RowVectorXd> covariates, bool tabulate)
    : model_(&m), x_(std::move(covariates)) {
  const int J = m.n_outcomes();
  if (static_cast<int>(histories.size()) != J || static_cast<int>(x_.size()) != J)
    throw std::invalid_argument("NextPeriodSampler: dimension mismatch");
  for (int j = 0; j < J; ++j) predictors_.emplace_back(m.outcome(j).vine, histories[static_cast<std::size_t>(j)]);
  tables_.resize(static_cast<std::size_t>(J));
  if (tabulate) {
    for (int j = 0; j < J; ++j) {
      const Marginal& mg = *m.outcome(j).marginal;
      if (mg.scale() != Scale::Discrete) continue;
      auto& tab = tables_[static_cast<std::size_t>(j)];
      const auto& pred = predictors_[static_cast<std::size_t>(j)];
      const CovRow x(x_[static_cast<std::size_t>(j)]);
      const double cap = mg.quantile(x, 1.0 - 1e-15);
      for (int y = 0; y <= cap; ++y) {
        tab.push_back(pred.cdf(mg, x, y));
        if (tab.back() >= 1.0 - 1e-13) break;
      }
    }
  }
  if (m.cross().is_identity())
    chol_ = Eigen::MatrixXd::Identity(J, J);
  else
    chol_ = m.cross().corr().matrix().llt().matrixL();
}

double NextPeriodSampler::quantile(int j, double u) const {
  const auto& tab = tables_[static_cast<std::size_t>(j)];
  if (!tab.empty() && u <= tab.back())
    return static_cast<double>(std::lower_bound(tab.begin(), tab.end(), u) - tab.begin());
  const auto& o = model_->outcome(j);
  return predictors_[static_cast<std::size_t>(j)].quantile(*o.marginal, CovRow(x_[static_cast<std::size_t>(j)]), u);
}

void NextPeriodSampler::draw(RngStream& rng, Eigen::VectorXd& y) const {
  const auto J = chol_.rows();
  Eigen::VectorXd e(J);
  for (Eigen::Index k = 0; k < J; ++k) e(k) = std_normal_quantile(rng.uniform());
  const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>() * e;
  y.resize(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const double u = std::clamp(std_normal_cdf(z(j)), 1e-300, 1.0 - 0x1.0p-53);
    y(j) = quantile(static_cast<int>(j), u);
  }
}

CovariateGenerator normal_bernoulli_covariates(double p) {
  return [p](PanelDataset& data, int i, RngStream& rng) {
    const auto& names = data.covariate_names();
    const auto c1 = std::find(names.begin(), names.end(), "x1") - names.begin();
    const auto c2 = std::find(names.begin(), names.end(), "x2") - names.begin();
    if (c1 == static_cast<long>(names.size()) || c2 == static_cast<long>(names.size()))
      throw std::invalid_argument("normal_bernoulli_covariates: needs columns x1 and x2");
    for (int j = 0; j < data.n_outcomes(); ++j) {
      const double x2 = rng.uniform() < p ? 1.0 : 0.0;
      for (int t = 0; t < data.n_periods(); ++t) {
        auto row = data.covariates(i, j, t);
        row(c1) = std_normal_quantile(rng.uniform());
        row(c2) = x2;
      }
    }
  };
}

PanelDataset simulate_values(const JointModel& m, const PanelDataset& skeleton, std::uint64_t seed, int threads) {
  const JointModel b = m.bound(skeleton.covariate_names());
  const int J = b.n_outcomes(), T = skeleton.n_periods();
  std::vector<int> cols(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) cols[static_cast<std::size_t>(j)] = skeleton.outcome_index(b.outcome(j).name);
  PanelDataset out = skeleton;
  parallel_for(static_cast<std::size_t>(skeleton.n_subjects()), threads, [&](std::size_t si) {
    const int i = static_cast<int>(si);
    RngStream rng(seed, {2, si});
    std::vector<Trajectory> hist(static_cast<std::size_t>(J));
    Eigen::VectorXd y;
    for (int t = 0; t < T; ++t) {
      std::vector<Eigen::RowVectorXd> x;
      for (int j = 0; j < J; ++j) x.emplace_back(skeleton.covariates(i, cols[static_cast<std::size_t>(j)], t));
      const NextPeriodSampler sampler(b, hist, x);
      sampler.draw(rng, y);
      for (int j = 0; j < J; ++j) {
        out.value(i, cols[static_cast<std::size_t>(j)], t) = y(j);
        hist[static_cast<std::size_t>(j)].push_back(
            b.outcome(j).marginal->evaluate(CovRow(x[static_cast<std::size_t>(j)]), y(j)));
      }
    }
  });
  return out;
}

PanelDataset simulate_dataset(const JointModel& m, int n_subjects, int periods,
                              const std::vector<std::string>& covariates, const CovariateGenerator& gen,
                              std::uint64_t seed, int threads) {
  if (n_subjects < 1 || periods < 1) throw std::invalid_argument("simulate_dataset: empty panel");
  std::vector<std::string> subjects, outcomes;
  for (int i = 0; i < n_subjects; ++i) subjects.push_back(std::to_string(i + 1));
  for (const auto& o : m.outcomes()) outcomes.push_back(o.name);
  PanelDataset skeleton(subjects, outcomes, periods, covariates);
  for (int i = 0; i < n_subjects; ++i) {
    RngStream rng(seed, {1, static_cast<std::uint64_t>(i)});
    if (gen) gen(skeleton, i, rng);
  }
  return simulate_values(m, skeleton, seed, threads);
}

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

std::vector<NamedValue> dependence_parameters(const JointModel& m) {
  std::vector<NamedValue> out;
  for (const auto& o : m.outcomes()) {
    const auto& v = o.vine;
    for (int k = 0; k < v.truncation_level(); ++k) {
      const auto& c = v.trees()[static_cast<std::size_t>(k)];
      if (!c.is_independence()) out.push_back({"zeta:" + o.name + ":" + std::to_string(k + 1), c.theta()});
    }
  }
  const int J = m.n_outcomes();
  for (int a = 0; a < J; ++a)
    for (int b = a + 1; b < J; ++b)
      out.push_back({"rho:" + pair_label(m.outcome(a).name, m.outcome(b).name), m.cross().corr()(a, b)});
  return out;
}

std::vector<NamedValue> marginal_parameters(const JointModel& m) {
  std::vector<NamedValue> out;
  for (const auto& o : m.outcomes()) {
    const auto names = o.marginal->parameter_names();
    const Eigen::VectorXd p = o.marginal->parameters();
    for (std::size_t k = 0; k < names.size(); ++k)
      out.push_back({"beta:" + o.name + ":" + names[k], p(static_cast<Eigen::Index>(k))});
  }
  return out;
}

namespace {

std::vector<CrossSection> all_cross_sections(const JointModel& m, const PanelDataset& data, long* floored) {
  const JointModel b = m.bound(data.covariate_names());
  std::vector<CrossSection> rows;
  rows.reserve(static_cast<std::size_t>(data.n_subjects() * data.n_periods()));
  for (int i = 0; i < data.n_subjects(); ++i)
    for (auto& r : conditional_points(b, data, i, floored)) rows.push_back(std::move(r));
  return rows;
}

CompositeFit stage3(const JointModel& partial, const PanelDataset& data, int threads, long* floored,
                    const Eigen::MatrixXd* start) {
  if (partial.n_outcomes() < 2) {
    CompositeFit f;
    f.copula = GaussianCrossCopula::identity(partial.n_outcomes());
    return f;
  }
  return fit_pairwise(all_cross_sections(partial, data, floored), partial.n_outcomes(), threads, start);
}

bool vine_converged(const VineFit& v) {
  return std::all_of(v.trees.begin(), v.trees.end(), [](const TreeFit& t) { return t.converged; });
}

void fill_parameters(StagewiseFit& fit) {
  auto& rep = fit.report;
  rep.parameters.clear();
  std::size_t pos = 0;
  const auto marg = marginal_parameters(fit.model);
  for (std::size_t j = 0; j < rep.marginals.size(); ++j) {
    const auto& se = rep.marginals[j].se;
    const auto n = fit.model.outcome(static_cast<int>(j)).marginal->parameters().size();
    for (Eigen::Index k = 0; k < n; ++k, ++pos)
      rep.parameters.push_back({marg[pos].name, marg[pos].value, kNaN, k < se.size() ? se(k) : kNaN});
  }
  for (const auto& d : dependence_parameters(fit.model)) rep.parameters.push_back({d.name, d.value, kNaN, kNaN});
}

StagewiseFit assemble(std::vector<MarginalFit> margs, std::vector<VineFit> vines, const std::vector<std::string>& names,
                      const PanelDataset& data, int threads, std::chrono::steady_clock::time_point t2,
                      const Eigen::MatrixXd* start = nullptr, bool diagnostics = true) {
  StagewiseFit fit;
  auto& rep = fit.report;
  std::vector<OutcomeModel> outs;
  for (std::size_t j = 0; j < names.size(); ++j) outs.push_back({names[j], margs[j].model, vines[j].model});
  rep.seconds[1] = elapsed(t2);
  const auto t3 = std::chrono::steady_clock::now();
  const JointModel partial(outs, GaussianCrossCopula::identity(static_cast<int>(outs.size())));
  rep.cross = stage3(partial, data, threads, &rep.floored, start);
  rep.seconds[2] = elapsed(t3);
  fit.model = JointModel(std::move(outs), rep.cross.copula);
  rep.marginals = std::move(margs);
  rep.vines = std::move(vines);
  for (const auto& v : rep.vines) rep.floored += v.floored;
  rep.converged = rep.cross.converged;
  for (const auto& mf : rep.marginals) rep.converged = rep.converged && mf.converged;
  for (const auto& v : rep.vines) rep.converged = rep.converged && vine_converged(v);
  rep.loglik = diagnostics ? total_loglik(fit.model, data, nullptr) : std::numeric_limits<double>::quiet_NaN();
  fill_parameters(fit);
  return fit;
}

}  // namespace

StagewiseFit fit_stagewise(const FitOptions& options, const PanelDataset& data) {
  const int J = static_cast<int>(options.outcomes.size());
  if (J == 0) throw std::invalid_argument("fit_stagewise: no outcomes");
  std::vector<int> cols;
  std::vector<std::string> names;
  for (const auto& o : options.outcomes) {
    cols.push_back(data.outcome_index(o.name));
    names.push_back(o.name);
  }
  const auto t1 = std::chrono::steady_clock::now();
  std::vector<MarginalFit> margs(static_cast<std::size_t>(J));
  parallel_for(margs.size(), options.threads, [&](std::size_t j) {
    margs[j] = fit_marginal(options.outcomes[j].marginal, data, cols[j]);
  });
  const double s1 = elapsed(t1);

  const auto t2 = std::chrono::steady_clock::now();
  std::vector<VineFit> vines(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    const auto& spec = options.outcomes[static_cast<std::size_t>(j)];
    VineFitOptions vo;
    vo.candidates = spec.candidates;
    vo.max_trees = options.max_trees;
    vo.simultaneous = options.simultaneous;
    vo.threads = options.threads;
    const auto& mg = *margs[static_cast<std::size_t>(j)].model;
    vines[static_cast<std::size_t>(j)] = fit_dvine(mg.scale(), marginal_trajectories(mg, data, cols[static_cast<std::size_t>(j)]), vo);
  }
  StagewiseFit fit = assemble(std::move(margs), std::move(vines), names, data, options.threads, t2);
  fit.report.seconds[0] = s1;

  if (options.bootstrap_reps > 0) {
    const auto t4 = std::chrono::steady_clock::now();
    const BootstrapResult boot = parametric_bootstrap(fit.model, data, options.bootstrap_reps, options.seed,
                                                      options.threads, options.max_failure_rate, options.simultaneous);
    for (auto& row : fit.report.parameters) {
      const auto it = std::find(boot.names.begin(), boot.names.end(), row.name);
      if (it != boot.names.end()) row.se = boot.se[static_cast<std::size_t>(it - boot.names.begin())];
    }
    fit.report.bootstrap_successes = boot.successes;
    fit.report.bootstrap_failures = boot.failures;
    fit.report.seconds[3] = elapsed(t4);
  }
  return fit;
}

StagewiseFit refit_stagewise(const JointModel& start, const PanelDataset& data, bool simultaneous, int threads,
                             bool diagnostics) {
  const int J = start.n_outcomes();
  std::vector<std::string> names;
  std::vector<int> cols;
  for (const auto& o : start.outcomes()) {
    names.push_back(o.name);
    cols.push_back(data.outcome_index(o.name));
  }
  const auto t1 = std::chrono::steady_clock::now();
  std::vector<MarginalFit> margs(static_cast<std::size_t>(J));
  parallel_for(margs.size(), threads, [&](std::size_t j) {
    margs[j] = fit_marginal(*start.outcomes()[j].marginal, data, cols[j], diagnostics);
  });
  const double s1 = elapsed(t1);
  const auto t2 = std::chrono::steady_clock::now();
  std::vector<VineFit> vines(static_cast<std::size_t>(J));
  parallel_for(vines.size(), threads, [&](std::size_t j) {
    vines[j] = refit_dvine(start.outcomes()[j].vine, marginal_trajectories(*margs[j].model, data, cols[j]), simultaneous);
  });
  StagewiseFit fit = assemble(std::move(margs), std::move(vines), names, data, threads, t2,
                              &start.cross().corr().matrix(), diagnostics);
  fit.report.seconds[0] = s1;
  return fit;
}

BootstrapResult parametric_bootstrap(const JointModel& m, const PanelDataset& data, int reps, std::uint64_t seed,
                                     int threads, double max_failure_rate, bool simultaneous) {
  if (reps < 30) throw std::invalid_argument("parametric_bootstrap: needs at least 30 replicates");
  BootstrapResult out;
  std::vector<NamedValue> ref = marginal_parameters(m);
  for (auto& d : dependence_parameters(m)) ref.push_back(std::move(d));
  for (const auto& r : ref) out.names.push_back(r.name);

  std::vector<std::vector<double>> values(static_cast<std::size_t>(reps));
  std::vector<char> ok(static_cast<std::size_t>(reps), 0);
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    try {
      const std::uint64_t s = RngStream(seed, {3, r}).next();
      const PanelDataset sim = simulate_values(m, data, s, 1);
      const StagewiseFit fit = refit_stagewise(m, sim, simultaneous, 1, false);
      if (!fit.report.converged) return;
      std::vector<NamedValue> est = marginal_parameters(fit.model);
      for (auto& d : dependence_parameters(fit.model)) est.push_back(std::move(d));
      if (est.size() != ref.size()) return;
      for (std::size_t k = 0; k < est.size(); ++k) {
        if (est[k].name != ref[k].name || !std::isfinite(est[k].value)) return;
        values[r].push_back(est[k].value);
      }
      ok[r] = 1;
    } catch (const std::exception&) {
      // Counted as a failed replicate.
    }
  });
  out.draws.assign(ref.size(), {});
  for (int r = 0; r < reps; ++r) {
    if (!ok[static_cast<std::size_t>(r)]) {
      ++out.failures;
      continue;
    }
    ++out.successes;
    for (std::size_t k = 0; k < ref.size(); ++k) out.draws[k].push_back(values[static_cast<std::size_t>(r)][k]);
  }
  if (out.failures > max_failure_rate * reps || out.successes < 30)
    throw ConvergenceError("parametric bootstrap: " + std::to_string(out.failures) + " of " + std::to_string(reps) +
                           " replicates failed");
  for (const auto& d : out.draws) out.se.push_back(sample_sd(d));
  return out;
}

}  // namespace mlv
