#include "mlvine/dvine.hpp"

#include "mlvine/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace mlv {

namespace {

const BivariateCopula& independence() {
  static const BivariateCopula c;
  return c;
}

double safe_log(double p, long* floored) {
  if (p >= kProbFloor) return std::log(p);
  if (floored) ++*floored;
  return std::log(kProbFloor);
}

}  // namespace

// ---------------------------------------------------------------------------
// DVineModel
// ---------------------------------------------------------------------------

DVineModel::DVineModel(Scale scale, std::vector<BivariateCopula> trees, int truncation_level)
    : scale_(scale), trees_(std::move(trees)) {
  truncation_ = truncation_level < 0 ? n_trees() : truncation_level;
  if (truncation_ > n_trees()) throw std::invalid_argument("truncation level exceeds the number of trees");
  for (int k = truncation_; k < n_trees(); ++k) trees_[static_cast<std::size_t>(k)] = BivariateCopula();
}

const BivariateCopula& DVineModel::copula_for_lag(int lag) const {
  if (lag < 1) throw std::invalid_argument("copula_for_lag: lag must be >= 1");
  if (lag <= n_trees()) return lag <= truncation_ ? trees_[static_cast<std::size_t>(lag - 1)] : independence();
  if (!truncated() && n_trees() > 0) return trees_.back();
  return independence();
}

DVineModel DVineModel::truncate(int level) const {
  if (level < 0) throw std::invalid_argument("truncate: level must be >= 0");
  return DVineModel(scale_, trees_, std::min(level, truncation_));
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

VineWorkspace step1_evaluate(const DVineModel& m, const Trajectory& traj) {
  const int T = static_cast<int>(traj.size());
  if (T < 1) throw std::invalid_argument("step1_evaluate: empty trajectory");
  VineWorkspace ws;
  ws.fwd.assign(static_cast<std::size_t>(T), std::vector<CdfPoint>(static_cast<std::size_t>(T)));
  ws.bwd = ws.fwd;
  ws.pair.assign(static_cast<std::size_t>(T), std::vector<double>(static_cast<std::size_t>(T), 0.0));
  ws.fwd[0] = traj;
  ws.bwd[0] = traj;
  for (int k = 1; k < T; ++k) {
    const BivariateCopula& c = m.copula_for_lag(k);
    auto& fwd_prev = ws.fwd[static_cast<std::size_t>(k - 1)];
    auto& bwd_prev = ws.bwd[static_cast<std::size_t>(k - 1)];
    for (int s = 0; s + k < T; ++s) {
      const int t = s + k;
      const CdfPoint& a = bwd_prev[static_cast<std::size_t>(s)];
      const CdfPoint& b = fwd_prev[static_cast<std::size_t>(t)];
      ws.pair[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)] = pair_joint(c, a, b);
      ws.fwd[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] = condition_on_first(c, a, b, &ws.floored);
      ws.bwd[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)] = condition_on_second(c, a, b, &ws.floored);
    }
  }
  return ws;
}

double loglik(const DVineModel& m, const Trajectory& traj) {
  VineWorkspace ws = step1_evaluate(m, traj);
  double s = 0.0;
  for (std::size_t t = 0; t < traj.size(); ++t) s += safe_log(ws.fwd[t][t].f, &ws.floored);
  return s;
}

double loglik_product(const DVineModel& m, const Trajectory& traj) {
  VineWorkspace ws = step1_evaluate(m, traj);
  const std::size_t T = traj.size();
  double s = 0.0;
  for (const auto& p : traj) s += safe_log(p.f, nullptr);
  for (std::size_t k = 1; k < T; ++k)
    for (std::size_t a = 0; a + k < T; ++a)
      s += safe_log(ws.pair[k][a], nullptr) - safe_log(ws.bwd[k - 1][a].f, nullptr) -
           safe_log(ws.fwd[k - 1][a + k].f, nullptr);
  return s;
}

double pair_joint_continuous(const BivariateCopula& c, double f_s, double f_t, double F_s, double F_t) {
  return pair_joint(c, {F_s, F_s, f_s, false}, {F_t, F_t, f_t, false});
}

double pair_joint_discrete(const BivariateCopula& c, double F_s, double F_s_minus, double F_t, double F_t_minus) {
  return pair_joint(c, {F_s, F_s_minus, F_s - F_s_minus, true}, {F_t, F_t_minus, F_t - F_t_minus, true});
}

double pair_joint_semicontinuous(const BivariateCopula& c, bool s_zero, bool t_zero, double f_s, double f_t,
                                 double F_s, double F_t) {
  const CdfPoint s = s_zero ? CdfPoint{F_s, 0.0, F_s, true} : CdfPoint{F_s, F_s, f_s, false};
  const CdfPoint t = t_zero ? CdfPoint{F_t, 0.0, F_t, true} : CdfPoint{F_t, F_t, f_t, false};
  return pair_joint(c, s, t);
}

// ---------------------------------------------------------------------------
// Conditional distribution of the next period
// ---------------------------------------------------------------------------

ConditionalPredictor::ConditionalPredictor(const DVineModel& m, const Trajectory& history) {
  const int n = static_cast<int>(history.size());
  if (n == 0) return;
  const VineWorkspace ws = step1_evaluate(m, history);
  floored_ = ws.floored;
  for (int k = 1; k <= n; ++k) {
    copulas_.push_back(&m.copula_for_lag(k));
    given_.push_back(ws.bwd[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(n - k)]);
  }
}

CdfPoint ConditionalPredictor::condition(const CdfPoint& marginal) const {
  CdfPoint g = marginal;
  for (std::size_t k = 0; k < copulas_.size(); ++k) g = condition_on_first(*copulas_[k], given_[k], g, &floored_);
  return g;
}

double ConditionalPredictor::cdf(const Marginal& marginal, const CovRow& x, double y) const {
  return condition(marginal.evaluate(x, y)).F;
}

double ConditionalPredictor::quantile(const Marginal& marginal, const CovRow& x, double u) const {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("conditional quantile: u must lie in (0, 1)");
  if (marginal.scale() == Scale::Discrete) {
    auto G = [&](double y) { return cdf(marginal, x, y); };
    if (G(0.0) >= u) return 0.0;
    const double cap = std::max(1.0, marginal.quantile(x, 1.0 - 1e-15));
    double lo = 0.0, hi = 1.0;
    while (G(hi) < u) {
      if (hi >= cap) return hi;
      lo = hi;
      hi = std::min(2.0 * hi, cap);
    }
    // Invariant: G(lo) < u <= G(hi).
    while (hi - lo > 1.0) {
      const double mid = std::floor(0.5 * (lo + hi));
      (G(mid) >= u ? hi : lo) = mid;
    }
    return hi;
  }

  double base = 0.0;
  if (marginal.scale() == Scale::SemiContinuous) {
    const CdfPoint zero = marginal.evaluate(x, 0.0);
    if (condition(zero).F >= u) return 0.0;
    base = zero.F;
  }
  const bool independent = std::all_of(copulas_.begin(), copulas_.end(),
                                       [](const BivariateCopula* c) { return c->is_independence(); });
  double w = u;
  if (!independent) {
    auto G = [&](double v) { return condition(CdfPoint{v, v, 1.0, false}).F; };
    const double lo = base + (1.0 - base) * 1e-15, hi = 1.0 - 1e-16;
    if (u <= G(lo))
      w = lo;
    else if (u >= G(hi))
      w = hi;
    else
      w = find_root_increasing(G, u, lo, hi, 1e-14, 1e-16);
  }
  w = std::clamp(w, std::nextafter(base, 1.0), 1.0 - 1e-16);
  return marginal.quantile(x, w);
}

double conditional_cdf_next(const DVineModel& m, const Trajectory& history, const Marginal& marginal,
                            const CovRow& x, double y) {
  return ConditionalPredictor(m, history).cdf(marginal, x, y);
}

double conditional_quantile_next(const DVineModel& m, const Trajectory& history, const Marginal& marginal,
                                 const CovRow& x, double u) {
  return ConditionalPredictor(m, history).quantile(marginal, x, u);
}

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

std::vector<CopulaFamily> default_candidates() {
  return {CopulaFamily(Family::Independence, 0), CopulaFamily(Family::Gaussian, 0),
          CopulaFamily(Family::Frank, 0),        CopulaFamily(Family::Clayton, 0),
          CopulaFamily(Family::Clayton, 180),    CopulaFamily(Family::Gumbel, 180),
          CopulaFamily(Family::Joe, 180)};
}

namespace {

const std::vector<double>& theta_grid(const CopulaFamily& fam) {
  static std::mutex mu;
  static std::map<std::string, std::vector<double>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(fam.name());
  if (it != cache.end()) return it->second;
  std::vector<double> grid;
  const Interval b = fam.fitting_bounds();
  for (int g = -9; g <= 9; ++g) {
    if (g == 0) continue;
    const double tau = 0.1 * g + (g > 0 ? -0.05 : 0.05);
    try {
      const double th = BivariateCopula::theta_from_tau(fam, tau);
      if (b.contains(th)) grid.push_back(th);
    } catch (const std::domain_error&) {
      // Sign not attainable by this family.
    }
  }
  return cache.emplace(fam.name(), std::move(grid)).first->second;
}

BivariateCopula make_copula(const CopulaFamily& fam, double theta) {
  if (fam.family == Family::Frank && std::abs(theta) < 1e-8) theta = theta < 0.0 ? -1e-8 : 1e-8;
  return BivariateCopula(fam, theta);
}

double pairs_log_joint(const BivariateCopula& c, const TreePairs& pairs) {
  double s = 0.0;
  for (const auto& [a, b] : pairs) s += safe_log(pair_joint(c, a, b), nullptr);
  return s;
}

CandidateFit fit_candidate(const CopulaFamily& fam, const TreePairs& pairs, double base, const double* start) {
  CandidateFit out;
  out.family = fam;
  if (fam.is_independence()) return out;
  auto nll = [&](double th) { return -(pairs_log_joint(make_copula(fam, th), pairs) - base); };
  const Interval b = fam.fitting_bounds();
  double init = 0.0;
  if (start && b.contains(*start)) {
    init = *start;
  } else {
    const auto& grid = theta_grid(fam);
    double best = kInf;
    for (double th : grid) {
      const double v = nll(th);
      if (v < best) {
        best = v;
        init = th;
      }
    }
    if (!std::isfinite(best)) init = b.from_unconstrained(0.0);
  }
  OptimizerProblem prob;
  prob.objective = [&](const Eigen::VectorXd& x) { return nll(x(0)); };
  prob.bounds = {b};
  prob.initial = Eigen::VectorXd::Constant(1, init);
  prob.initial_step = 0.2;
  prob.tolerance = 1e-11;
  prob.max_evals = 4000;
  const OptimizerResult res = minimize(prob);
  out.theta = make_copula(fam, res.argmin(0)).theta();
  out.loglik = -res.value;
  out.aic = 2.0 - 2.0 * out.loglik;
  out.converged = res.converged;
  return out;
}

}  // namespace

TreeFit fit_tree(const TreePairs& pairs, const std::vector<CopulaFamily>& candidates, int threads,
                 const double* start_theta) {
  if (candidates.empty()) throw std::invalid_argument("fit_tree: no candidate families");
  double base = 0.0;
  for (const auto& [a, b] : pairs) base += safe_log(a.f, nullptr) + safe_log(b.f, nullptr);
  TreeFit out;
  out.candidates.resize(candidates.size());
  parallel_for(candidates.size(), threads, [&](std::size_t k) {
    out.candidates[k] = fit_candidate(candidates[k], pairs, base, start_theta);
  });
  std::size_t best = 0;
  bool found = false;
  for (std::size_t k = 0; k < out.candidates.size(); ++k) {
    if (!out.candidates[k].converged) continue;
    if (!found || out.candidates[k].aic < out.candidates[best].aic) best = k;
    found = true;
  }
  if (!found) {
    for (std::size_t k = 1; k < out.candidates.size(); ++k)
      if (out.candidates[k].aic < out.candidates[best].aic) best = k;
  }
  const CandidateFit& sel = out.candidates[best];
  out.copula = sel.family.is_independence() ? BivariateCopula() : BivariateCopula(sel.family, sel.theta);
  out.loglik = sel.loglik;
  out.aic = sel.aic;
  out.converged = sel.converged;
  return out;
}

namespace {

struct Levels {
  std::vector<Trajectory> fwd, bwd;
};

TreePairs gather_pairs(const Levels& lv, int lag) {
  TreePairs pairs;
  for (std::size_t i = 0; i < lv.fwd.size(); ++i) {
    const int T = static_cast<int>(lv.fwd[i].size());
    for (int s = 0; s + lag < T; ++s)
      pairs.emplace_back(lv.bwd[i][static_cast<std::size_t>(s)], lv.fwd[i][static_cast<std::size_t>(s + lag)]);
  }
  return pairs;
}

void advance(Levels& lv, const BivariateCopula& c, int lag, long* floored) {
  for (std::size_t i = 0; i < lv.fwd.size(); ++i) {
    const int T = static_cast<int>(lv.fwd[i].size());
    Trajectory nf = lv.fwd[i], nb = lv.bwd[i];
    for (int s = 0; s + lag < T; ++s) {
      const CdfPoint& a = lv.bwd[i][static_cast<std::size_t>(s)];
      const CdfPoint& b = lv.fwd[i][static_cast<std::size_t>(s + lag)];
      nf[static_cast<std::size_t>(s + lag)] = condition_on_first(c, a, b, floored);
      nb[static_cast<std::size_t>(s)] = condition_on_second(c, a, b, floored);
    }
    lv.fwd[i] = std::move(nf);
    lv.bwd[i] = std::move(nb);
  }
}

int periods_of(const std::vector<Trajectory>& data) {
  if (data.empty()) throw std::invalid_argument("vine fit: no trajectories");
  const auto T = data.front().size();
  for (const auto& tr : data)
    if (tr.size() != T) throw std::invalid_argument("vine fit: trajectories differ in length");
  return static_cast<int>(T);
}

void joint_refit(VineFit& fit, const std::vector<Trajectory>& data) {
  const int level = fit.model.truncation_level();
  std::vector<int> free;
  for (int k = 0; k < level; ++k)
    if (!fit.model.trees()[static_cast<std::size_t>(k)].is_independence()) free.push_back(k);
  if (free.empty()) return;
  auto build = [&](const Eigen::VectorXd& th) {
    auto trees = fit.model.trees();
    for (std::size_t q = 0; q < free.size(); ++q) {
      auto& c = trees[static_cast<std::size_t>(free[q])];
      c = make_copula(c.family(), th(static_cast<Eigen::Index>(q)));
    }
    return DVineModel(fit.model.scale(), trees, level);
  };
  OptimizerProblem prob;
  prob.initial.resize(static_cast<Eigen::Index>(free.size()));
  for (std::size_t q = 0; q < free.size(); ++q) {
    const auto& c = fit.model.trees()[static_cast<std::size_t>(free[q])];
    prob.bounds.push_back(c.family().fitting_bounds());
    prob.initial(static_cast<Eigen::Index>(q)) = c.theta();
  }
  prob.objective = [&](const Eigen::VectorXd& th) {
    const DVineModel m = build(th);
    double s = 0.0;
    for (const auto& tr : data) s -= loglik(m, tr);
    return s;
  };
  prob.initial_step = 0.1;
  const auto res = minimize(prob);
  fit.model = build(res.argmin);
  for (std::size_t q = 0; q < free.size(); ++q) {
    auto& tf = fit.trees[static_cast<std::size_t>(free[q])];
    tf.copula = fit.model.trees()[static_cast<std::size_t>(free[q])];
    tf.converged = tf.converged && res.converged;
  }
}

}  // namespace

VineFit fit_dvine(Scale scale, const std::vector<Trajectory>& data, const VineFitOptions& options) {
  const int T = periods_of(data);
  const int n_trees = options.max_trees < 0 ? T - 1 : std::min(options.max_trees, T - 1);
  Levels lv{data, data};
  VineFit fit;
  std::vector<BivariateCopula> trees;
  int level = n_trees;
  for (int k = 1; k <= n_trees; ++k) {
    TreeFit tf = fit_tree(gather_pairs(lv, k), options.candidates, options.threads);
    trees.push_back(tf.copula);
    const bool stop = tf.copula.is_independence();
    fit.trees.push_back(std::move(tf));
    if (stop) {
      level = k - 1;
      break;
    }
    if (k < n_trees) advance(lv, trees.back(), k, &fit.floored);
  }
  trees.resize(static_cast<std::size_t>(T > 0 ? T - 1 : 0));
  fit.model = DVineModel(scale, trees, level);
  if (options.simultaneous) joint_refit(fit, data);
  return fit;
}

VineFit refit_dvine(const DVineModel& structure, const std::vector<Trajectory>& data, bool simultaneous) {
  const int T = periods_of(data);
  if (structure.n_trees() != T - 1) throw std::invalid_argument("refit_dvine: structure does not match periods");
  Levels lv{data, data};
  VineFit fit;
  std::vector<BivariateCopula> trees = structure.trees();
  const int level = structure.truncation_level();
  for (int k = 1; k <= level; ++k) {
    const BivariateCopula& old = structure.trees()[static_cast<std::size_t>(k - 1)];
    const double start = old.theta();
    TreeFit tf = fit_tree(gather_pairs(lv, k), {old.family()}, 1, old.is_independence() ? nullptr : &start);
    trees[static_cast<std::size_t>(k - 1)] = tf.copula;
    fit.trees.push_back(std::move(tf));
    if (k < level) advance(lv, trees[static_cast<std::size_t>(k - 1)], k, &fit.floored);
  }
  fit.model = DVineModel(structure.scale(), trees, level);
  if (simultaneous) joint_refit(fit, data);
  return fit;
}

std::vector<Trajectory> marginal_trajectories(const Marginal& m, const PanelDataset& data, int outcome) {
  auto bound = m.clone();
  bound->bind(data.covariate_names());
  std::vector<Trajectory> out(static_cast<std::size_t>(data.n_subjects()));
  for (int i = 0; i < data.n_subjects(); ++i) {
    auto& tr = out[static_cast<std::size_t>(i)];
    tr.reserve(static_cast<std::size_t>(data.n_periods()));
    for (int t = 0; t < data.n_periods(); ++t)
      tr.push_back(bound->evaluate(data.covariates(i, outcome, t), data.value(i, outcome, t)));
  }
  return out;
}

}  // namespace mlv
