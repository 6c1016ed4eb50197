#include "mlvine/marginals.hpp"

#include "mlvine/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mlv {

namespace {

constexpr double kInflationCap = 20.0;

double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

Eigen::VectorXd concat(std::initializer_list<Eigen::VectorXd> parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Eigen::VectorXd out(n);
  Eigen::Index k = 0;
  for (const auto& p : parts) {
    out.segment(k, p.size()) = p;
    k += p.size();
  }
  return out;
}

void append_names(std::vector<std::string>& out, const std::string& prefix, const LinearPredictor& lp) {
  for (const auto& t : lp.terms()) out.push_back(prefix + ":" + t);
}

void require_size(const Eigen::Ref<const Eigen::VectorXd>& p, Eigen::Index n) {
  if (p.size() != n)
    throw std::invalid_argument("set_parameters: expected " + std::to_string(n) + " values, got " +
                                std::to_string(p.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// LinearPredictor
// ---------------------------------------------------------------------------

LinearPredictor::LinearPredictor(std::vector<std::string> terms)
    : terms_(std::move(terms)), coef_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(terms_.size()))) {}

LinearPredictor::LinearPredictor(std::vector<std::string> terms, Eigen::VectorXd coef)
    : terms_(std::move(terms)), coef_(std::move(coef)) {
  if (coef_.size() != static_cast<Eigen::Index>(terms_.size()))
    throw std::invalid_argument("LinearPredictor: coefficient count does not match terms");
}

void LinearPredictor::set_coef(const Eigen::Ref<const Eigen::VectorXd>& c) {
  if (c.size() != coef_.size()) throw std::invalid_argument("LinearPredictor: coefficient size mismatch");
  coef_ = c;
}

void LinearPredictor::bind(const std::vector<std::string>& schema) {
  std::vector<int> cols;
  for (const auto& t : terms_) {
    if (t == kIntercept) {
      cols.push_back(-1);
      continue;
    }
    const auto it = std::find(schema.begin(), schema.end(), t);
    if (it == schema.end()) throw DataError("covariate '" + t + "' not found in data columns");
    cols.push_back(static_cast<int>(it - schema.begin()));
  }
  columns_ = std::move(cols);
}

Eigen::MatrixXd LinearPredictor::design(const Eigen::MatrixXd& covariates) const {
  if (!bound()) throw std::logic_error("LinearPredictor: design() before bind()");
  Eigen::MatrixXd d(covariates.rows(), size());
  for (int k = 0; k < size(); ++k) {
    if (columns_[k] < 0)
      d.col(k).setOnes();
    else
      d.col(k) = covariates.col(columns_[k]);
  }
  return d;
}

std::vector<const LinearPredictor*> Marginal::predictors() const {
  auto mut = const_cast<Marginal*>(this)->predictors();
  return {mut.begin(), mut.end()};
}

void Marginal::bind(const std::vector<std::string>& schema) {
  for (auto* lp : predictors()) lp->bind(schema);
}

// ---------------------------------------------------------------------------
// CountMarginal
// ---------------------------------------------------------------------------

CountMarginal::CountMarginal(CountBase base, Inflation inflation, LinearPredictor mean, double phi,
                             LinearPredictor zero, LinearPredictor one)
    : base_(base),
      inflation_(inflation),
      mean_(std::move(mean)),
      phi_(phi),
      zero_(std::move(zero)),
      one_(std::move(one)) {
  if (base_ == CountBase::NegBin2 && !(phi_ > 0.0))
    throw std::domain_error("NB2 dispersion phi must be positive");
  if (has_zero() && zero_.size() == 0) throw std::invalid_argument("zero inflation needs at least one term");
  if (has_one() && one_.size() == 0) throw std::invalid_argument("one inflation needs at least one term");
  if (!has_zero()) zero_ = {};
  if (!has_one()) one_ = {};
}

CountMarginal CountMarginal::from_family(const std::string& family, const std::vector<std::string>& mean_terms,
                                         const std::vector<std::string>& inflation_terms) {
  struct Entry {
    const char* name;
    CountBase base;
    Inflation infl;
  };
  static const Entry table[] = {
      {"poisson", CountBase::Poisson, Inflation::None},  {"nb2", CountBase::NegBin2, Inflation::None},
      {"zip", CountBase::Poisson, Inflation::Zero},      {"zinb", CountBase::NegBin2, Inflation::Zero},
      {"zoip", CountBase::Poisson, Inflation::ZeroAndOne}, {"zoinb", CountBase::NegBin2, Inflation::ZeroAndOne},
      {"oip", CountBase::Poisson, Inflation::One},       {"oinb", CountBase::NegBin2, Inflation::One},
  };
  for (const auto& e : table) {
    if (family != e.name) continue;
    LinearPredictor zero, one;
    if (e.infl == Inflation::Zero || e.infl == Inflation::ZeroAndOne) {
      zero = LinearPredictor(inflation_terms);
    }
    if (e.infl == Inflation::One || e.infl == Inflation::ZeroAndOne) one = LinearPredictor(inflation_terms);
    if (zero.size() > 0) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(zero.size());
      c(0) = -2.0;
      zero.set_coef(c);
    }
    if (one.size() > 0) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(one.size());
      c(0) = -2.0;
      one.set_coef(c);
    }
    return CountMarginal(e.base, e.infl, LinearPredictor(mean_terms), 1.0, zero, one);
  }
  throw std::invalid_argument("unknown count family '" + family + "'");
}

std::string CountMarginal::family() const {
  const bool nb = base_ == CountBase::NegBin2;
  switch (inflation_) {
    case Inflation::None: return nb ? "nb2" : "poisson";
    case Inflation::Zero: return nb ? "zinb" : "zip";
    case Inflation::One: return nb ? "oinb" : "oip";
    case Inflation::ZeroAndOne: return nb ? "zoinb" : "zoip";
  }
  return "poisson";
}

std::pair<double, double> CountMarginal::inflation_probs(const CovRow& x) const {
  if (inflation_ == Inflation::None) return {0.0, 0.0};
  const double e0 = has_zero() ? zero_.eval(x) : -kInf;
  const double e1 = has_one() ? one_.eval(x) : -kInf;
  const double m = std::max({0.0, e0, e1});
  const double w0 = std::exp(e0 - m), w1 = std::exp(e1 - m), w = std::exp(-m);
  const double den = w + w0 + w1;
  return {w0 / den, w1 / den};
}

void CountMarginal::base_terms(double mu, int y, double& g_y, double& g_cum) const {
  g_y = 0.0;
  g_cum = 0.0;
  if (y < 0) return;
  double lg = 0.0;
  double ratio_const = 0.0;
  if (base_ == CountBase::Poisson) {
    lg = -mu;
    ratio_const = std::log(mu);
  } else {
    lg = -phi_ * std::log1p(mu / phi_);
    ratio_const = std::log(mu) - std::log(mu + phi_);
  }
  // Accumulate relative to the running maximum to survive underflow of g(0).
  double lmax = lg;
  double acc = 1.0;
  for (int k = 0; k < y; ++k) {
    const double step = base_ == CountBase::Poisson
                            ? ratio_const - std::log(k + 1.0)
                            : ratio_const + std::log((k + phi_) / (k + 1.0));
    lg += step;
    if (lg > lmax) {
      acc = acc * std::exp(lmax - lg) + 1.0;
      lmax = lg;
    } else {
      acc += std::exp(lg - lmax);
    }
  }
  g_y = std::exp(lg);
  g_cum = std::min(1.0, acc * std::exp(lmax));
}

CdfPoint CountMarginal::evaluate(const CovRow& x, double y) const {
  CdfPoint out;
  out.atom = true;
  if (y < 0.0) return out;
  const int k = static_cast<int>(std::floor(y));
  const double mu = base_mean(x);
  const auto [p0, p1] = inflation_probs(x);
  const double w = 1.0 - p0 - p1;
  double g_k = 0.0, g_cum = 0.0;
  base_terms(mu, k, g_k, g_cum);
  const bool integral = static_cast<double>(k) == y;
  out.F = std::min(1.0, p0 + (k >= 1 ? p1 : 0.0) + w * g_cum);
  if (integral) {
    out.f = (k == 0 ? p0 : 0.0) + (k == 1 ? p1 : 0.0) + w * g_k;
    out.F_minus = std::max(0.0, out.F - out.f);
  } else {
    out.f = 0.0;
    out.F_minus = out.F;
  }
  return out;
}

double CountMarginal::pmf(const CovRow& x, double y) const { return evaluate(x, y).f; }

double CountMarginal::count_cdf(const CovRow& x, double y) const { return evaluate(x, y).F; }

double CountMarginal::quantile(const CovRow& x, double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must lie in (0, 1)");
  const double mu = base_mean(x);
  const auto [p0, p1] = inflation_probs(x);
  const double w = 1.0 - p0 - p1;
  double lg = base_ == CountBase::Poisson ? -mu : -phi_ * std::log1p(mu / phi_);
  double F = p0 + w * std::exp(lg);
  for (int k = 0; k < 100000000; ++k) {
    if (F >= p) return k;
    const double step = base_ == CountBase::Poisson
                            ? std::log(mu) - std::log(k + 1.0)
                            : std::log(mu) - std::log(mu + phi_) + std::log((k + phi_) / (k + 1.0));
    lg += step;
    const double Fn = F + (k == 0 ? p1 : 0.0) + w * std::exp(lg);
    // Mass below double resolution: the remaining tail cannot reach p.
    if (Fn == F && k > mu + 50.0 * std::sqrt(mu + 1.0)) return k;
    F = Fn;
  }
  return kInf;
}

Eigen::VectorXd CountMarginal::parameters() const {
  Eigen::VectorXd phi(base_ == CountBase::NegBin2 ? 1 : 0);
  if (phi.size()) phi(0) = phi_;
  return concat({mean_.coef(), phi, zero_.coef(), one_.coef()});
}

void CountMarginal::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& p) {
  const Eigen::Index nm = mean_.size(), np = base_ == CountBase::NegBin2 ? 1 : 0;
  require_size(p, nm + np + zero_.size() + one_.size());
  mean_.set_coef(p.head(nm));
  if (np) {
    if (!(p(nm) > 0.0)) throw std::domain_error("NB2 dispersion phi must be positive");
    phi_ = p(nm);
  }
  zero_.set_coef(p.segment(nm + np, zero_.size()));
  one_.set_coef(p.tail(one_.size()));
}

std::vector<std::string> CountMarginal::parameter_names() const {
  std::vector<std::string> out;
  append_names(out, "mean", mean_);
  if (base_ == CountBase::NegBin2) out.emplace_back("phi");
  append_names(out, "zero", zero_);
  append_names(out, "one", one_);
  return out;
}

std::vector<Interval> CountMarginal::parameter_bounds() const {
  std::vector<Interval> out(static_cast<std::size_t>(mean_.size()), Interval{});
  if (base_ == CountBase::NegBin2) out.push_back({0.0, kInf});
  out.insert(out.end(), static_cast<std::size_t>(zero_.size() + one_.size()),
             Interval{-kInflationCap, kInflationCap});
  return out;
}

std::vector<LinearPredictor*> CountMarginal::predictors() {
  std::vector<LinearPredictor*> out{&mean_};
  if (has_zero()) out.push_back(&zero_);
  if (has_one()) out.push_back(&one_);
  return out;
}

// ---------------------------------------------------------------------------
// SemiContinuousMarginal
// ---------------------------------------------------------------------------

SemiContinuousMarginal::SemiContinuousMarginal(LinearPredictor zero, LinearPredictor mean, double alpha)
    : zero_(std::move(zero)), mean_(std::move(mean)), alpha_(alpha) {
  if (!(alpha_ > 0.0)) throw std::domain_error("Gamma shape alpha must be positive");
}

double SemiContinuousMarginal::zero_prob(const CovRow& x) const { return logistic(zero_.eval(x)); }

CdfPoint SemiContinuousMarginal::evaluate(const CovRow& x, double y) const {
  if (y < 0.0) throw std::domain_error("semi-continuous outcome must be nonnegative");
  const double q = zero_prob(x);
  CdfPoint out;
  if (y == 0.0) {
    out.F = q;
    out.F_minus = 0.0;
    out.f = q;
    out.atom = true;
    return out;
  }
  const double scale = severity_mean(x) / alpha_;
  out.F = q + (1.0 - q) * gamma_cdf(y, alpha_, scale);
  out.F_minus = out.F;
  out.f = (1.0 - q) * std::exp(gamma_log_pdf(y, alpha_, scale));
  return out;
}

double SemiContinuousMarginal::log_density(const CovRow& x, double y) const {
  if (y < 0.0) throw std::domain_error("semi-continuous outcome must be nonnegative");
  const double q = zero_prob(x);
  if (y == 0.0) return std::log(q);
  return std::log1p(-q) + gamma_log_pdf(y, alpha_, severity_mean(x) / alpha_);
}

double SemiContinuousMarginal::quantile(const CovRow& x, double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must lie in (0, 1)");
  const double q = zero_prob(x);
  if (p <= q) return 0.0;
  const double r = std::clamp((p - q) / (1.0 - q), 1e-300, 1.0 - 1e-16);
  return gamma_quantile(r, alpha_, severity_mean(x) / alpha_);
}

Eigen::VectorXd SemiContinuousMarginal::parameters() const {
  Eigen::VectorXd a(1);
  a(0) = alpha_;
  return concat({zero_.coef(), mean_.coef(), a});
}

void SemiContinuousMarginal::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& p) {
  require_size(p, zero_.size() + mean_.size() + 1);
  zero_.set_coef(p.head(zero_.size()));
  mean_.set_coef(p.segment(zero_.size(), mean_.size()));
  if (!(p(p.size() - 1) > 0.0)) throw std::domain_error("Gamma shape alpha must be positive");
  alpha_ = p(p.size() - 1);
}

std::vector<std::string> SemiContinuousMarginal::parameter_names() const {
  std::vector<std::string> out;
  append_names(out, "zero", zero_);
  append_names(out, "mean", mean_);
  out.emplace_back("alpha");
  return out;
}

std::vector<Interval> SemiContinuousMarginal::parameter_bounds() const {
  std::vector<Interval> out(static_cast<std::size_t>(zero_.size() + mean_.size()), Interval{});
  out.push_back({0.0, kInf});
  return out;
}

// ---------------------------------------------------------------------------
// GammaMarginal
// ---------------------------------------------------------------------------

GammaMarginal::GammaMarginal(LinearPredictor mean, double alpha) : mean_(std::move(mean)), alpha_(alpha) {
  if (!(alpha_ > 0.0)) throw std::domain_error("Gamma shape alpha must be positive");
}

CdfPoint GammaMarginal::evaluate(const CovRow& x, double y) const {
  CdfPoint out;
  if (y <= 0.0) return out;
  const double scale = std::exp(mean_.eval(x)) / alpha_;
  out.F = gamma_cdf(y, alpha_, scale);
  out.F_minus = out.F;
  out.f = std::exp(gamma_log_pdf(y, alpha_, scale));
  return out;
}

double GammaMarginal::log_density(const CovRow& x, double y) const {
  if (y <= 0.0) return -kInf;
  return gamma_log_pdf(y, alpha_, std::exp(mean_.eval(x)) / alpha_);
}

double GammaMarginal::quantile(const CovRow& x, double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must lie in (0, 1)");
  return gamma_quantile(p, alpha_, std::exp(mean_.eval(x)) / alpha_);
}

Eigen::VectorXd GammaMarginal::parameters() const {
  Eigen::VectorXd a(1);
  a(0) = alpha_;
  return concat({mean_.coef(), a});
}

void GammaMarginal::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& p) {
  require_size(p, mean_.size() + 1);
  mean_.set_coef(p.head(mean_.size()));
  if (!(p(p.size() - 1) > 0.0)) throw std::domain_error("Gamma shape alpha must be positive");
  alpha_ = p(p.size() - 1);
}

std::vector<std::string> GammaMarginal::parameter_names() const {
  std::vector<std::string> out;
  append_names(out, "mean", mean_);
  out.emplace_back("alpha");
  return out;
}

std::vector<Interval> GammaMarginal::parameter_bounds() const {
  std::vector<Interval> out(static_cast<std::size_t>(mean_.size()), Interval{});
  out.push_back({0.0, kInf});
  return out;
}

// ---------------------------------------------------------------------------
// Construction and fitting
// ---------------------------------------------------------------------------

Scale scale_of_family(const std::string& family) {
  if (family == "logit-gamma") return Scale::SemiContinuous;
  if (family == "gamma") return Scale::Continuous;
  static const char* counts[] = {"poisson", "nb2", "zip", "zinb", "zoip", "zoinb", "oip", "oinb"};
  for (const char* c : counts)
    if (family == c) return Scale::Discrete;
  throw std::invalid_argument("unknown marginal family '" + family + "'");
}

std::unique_ptr<Marginal> make_marginal(const MarginalSpec& spec) {
  if (spec.mean_terms.empty()) throw std::invalid_argument("marginal mean needs at least one term");
  switch (scale_of_family(spec.family)) {
    case Scale::Discrete:
      return std::make_unique<CountMarginal>(
          CountMarginal::from_family(spec.family, spec.mean_terms, spec.inflation_terms));
    case Scale::SemiContinuous:
      if (spec.inflation_terms.empty()) throw std::invalid_argument("zero-mass model needs at least one term");
      return std::make_unique<SemiContinuousMarginal>(LinearPredictor(spec.inflation_terms),
                                                      LinearPredictor(spec.mean_terms), 1.0);
    case Scale::Continuous:
      return std::make_unique<GammaMarginal>(LinearPredictor(spec.mean_terms), 1.0);
  }
  throw std::invalid_argument("unknown marginal family '" + spec.family + "'");
}

namespace {

struct OutcomeRows {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

OutcomeRows collect_rows(const PanelDataset& data, int j) {
  OutcomeRows r;
  const Eigen::Index n = static_cast<Eigen::Index>(data.n_subjects()) * data.n_periods();
  r.x.resize(n, data.n_covariates());
  r.y.resize(n);
  Eigen::Index k = 0;
  for (int i = 0; i < data.n_subjects(); ++i)
    for (int t = 0; t < data.n_periods(); ++t, ++k) {
      r.x.row(k) = data.covariates(i, j, t);
      r.y(k) = data.value(i, j, t);
    }
  return r;
}

void check_rank(const LinearPredictor& lp, const Eigen::MatrixXd& x, const std::string& what) {
  const Eigen::MatrixXd d = lp.design(x);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d);
  qr.setThreshold(1e-10);
  if (qr.rank() < d.cols())
    throw DataError("design matrix for " + what + " is rank deficient (rank " + std::to_string(qr.rank()) +
                    " < " + std::to_string(d.cols()) + ")");
}

/// Least-squares coefficients of `target` on the predictor's design.
Eigen::VectorXd ols(const LinearPredictor& lp, const Eigen::MatrixXd& x, const Eigen::VectorXd& target) {
  const Eigen::MatrixXd d = lp.design(x);
  return d.colPivHouseholderQr().solve(target);
}

void data_driven_start(Marginal& m, const OutcomeRows& rows) {
  const Eigen::Index n = rows.y.size();
  if (auto* c = dynamic_cast<CountMarginal*>(&m)) {
    Eigen::VectorXd p = c->parameters();
    const Eigen::VectorXd target = (rows.y.array() + 0.5).log().matrix();
    p.head(c->mean_predictor().size()) = ols(c->mean_predictor(), rows.x, target);
    c->set_parameters(p);
    return;
  }
  std::vector<Eigen::Index> pos;
  for (Eigen::Index k = 0; k < n; ++k)
    if (rows.y(k) > 0.0) pos.push_back(k);
  if (pos.empty()) return;
  Eigen::MatrixXd xp(static_cast<Eigen::Index>(pos.size()), rows.x.cols());
  Eigen::VectorXd ly(static_cast<Eigen::Index>(pos.size()));
  for (std::size_t k = 0; k < pos.size(); ++k) {
    xp.row(static_cast<Eigen::Index>(k)) = rows.x.row(pos[k]);
    ly(static_cast<Eigen::Index>(k)) = std::log(rows.y(pos[k]));
  }
  const LinearPredictor* mean = nullptr;
  if (auto* s = dynamic_cast<SemiContinuousMarginal*>(&m)) mean = &s->mean_predictor();
  if (auto* g = dynamic_cast<GammaMarginal*>(&m)) mean = &g->mean_predictor();
  if (!mean || static_cast<Eigen::Index>(pos.size()) <= mean->size()) return;
  const Eigen::VectorXd gamma = ols(*mean, xp, ly);
  const Eigen::VectorXd resid = ly - mean->design(xp) * gamma;
  const double var = std::max(resid.squaredNorm() / static_cast<double>(pos.size() - 1), 1e-12);
  // Var(log Y) is about 1/alpha for a Gamma; the mean shifts by -var/2 on the log scale.
  const double alpha = std::clamp(1.0 / var, 1e-2, 1e7);
  Eigen::VectorXd p = m.parameters();
  if (auto* s = dynamic_cast<SemiContinuousMarginal*>(&m)) {
    const double zero_frac = std::clamp(1.0 - static_cast<double>(pos.size()) / static_cast<double>(n), 0.01, 0.99);
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(s->zero_predictor().size());
    delta(0) = std::log(zero_frac / (1.0 - zero_frac));
    p.head(delta.size()) = delta;
    p.segment(delta.size(), gamma.size()) = gamma;
    p(delta.size()) += 0.5 * var;
  } else {
    p.head(gamma.size()) = gamma;
    p(0) += 0.5 * var;
  }
  p(p.size() - 1) = alpha;
  m.set_parameters(p);
}

double rows_negloglik(const Marginal& m, const OutcomeRows& rows) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < rows.y.size(); ++k) {
    const double lf = m.log_density(rows.x.row(k), rows.y(k));
    if (!(lf > -kInf)) return kInf;
    s -= lf;
  }
  return s;
}

MarginalFit run_fit(std::unique_ptr<Marginal> model, const PanelDataset& data, int outcome, bool from_data,
                    bool with_se) {
  if (outcome < 0 || outcome >= data.n_outcomes()) throw std::out_of_range("fit_marginal: outcome index");
  model->bind(data.covariate_names());
  const OutcomeRows rows = collect_rows(data, outcome);
  const auto n_par = model->parameters().size();
  if (rows.y.size() < n_par)
    throw DataError("outcome '" + data.outcomes()[outcome] + "': fewer observations than parameters");
  for (const auto* lp : std::as_const(*model).predictors())
    check_rank(*lp, rows.x, "outcome '" + data.outcomes()[outcome] + "'");
  if (from_data) data_driven_start(*model, rows);

  const auto bounds = model->parameter_bounds();
  auto work = model->clone();
  auto objective = [&](const Eigen::VectorXd& p) {
    work->set_parameters(p);
    return rows_negloglik(*work, rows);
  };

  OptimizerProblem prob;
  prob.objective = objective;
  prob.bounds = bounds;
  prob.initial = model->parameters();
  // Keep the start strictly inside capped bounds.
  for (Eigen::Index k = 0; k < prob.initial.size(); ++k) {
    const auto& b = bounds[static_cast<std::size_t>(k)];
    if (std::isfinite(b.lo) && std::isfinite(b.hi))
      prob.initial(k) = std::clamp(prob.initial(k), b.lo + 1e-3 * (b.hi - b.lo), b.hi - 1e-3 * (b.hi - b.lo));
  }
  prob.method = OptimizerMethod::Bfgs;
  prob.tolerance = 1e-11;
  prob.max_evals = 40000;
  const OptimizerResult res = minimize(prob);

  model->set_parameters(res.argmin);
  MarginalFit fit;
  fit.loglik = -res.value;
  fit.aic = 2.0 * static_cast<double>(n_par) - 2.0 * fit.loglik;
  fit.converged = res.converged;
  fit.n_obs = static_cast<int>(rows.y.size());
  const auto names = model->parameter_names();
  for (Eigen::Index k = 0; k < res.argmin.size(); ++k) {
    const auto& b = bounds[static_cast<std::size_t>(k)];
    if (b.hi == kInflationCap && std::abs(res.argmin(k)) > kInflationCap - 1.0) fit.boundary = true;
  }

  fit.se = Eigen::VectorXd::Constant(n_par, std::numeric_limits<double>::quiet_NaN());
  if (with_se) {
    try {
      const Eigen::MatrixXd h = numeric_hessian(objective, res.argmin);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (h + h.transpose()));
      if (eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0) {
        const Eigen::MatrixXd cov = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                                    eig.eigenvectors().transpose();
        fit.se = cov.diagonal().cwiseSqrt();
      }
    } catch (const std::exception&) {
      // Hessian probes can step outside the parameter domain near a bound.
    }
  }
  fit.model = std::shared_ptr<const Marginal>(std::move(model));
  return fit;
}

}  // namespace

MarginalFit fit_marginal(const MarginalSpec& spec, const PanelDataset& data, int outcome) {
  return run_fit(make_marginal(spec), data, outcome, true, true);
}

MarginalFit fit_marginal(const Marginal& start, const PanelDataset& data, int outcome, bool with_se) {
  return run_fit(start.clone(), data, outcome, false, with_se);
}

double marginal_loglik(const Marginal& m, const PanelDataset& data, int outcome) {
  auto bound = m.clone();
  bound->bind(data.covariate_names());
  return -rows_negloglik(*bound, collect_rows(data, outcome));
}

GofTable chisq_gof(const CountMarginal& m, const PanelDataset& data, int outcome, int top) {
  if (top < 1) throw std::invalid_argument("chisq_gof: top category must be >= 1");
  CountMarginal bound = m;
  bound.bind(data.covariate_names());
  const OutcomeRows rows = collect_rows(data, outcome);
  if (rows.y.size() == 0) throw DataError("chisq_gof: no observations");
  std::vector<double> obs(static_cast<std::size_t>(top) + 1, 0.0), expct(static_cast<std::size_t>(top) + 1, 0.0);
  for (Eigen::Index k = 0; k < rows.y.size(); ++k) {
    const auto x = rows.x.row(k);
    const int y = static_cast<int>(rows.y(k));
    obs[static_cast<std::size_t>(std::min(y, top))] += 1.0;
    double below = 0.0;
    for (int c = 0; c < top; ++c) {
      const double p = bound.pmf(x, c);
      expct[static_cast<std::size_t>(c)] += p;
      below += p;
    }
    expct[static_cast<std::size_t>(top)] += std::max(0.0, 1.0 - below);
  }
  GofTable g;
  for (int c = 0; c < top; ++c) g.labels.push_back(std::to_string(c));
  g.labels.push_back(">=" + std::to_string(top));
  g.observed = obs;
  g.expected = expct;
  while (g.expected.size() > 1 && g.expected.back() < 1.0) {
    const double e = g.expected.back(), o = g.observed.back();
    g.expected.pop_back();
    g.observed.pop_back();
    g.labels.pop_back();
    g.expected.back() += e;
    g.observed.back() += o;
    g.labels.back() = ">=" + g.labels.back();
  }
  if (g.expected.back() < 1.0) throw DataError("chisq_gof: total expected count below 1");
  for (std::size_t c = 0; c < g.expected.size(); ++c) {
    const double d = g.observed[c] - g.expected[c];
    g.statistic += d * d / g.expected[c];
  }
  return g;
}

}  // namespace mlv
