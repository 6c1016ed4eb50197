#include "mlvine/predict.hpp"

#include "mlvine/errors.hpp"
#include "mlvine/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace mlv {

double PredictiveSample::cdf(double s) const {
  return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), s) - sorted.begin()) /
         static_cast<double>(sorted.size());
}

double PredictiveSample::cdf_minus(double s) const {
  return static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), s) - sorted.begin()) /
         static_cast<double>(sorted.size());
}

PredictiveSample make_sample(std::vector<double> draws, bool discrete, std::string subject) {
  if (draws.empty()) throw std::invalid_argument("predictive sample: no draws");
  PredictiveSample s;
  s.subject = std::move(subject);
  s.sorted = draws;
  std::sort(s.sorted.begin(), s.sorted.end());
  s.draws = std::move(draws);
  s.discrete = discrete;
  return s;
}

namespace {

std::vector<Trajectory> histories_of(const JointModel& b, const PanelDataset& data, int i) {
  std::vector<Trajectory> out;
  for (const auto& o : b.outcomes()) {
    const int jd = data.outcome_index(o.name);
    Trajectory tr;
    for (int t = 0; t < data.n_periods(); ++t)
      tr.push_back(o.marginal->evaluate(data.covariates(i, jd, t), data.value(i, jd, t)));
    out.push_back(std::move(tr));
  }
  return out;
}

bool all_discrete(const JointModel& m) {
  return std::all_of(m.outcomes().begin(), m.outcomes().end(),
                     [](const OutcomeModel& o) { return o.marginal->scale() == Scale::Discrete; });
}

}  // namespace

PredictiveSample predictive_sample(const JointModel& b, const PanelDataset& history, int subject,
                                   const std::vector<Eigen::RowVectorXd>& next_covariates, int B, RngStream& rng) {
  if (B < 1) throw std::invalid_argument("predictive_sample: B must be positive");
  for (const auto& x : next_covariates)
    if (x.size() != history.n_covariates()) throw DataError("predictive_sample: covariate row does not match schema");
  const NextPeriodSampler sampler(b, histories_of(b, history, subject), next_covariates, true);
  std::vector<double> draws(static_cast<std::size_t>(B));
  Eigen::VectorXd y;
  for (auto& d : draws) {
    sampler.draw(rng, y);
    d = y.sum();
  }
  return make_sample(std::move(draws), all_discrete(b), history.subjects()[static_cast<std::size_t>(subject)]);
}

double generalized_transform(const PredictiveSample& sample, double observed, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("generalized_transform: v must lie in [0, 1]");
  const double lo = sample.cdf_minus(observed);
  return lo + v * (sample.cdf(observed) - lo);
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      s += std::exp(-m * m * pi2 / (8.0 * x * x));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / x * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_uniform_test(std::span<const double> u) {
  if (u.empty()) throw std::invalid_argument("ks_uniform_test: no values");
  if (u.size() < 20) throw std::invalid_argument("ks_uniform_test: needs at least 20 values");
  std::vector<double> x(u.begin(), u.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0)) throw std::domain_error("ks_uniform_test: value outside [0, 1]");
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - x[i], x[i] - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_survival(std::sqrt(n) * d)};
}

double rps(const PredictiveSample& sample, double observed) {
  const auto& s = sample.sorted;
  if (sample.discrete) {
    const double top = std::max(s.back(), observed);
    double total = 0.0;
    std::size_t pos = 0;
    for (double k = std::min(s.front(), observed); k <= top; k += 1.0) {
      while (pos < s.size() && s[pos] <= k) ++pos;
      const double F = static_cast<double>(pos) / static_cast<double>(s.size());
      const double d = F - (observed <= k ? 1.0 : 0.0);
      total += d * d;
    }
    return total;
  }
  const double n = static_cast<double>(s.size());
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    a += std::abs(s[i] - observed);
    b += s[i] * (2.0 * static_cast<double>(i) - n + 1.0);
  }
  return a / n - b / (n * n);
}

namespace {

std::map<double, double> empirical_pmf(const PredictiveSample& sample) {
  if (!sample.discrete) throw std::domain_error("score defined for discrete samples only");
  std::map<double, double> p;
  const double w = 1.0 / static_cast<double>(sample.draws.size());
  for (double v : sample.sorted) p[v] += w;
  return p;
}

}  // namespace

double qs(const PredictiveSample& sample, double observed) {
  const auto p = empirical_pmf(sample);
  double ss = 0.0;
  for (const auto& [k, v] : p) ss += v * v;
  const auto it = p.find(observed);
  return -2.0 * (it == p.end() ? 0.0 : it->second) + ss;
}

double sphs(const PredictiveSample& sample, double observed) {
  const auto p = empirical_pmf(sample);
  double ss = 0.0;
  for (const auto& [k, v] : p) ss += v * v;
  const auto it = p.find(observed);
  return -(it == p.end() ? 0.0 : it->second) / std::sqrt(ss);
}

double binomial_upper_tail(int n, int k) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  const double lhalf = n * std::log(0.5);
  double s = 0.0;
  for (int m = k; m <= n; ++m)
    s += std::exp(std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0) + lhalf);
  return std::min(1.0, s);
}

Comparison compare_models(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("compare_models: score vectors differ in length");
  if (a.empty()) throw std::invalid_argument("compare_models: no scores");
  Comparison c;
  c.n = static_cast<int>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i])
      ++c.wins;
    else if (a[i] == b[i])
      ++c.ties;
  }
  const double k = c.wins + 0.5 * c.ties;
  c.fraction = k / c.n;
  c.p_value = binomial_upper_tail(c.n, static_cast<int>(std::ceil(k)));
  return c;
}

ValidationResult validate_model(const JointModel& m, const PanelDataset& train, const PanelDataset& holdout, int B,
                                std::uint64_t seed, std::uint64_t model_id, int threads) {
  if (holdout.n_subjects() == 0) throw DataError("validation: empty hold-out");
  if (holdout.n_periods() != 1) throw DataError("validation: hold-out must contain exactly one period");
  if (holdout.covariate_names() != train.covariate_names())
    throw DataError("validation: hold-out covariates differ from training covariates");
  const JointModel b = m.bound(train.covariate_names());
  std::vector<int> cols;
  for (const auto& o : b.outcomes()) cols.push_back(holdout.outcome_index(o.name));
  const bool discrete = all_discrete(b);

  ValidationResult out;
  out.scores.resize(static_cast<std::size_t>(holdout.n_subjects()));
  parallel_for(out.scores.size(), threads, [&](std::size_t h) {
    const int hi = static_cast<int>(h);
    const std::string& label = holdout.subjects()[h];
    const int i = train.subject_index(label);
    std::vector<Eigen::RowVectorXd> x;
    double observed = 0.0;
    for (int c : cols) {
      x.emplace_back(holdout.covariates(hi, c, 0));
      observed += holdout.value(hi, c, 0);
    }
    RngStream draws(seed, {5, static_cast<std::uint64_t>(i)});
    const PredictiveSample s = predictive_sample(b, train, i, x, B, draws);
    RngStream vs(seed, {6, model_id, static_cast<std::uint64_t>(i)});
    SubjectScore& sc = out.scores[h];
    sc.subject = label;
    sc.observed = observed;
    sc.u = generalized_transform(s, observed, vs.uniform());
    sc.rps = rps(s, observed);
    sc.qs = discrete ? qs(s, observed) : std::numeric_limits<double>::quiet_NaN();
    sc.sphs = discrete ? sphs(s, observed) : std::numeric_limits<double>::quiet_NaN();
  });
  std::vector<double> u;
  for (const auto& sc : out.scores) u.push_back(sc.u);
  if (u.size() >= 20) out.ks = ks_uniform_test(u);
  else out.ks = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  return out;
}

}  // namespace mlv
