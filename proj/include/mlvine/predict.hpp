#pragma once

#include "mlvine/dataset.hpp"
#include "mlvine/joint.hpp"
#include "mlvine/rng.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mlv {

/// Monte Carlo draws of the next-period aggregate S = sum_j y_j for one
/// subject. `sorted` holds the same draws in increasing order.
struct PredictiveSample {
  std::string subject;
  std::vector<double> draws;
  std::vector<double> sorted;
  /// All outcomes discrete, so S is integer valued.
  bool discrete = false;

  int size() const { return static_cast<int>(draws.size()); }
  /// Empirical cdf at s and its left limit.
  double cdf(double s) const;
  double cdf_minus(double s) const;
};

PredictiveSample make_sample(std::vector<double> draws, bool discrete, std::string subject = {});

/// B draws of S for subject i of `history` (periods 1..T), given the
/// covariate rows of period T+1 for each outcome.
PredictiveSample predictive_sample(const JointModel& bound_model, const PanelDataset& history, int subject,
                                   const std::vector<Eigen::RowVectorXd>& next_covariates, int B, RngStream& rng);

/// F(s-) + v (F(s) - F(s-)) under the empirical cdf of the sample.
double generalized_transform(const PredictiveSample& sample, double observed, double v);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sided one-sample KS test against Uniform(0, 1), with the asymptotic
/// Kolmogorov distribution at sqrt(n) D. Requires n >= 20.
KsResult ks_uniform_test(std::span<const double> u);
/// P(K > x) for the Kolmogorov distribution.
double kolmogorov_survival(double x);

/// Ranked probability score for discrete samples; CRPS of the empirical
/// distribution otherwise. Lower is better.
double rps(const PredictiveSample& sample, double observed);
/// Quadratic and spherical scores; discrete samples only.
double qs(const PredictiveSample& sample, double observed);
double sphs(const PredictiveSample& sample, double observed);

struct Comparison {
  int n = 0;
  int wins = 0;
  int ties = 0;
  /// Share of subjects where A scores lower, ties counted as half.
  double fraction = 0.0;
  /// One-sided exact binomial P(Bin(n, 1/2) >= ceil(wins + ties / 2)).
  double p_value = 1.0;
};

Comparison compare_models(std::span<const double> scores_a, std::span<const double> scores_b);
/// P(Bin(n, 1/2) >= k).
double binomial_upper_tail(int n, int k);

struct SubjectScore {
  std::string subject;
  double observed = 0.0;
  double u = 0.0;
  double rps = 0.0;
  double qs = 0.0;
  double sphs = 0.0;
};

struct ValidationResult {
  std::vector<SubjectScore> scores;
  KsResult ks;
};

/// Predicts period T+1 of every subject in `holdout` (one period, same
/// subjects and outcomes as `train`) from its training history, and scores
/// the observed aggregate. Draws use a stream per subject shared by all
/// models; the transform uses a separate v stream per (subject, model_id).
ValidationResult validate_model(const JointModel& m, const PanelDataset& train, const PanelDataset& holdout, int B,
                                std::uint64_t seed, std::uint64_t model_id, int threads = 1);

}  // namespace mlv
