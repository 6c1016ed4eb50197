#pragma once

#include "mlvine/crosscop.hpp"
#include "mlvine/dataset.hpp"
#include "mlvine/dvine.hpp"
#include "mlvine/marginals.hpp"
#include "mlvine/rng.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mlv {

/// One outcome: its marginal regression and its D-vine over periods.
struct OutcomeModel {
  std::string name;
  std::shared_ptr<const Marginal> marginal;
  DVineModel vine;
};

/// J marginals, J D-vines and the Gaussian copula joining the outcomes
/// within a period, conditional on each outcome's own history.
class JointModel {
 public:
  JointModel() = default;
  JointModel(std::vector<OutcomeModel> outcomes, GaussianCrossCopula cross);

  int n_outcomes() const { return static_cast<int>(outcomes_.size()); }
  const std::vector<OutcomeModel>& outcomes() const { return outcomes_; }
  const OutcomeModel& outcome(int j) const { return outcomes_[static_cast<std::size_t>(j)]; }
  const GaussianCrossCopula& cross() const { return cross_; }

  /// Copy whose marginals are bound to the covariate columns of `schema`.
  JointModel bound(const std::vector<std::string>& schema) const;
  /// Same marginals with independence trees and identity correlation.
  JointModel independence() const;

 private:
  std::vector<OutcomeModel> outcomes_;
  GaussianCrossCopula cross_;
};

/// Log of f(y_t | history) for one subject-period from the conditional
/// points of each outcome. Atoms enter through rectangle probabilities,
/// continuous values through copula derivatives times their densities.
double period_loglik(const JointModel& m, const CrossSection& points, long* floored = nullptr);

/// Conditional points of every period for subject i: rows[t][j].
std::vector<CrossSection> conditional_points(const JointModel& bound_model, const PanelDataset& data, int subject,
                                             long* floored = nullptr);

/// Sum over subjects and periods of period_loglik.
double total_loglik(const JointModel& m, const PanelDataset& data, long* floored = nullptr);

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Draws the next period of all outcomes given the histories, with the
/// covariate rows of that period. For discrete outcomes the conditional cdf
/// can be tabulated once when many draws are needed.
class NextPeriodSampler {
 public:
  NextPeriodSampler(const JointModel& bound_model, const std::vector<Trajectory>& histories,
                    std::vector<Eigen::RowVectorXd> covariates, bool tabulate = false);

  void draw(RngStream& rng, Eigen::VectorXd& y) const;
  /// Value of outcome j at conditional probability u.
  double quantile(int j, double u) const;

 private:
  const JointModel* model_;
  std::vector<ConditionalPredictor> predictors_;
  std::vector<Eigen::RowVectorXd> x_;
  std::vector<std::vector<double>> tables_;
  Eigen::MatrixXd chol_;
};

/// Fills covariates for subject i in every outcome and period.
using CovariateGenerator = std::function<void(PanelDataset& data, int subject, RngStream& rng)>;

/// X1 ~ N(0,1) per subject-outcome-period and X2 ~ Bernoulli(0.4) per
/// subject-outcome, in columns "x1" and "x2".
CovariateGenerator normal_bernoulli_covariates(double p = 0.4);

/// New panel of n subjects, `periods` periods, covariates from gen.
PanelDataset simulate_dataset(const JointModel& m, int n_subjects, int periods,
                              const std::vector<std::string>& covariates, const CovariateGenerator& gen,
                              std::uint64_t seed, int threads = 1);
/// Redraws the values of an existing panel, keeping its covariates.
PanelDataset simulate_values(const JointModel& m, const PanelDataset& skeleton, std::uint64_t seed,
                             int threads = 1);

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

struct OutcomeSpec {
  std::string name;
  MarginalSpec marginal;
  std::vector<CopulaFamily> candidates = default_candidates();
};

struct FitOptions {
  std::vector<OutcomeSpec> outcomes;
  int max_trees = -1;
  /// Joint refit of all trees of a vine after the tree-wise pass.
  bool simultaneous = false;
  int bootstrap_reps = 0;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Largest tolerated fraction of failed bootstrap replicates.
  double max_failure_rate = 0.2;
};

struct NamedValue {
  std::string name;
  double value = 0.0;
};

/// zeta:<outcome>:<tree> for fitted trees below the truncation level and
/// rho:<a>-<b> for outcome pairs.
std::vector<NamedValue> dependence_parameters(const JointModel& m);
/// beta:<outcome>:<parameter> for every marginal parameter.
std::vector<NamedValue> marginal_parameters(const JointModel& m);

struct ParameterRow {
  std::string name;
  double estimate = 0.0;
  /// Bootstrap standard error; NaN without bootstrap.
  double se = 0.0;
  /// Inverse-Hessian standard error for marginal parameters, NaN otherwise.
  double hessian_se = 0.0;
};

struct FitReport {
  std::vector<MarginalFit> marginals;
  std::vector<VineFit> vines;
  CompositeFit cross;
  std::vector<ParameterRow> parameters;
  double loglik = 0.0;
  int bootstrap_successes = 0;
  int bootstrap_failures = 0;
  long floored = 0;
  bool converged = true;
  /// Wall-clock seconds of stages 1, 2, 3 and the bootstrap.
  double seconds[4] = {0, 0, 0, 0};
};

struct StagewiseFit {
  JointModel model;
  FitReport report;
};

/// Stage 1 marginals, stage 2 tree-wise vines, stage 3 pairwise composite
/// likelihood; parametric bootstrap SEs when bootstrap_reps > 0. Throws
/// ConvergenceError when too many bootstrap replicates fail.
StagewiseFit fit_stagewise(const FitOptions& options, const PanelDataset& data);

/// Refit of a fitted model's structure (families, truncation) to new data,
/// starting from its parameters. Without diagnostics the total
/// log-likelihood and Hessian standard errors are skipped.
StagewiseFit refit_stagewise(const JointModel& start, const PanelDataset& data, bool simultaneous = false,
                             int threads = 1, bool diagnostics = true);

struct BootstrapResult {
  std::vector<std::string> names;
  /// Successful replicates by parameter (rows follow names).
  std::vector<std::vector<double>> draws;
  std::vector<double> se;
  int successes = 0;
  int failures = 0;
};

/// Simulates `reps` panels from m on the covariates of `data`, refits each
/// and reports the SD of every parameter. Needs at least 30 reps.
BootstrapResult parametric_bootstrap(const JointModel& m, const PanelDataset& data, int reps, std::uint64_t seed,
                                     int threads = 1, double max_failure_rate = 0.2, bool simultaneous = false);

}  // namespace mlv
