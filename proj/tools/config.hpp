#pragma once

#include "mlvine/joint.hpp"
#include "mlvine/serialize.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mlv::cli {

/// Data-generating description of one outcome.
struct OutcomeConfig {
  OutcomeSpec spec;
  /// Marginal parameters by name; empty when the config only fits.
  std::vector<NamedValue> true_parameters;
  std::vector<std::pair<std::string, double>> true_trees;
  int true_truncation = -1;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  int n_subjects = 500;
  int periods = 4;
  int holdout_periods = 1;
  int replications = 1;
  int bootstrap_reps = 0;
  int monte_carlo_draws = 10000;
  int threads = 1;
  int max_trees = -1;
  bool simultaneous = false;
  double max_failure_rate = 0.1;
  std::vector<std::string> covariates{"x1", "x2"};
  std::string covariate_generator = "normal-bernoulli";
  double bernoulli_p = 0.4;
  std::vector<OutcomeConfig> outcomes;
  /// Cross correlation of the data-generating model; identity when absent.
  std::optional<Eigen::MatrixXd> correlation;

  bool has_truth() const;
  /// Data-generating model; throws ConfigError when parameters are missing.
  JointModel truth() const;
  FitOptions fit_options(std::uint64_t seed) const;
  CovariateGenerator generator() const;
};

/// Parses and validates a JSON config. Errors are ConfigError with the path
/// of the offending field, e.g. "outcomes[1].marginal.family".
RunConfig parse_config(const Json& j);
RunConfig read_config(const std::string& path);

}  // namespace mlv::cli
