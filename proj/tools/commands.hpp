#pragma once

#include "config.hpp"
#include "mlvine/predict.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mlv::cli {

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = ".";
};

/// Writes text to path through a temporary file and a rename.
void write_atomic(const std::string& path, const std::string& text);

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  int n = 0;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;
  double mc_se = 0.0;
  /// Share of replications whose estimate +- z SE covers the truth.
  double cover90 = 0.0;
  double cover95 = 0.0;
  double cover99 = 0.0;
};

struct ExperimentResult {
  int replications = 0;
  int failures = 0;
  std::vector<ParameterSummary> rows;
  /// Per replication: named estimates and bootstrap SEs (empty on failure).
  std::vector<std::vector<ParameterRow>> estimates;
};

/// Simulates and refits `replications` panels from the config's model.
ExperimentResult run_experiment(const RunConfig& cfg, std::uint64_t seed, int threads, std::ostream* log = nullptr);
std::string experiment_csv(const ExperimentResult& r);
std::string experiment_json(const ExperimentResult& r);

struct ValidationReport {
  ValidationResult copula;
  ValidationResult independence;
  Comparison rps;
  std::optional<Comparison> qs;
  std::optional<Comparison> sphs;
};

ValidationReport run_validation(const JointModel& m, const PanelDataset& train, const PanelDataset& holdout, int B,
                                std::uint64_t seed, int threads);

/// Command entry points. Each returns a process exit code and throws
/// ConfigError, DataError or ConvergenceError on failure.
int cmd_simulate(const RunConfig& cfg, const CommonOptions& opt);
int cmd_experiment(const RunConfig& cfg, const CommonOptions& opt);
int cmd_fit(const RunConfig& cfg, const std::string& data_path, const CommonOptions& opt);
int cmd_validate(const RunConfig& cfg, const std::string& model_path, const std::string& train_path,
                 const std::string& holdout_path, const CommonOptions& opt);
/// Prints family,theta,tau for a given theta or tau.
int cmd_tau(const std::string& family, std::optional<double> theta, std::optional<double> tau, std::ostream& out);

/// Full command-line entry; returns the exit code.
int run_cli(int argc, char** argv);

}  // namespace mlv::cli
