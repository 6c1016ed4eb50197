#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace mlv {

enum class Scale { Continuous, Discrete, SemiContinuous };

std::string to_string(Scale s);
Scale parse_scale(const std::string& s);

/// Balanced long-format panel: every subject has every outcome in every
/// period. Values and covariate rows are stored per (subject, outcome, period)
/// cell; period indices are 0-based internally, first_period() gives the label
/// of index 0.
class PanelDataset {
 public:
  PanelDataset() = default;
  PanelDataset(std::vector<std::string> subjects, std::vector<std::string> outcomes, int periods,
               std::vector<std::string> covariates, int first_period = 1);

  int n_subjects() const { return static_cast<int>(subjects_.size()); }
  int n_outcomes() const { return static_cast<int>(outcomes_.size()); }
  int n_periods() const { return periods_; }
  int n_covariates() const { return static_cast<int>(covariates_.size()); }
  int first_period() const { return first_period_; }

  const std::vector<std::string>& subjects() const { return subjects_; }
  const std::vector<std::string>& outcomes() const { return outcomes_; }
  const std::vector<std::string>& covariate_names() const { return covariates_; }

  /// Index of an outcome or subject label; throws DataError if absent.
  int outcome_index(const std::string& name) const;
  int subject_index(const std::string& name) const;

  double value(int i, int j, int t) const { return values_(cell(i, j, t)); }
  double& value(int i, int j, int t) { return values_(cell(i, j, t)); }
  auto covariates(int i, int j, int t) const { return x_.row(cell(i, j, t)); }
  auto covariates(int i, int j, int t) { return x_.row(cell(i, j, t)); }

  /// Periods [first, first + count) as a new panel (0-based indices).
  PanelDataset slice_periods(int first, int count) const;

 private:
  Eigen::Index cell(int i, int j, int t) const {
    return (static_cast<Eigen::Index>(i) * n_outcomes() + j) * periods_ + t;
  }

  std::vector<std::string> subjects_;
  std::vector<std::string> outcomes_;
  std::vector<std::string> covariates_;
  int periods_ = 0;
  int first_period_ = 1;
  Eigen::VectorXd values_;
  Eigen::MatrixXd x_;
};

/// Header: subject_id,outcome_id,period,value,<covariate columns>. Throws
/// DataError naming the offending line for syntax, duplicate or balance
/// violations.
PanelDataset read_panel_csv(std::istream& in);
PanelDataset read_panel_csv(const std::string& path);
void write_panel_csv(std::ostream& out, const PanelDataset& data);

/// Checks values against the scale of each outcome (nonnegative; integral for
/// discrete). Throws DataError naming the first violating cell.
void validate_scales(const PanelDataset& data, const std::vector<Scale>& scales);

}  // namespace mlv

namespace mlv {

/// Shortest decimal text that reads back to the same double.
std::string format_real(double x);

}  // namespace mlv
