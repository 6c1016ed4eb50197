#pragma once

#include "mlvine/bicop.hpp"
#include "mlvine/dataset.hpp"
#include "mlvine/marginals.hpp"
#include "mlvine/pair.hpp"

#include <vector>

namespace mlv {

/// Marginal (F, F-, f) of one outcome in each period, in time order.
using Trajectory = std::vector<CdfPoint>;

/// D-vine over the periods of one outcome: tree k joins periods lag k apart
/// given the k-1 periods in between, with one copula shared by all pairs of
/// the tree. Trees above the truncation level are independence.
class DVineModel {
 public:
  DVineModel() = default;
  /// truncation_level < 0 means no truncation (= number of trees).
  DVineModel(Scale scale, std::vector<BivariateCopula> trees, int truncation_level = -1);

  Scale scale() const { return scale_; }
  const std::vector<BivariateCopula>& trees() const { return trees_; }
  int n_trees() const { return static_cast<int>(trees_.size()); }
  int truncation_level() const { return truncation_; }
  bool truncated() const { return truncation_ < n_trees(); }

  /// Copula joining periods `lag` apart. Lags beyond the stored trees reuse
  /// the top tree of an untruncated vine and are independence otherwise.
  const BivariateCopula& copula_for_lag(int lag) const;

  /// Same trees with everything above `level` replaced by independence.
  DVineModel truncate(int level) const;

 private:
  Scale scale_ = Scale::Continuous;
  std::vector<BivariateCopula> trees_;
  int truncation_ = 0;
};

/// Conditional distributions filled tree by tree for one trajectory.
/// fwd[k][t] is y_t given the k periods before it; bwd[k][s] is y_s given
/// the k periods after it; pair[k][s] is the (conditional) joint term of
/// periods s and s + k in tree k (index 0 unused).
struct VineWorkspace {
  std::vector<std::vector<CdfPoint>> fwd;
  std::vector<std::vector<CdfPoint>> bwd;
  std::vector<std::vector<double>> pair;
  long floored = 0;
};

VineWorkspace step1_evaluate(const DVineModel& m, const Trajectory& traj);

/// Sum over periods of log f(y_t | y_1..y_{t-1}).
double loglik(const DVineModel& m, const Trajectory& traj);
/// The same quantity from the pair-copula product: marginal log terms plus
/// log pair terms divided by their conditional margins.
double loglik_product(const DVineModel& m, const Trajectory& traj);

double pair_joint_continuous(const BivariateCopula& c, double f_s, double f_t, double F_s, double F_t);
double pair_joint_discrete(const BivariateCopula& c, double F_s, double F_s_minus, double F_t, double F_t_minus);
/// A zero outcome is an atom with mass F (its conditional zero probability).
double pair_joint_semicontinuous(const BivariateCopula& c, bool s_zero, bool t_zero, double f_s, double f_t,
                                 double F_s, double F_t);

/// Distribution of the next period given an observed history.
class ConditionalPredictor {
 public:
  ConditionalPredictor(const DVineModel& m, const Trajectory& history);

  /// (F, F-, f) of y given the history, from the marginal point of y.
  CdfPoint condition(const CdfPoint& marginal) const;

  /// cdf of the next value at y.
  double cdf(const Marginal& marginal, const CovRow& x, double y) const;
  /// Smallest y with conditional cdf >= u.
  double quantile(const Marginal& marginal, const CovRow& x, double u) const;

  long floored() const { return floored_; }

 private:
  std::vector<const BivariateCopula*> copulas_;
  std::vector<CdfPoint> given_;
  mutable long floored_ = 0;
};

double conditional_cdf_next(const DVineModel& m, const Trajectory& history, const Marginal& marginal,
                            const CovRow& x, double y);
double conditional_quantile_next(const DVineModel& m, const Trajectory& history, const Marginal& marginal,
                                 const CovRow& x, double u);

/// Families tried in each tree by default.
std::vector<CopulaFamily> default_candidates();

struct CandidateFit {
  CopulaFamily family;
  double theta = 0.0;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = true;
};

struct TreeFit {
  BivariateCopula copula;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = true;
  std::vector<CandidateFit> candidates;
};

/// (conditional) margins of the two periods of each pair in a tree.
using TreePairs = std::vector<std::pair<CdfPoint, CdfPoint>>;

/// Maximizes the common-parameter likelihood of a tree for each candidate and
/// returns the AIC-minimal one. A single candidate is returned as is.
/// Non-converged candidates are dropped unless none converged.
TreeFit fit_tree(const TreePairs& pairs, const std::vector<CopulaFamily>& candidates, int threads = 1,
                 const double* start_theta = nullptr);

struct VineFitOptions {
  std::vector<CopulaFamily> candidates = default_candidates();
  /// Upper bound on fitted trees; < 0 means all T - 1.
  int max_trees = -1;
  /// Re-estimate all tree parameters jointly after the tree-wise pass.
  bool simultaneous = false;
  int threads = 1;
};

struct VineFit {
  DVineModel model;
  std::vector<TreeFit> trees;
  long floored = 0;
};

/// Tree-by-tree estimation from the lowest tree up; selecting independence
/// at a tree truncates the vine there.
VineFit fit_dvine(Scale scale, const std::vector<Trajectory>& data, const VineFitOptions& options = {});
/// Re-estimates the parameters of a given structure (same families per tree,
/// same truncation), starting from its current parameters.
VineFit refit_dvine(const DVineModel& structure, const std::vector<Trajectory>& data, bool simultaneous = false);

/// Marginal trajectories of outcome j for every subject.
std::vector<Trajectory> marginal_trajectories(const Marginal& m, const PanelDataset& data, int outcome);

}  // namespace mlv
