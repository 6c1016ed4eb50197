#pragma once

#include "mlvine/numerics.hpp"
#include "mlvine/pair.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mlv {

/// J-variate Gaussian copula joining the outcomes within a period.
class GaussianCrossCopula {
 public:
  GaussianCrossCopula() = default;
  explicit GaussianCrossCopula(CorrelationMatrix corr);
  static GaussianCrossCopula identity(int dim) { return GaussianCrossCopula(CorrelationMatrix::identity(dim)); }

  int dim() const { return corr_.dim(); }
  const CorrelationMatrix& corr() const { return corr_; }
  bool is_identity() const { return identity_; }

  double density(const Eigen::VectorXd& u) const;
  double log_density(const Eigen::VectorXd& u) const;
  double cdf(const Eigen::VectorXd& u) const;
  /// P(lower < U <= upper), computed as a normal rectangle on the z scale.
  double rectangle(const Eigen::VectorXd& lower_u, const Eigen::VectorXd& upper_u) const;
  /// Mixed partial derivative of C in the coordinates of L, evaluated at u.
  /// Throws std::invalid_argument for empty L (use cdf) or L = all.
  double mixed_partial(const Eigen::VectorXd& u, const std::vector<int>& L) const;

  /// Probability-density hybrid: coordinates flagged continuous contribute a
  /// derivative at upper_u, the rest a rectangle (lower_u, upper_u].
  /// Reduces to density, rectangle, or mixed_partial at the extremes.
  double hybrid(const Eigen::VectorXd& lower_u, const Eigen::VectorXd& upper_u,
                const std::vector<bool>& continuous) const;

  /// Bivariate margin (j, k) as a Gaussian pair copula.
  BivariateCopula pair(int j, int k) const;

 private:
  CorrelationMatrix corr_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
  bool identity_ = true;
};

/// One row per subject-period: the conditional distribution of each outcome
/// given its own history.
using CrossSection = std::vector<CdfPoint>;

/// Sum over outcome pairs and rows of the log bivariate term under the
/// Gaussian pair margins of g.
double pairwise_composite_loglik(const GaussianCrossCopula& g, const std::vector<CrossSection>& rows);

/// Composite log-likelihood of one pair (j, k) at correlation rho.
double pair_composite_loglik(double rho, int j, int k, const std::vector<CrossSection>& rows);

struct CompositeFit {
  GaussianCrossCopula copula;
  /// Unprojected per-pair maximizers, lower triangle by (j, k), j > k.
  Eigen::MatrixXd pairwise_rho;
  bool projected = false;
  bool converged = true;
  double loglik = 0.0;
};

/// Maximizes each pair's composite likelihood separately, then projects the
/// assembled matrix onto positive definite correlations when needed. A start
/// matrix replaces the initial grid search.
CompositeFit fit_pairwise(const std::vector<CrossSection>& rows, int dim, int threads = 1,
                          const Eigen::MatrixXd* start = nullptr);

/// Pair label "a-b" for outcome names a and b.
std::string pair_label(const std::string& a, const std::string& b);

}  // namespace mlv
