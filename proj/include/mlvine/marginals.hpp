#pragma once

#include "mlvine/dataset.hpp"
#include "mlvine/numerics.hpp"
#include "mlvine/pair.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace mlv {

/// A covariate row; accepts vectors and (strided) matrix rows without a copy.
using CovRow = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

inline constexpr const char* kIntercept = "(Intercept)";

/// x'beta over named covariates. Terms are resolved to column positions by
/// bind(); the intercept term needs no column.
class LinearPredictor {
 public:
  LinearPredictor() = default;
  explicit LinearPredictor(std::vector<std::string> terms);
  LinearPredictor(std::vector<std::string> terms, Eigen::VectorXd coef);

  const std::vector<std::string>& terms() const { return terms_; }
  const Eigen::VectorXd& coef() const { return coef_; }
  void set_coef(const Eigen::Ref<const Eigen::VectorXd>& c);
  int size() const { return static_cast<int>(terms_.size()); }

  /// Throws DataError when a term is missing from the schema.
  void bind(const std::vector<std::string>& schema);
  bool bound() const { return columns_.size() == terms_.size(); }

  double eval(const CovRow& x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < columns_.size(); ++k)
      s += coef_(static_cast<Eigen::Index>(k)) * (columns_[k] < 0 ? 1.0 : x(columns_[k]));
    return s;
  }

  /// Rows of the design matrix for this predictor.
  Eigen::MatrixXd design(const Eigen::MatrixXd& covariates) const;

 private:
  std::vector<std::string> terms_;
  Eigen::VectorXd coef_;
  std::vector<int> columns_;
};

class Marginal {
 public:
  virtual ~Marginal() = default;

  virtual Scale scale() const = 0;
  /// Family string as used in configs, e.g. "zoinb" or "logit-gamma".
  virtual std::string family() const = 0;

  virtual CdfPoint evaluate(const CovRow& x, double y) const = 0;
  double cdf(const CovRow& x, double y) const { return evaluate(x, y).F; }
  /// log of the mass or density at y.
  virtual double log_density(const CovRow& x, double y) const { return std::log(evaluate(x, y).f); }
  /// inf { y : F(y) >= p } for p in (0, 1).
  virtual double quantile(const CovRow& x, double p) const = 0;

  /// Parameters flattened in a fixed order, with names and fitting bounds.
  virtual Eigen::VectorXd parameters() const = 0;
  virtual void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& p) = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual std::vector<Interval> parameter_bounds() const = 0;

  virtual std::vector<LinearPredictor*> predictors() = 0;
  std::vector<const LinearPredictor*> predictors() const;
  void bind(const std::vector<std::string>& schema);

  virtual std::unique_ptr<Marginal> clone() const = 0;
};

enum class CountBase { Poisson, NegBin2 };
enum class Inflation { None, Zero, One, ZeroAndOne };

/// Zero/one-inflated Poisson or NB2 regression:
/// f(y) = p0 1{y=0} + p1 1{y=1} + (1 - p0 - p1) g(y), with log-linear mean for
/// g and a multinomial logit for (p0, p1). NB2 variance is mu + mu^2 / phi.
class CountMarginal final : public Marginal {
 public:
  CountMarginal(CountBase base, Inflation inflation, LinearPredictor mean, double phi = 1.0,
                LinearPredictor zero = {}, LinearPredictor one = {});

  /// Builds from a family string: poisson, nb2, zip, zinb, zoip, zoinb, oip, oinb.
  static CountMarginal from_family(const std::string& family, const std::vector<std::string>& mean_terms,
                                   const std::vector<std::string>& inflation_terms);

  CountBase base() const { return base_; }
  Inflation inflation() const { return inflation_; }
  double phi() const { return phi_; }
  const LinearPredictor& mean_predictor() const { return mean_; }
  const LinearPredictor& zero_predictor() const { return zero_; }
  const LinearPredictor& one_predictor() const { return one_; }

  Scale scale() const override { return Scale::Discrete; }
  std::string family() const override;

  double pmf(const CovRow& x, double y) const;
  double count_cdf(const CovRow& x, double y) const;
  /// (p0, p1) at x; zero where the inflation component is absent.
  std::pair<double, double> inflation_probs(const CovRow& x) const;
  double base_mean(const CovRow& x) const { return std::exp(mean_.eval(x)); }

  CdfPoint evaluate(const CovRow& x, double y) const override;
  double quantile(const CovRow& x, double p) const override;

  Eigen::VectorXd parameters() const override;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& p) override;
  std::vector<std::string> parameter_names() const override;
  std::vector<Interval> parameter_bounds() const override;
  std::vector<LinearPredictor*> predictors() override;
  std::unique_ptr<Marginal> clone() const override { return std::make_unique<CountMarginal>(*this); }

 private:
  bool has_zero() const { return inflation_ == Inflation::Zero || inflation_ == Inflation::ZeroAndOne; }
  bool has_one() const { return inflation_ == Inflation::One || inflation_ == Inflation::ZeroAndOne; }
  /// Base pmf values g(0..y) summed and g(y), computed in log space.
  void base_terms(double mu, int y, double& g_y, double& g_cum) const;

  CountBase base_;
  Inflation inflation_;
  LinearPredictor mean_;
  double phi_;
  LinearPredictor zero_;
  LinearPredictor one_;
};

enum class SeverityFamily { Gamma };

/// Two-part model: P(Y = 0) = q with logit(q) = x'delta, and Y | Y > 0 from a
/// Gamma with shape alpha and mean mu = exp(x'gamma).
class SemiContinuousMarginal final : public Marginal {
 public:
  SemiContinuousMarginal(LinearPredictor zero, LinearPredictor mean, double alpha);

  double zero_prob(const CovRow& x) const;
  double severity_mean(const CovRow& x) const { return std::exp(mean_.eval(x)); }
  double alpha() const { return alpha_; }
  SeverityFamily severity() const { return SeverityFamily::Gamma; }
  const LinearPredictor& zero_predictor() const { return zero_; }
  const LinearPredictor& mean_predictor() const { return mean_; }

  Scale scale() const override { return Scale::SemiContinuous; }
  std::string family() const override { return "logit-gamma"; }
  CdfPoint evaluate(const CovRow& x, double y) const override;
  double log_density(const CovRow& x, double y) const override;
  double quantile(const CovRow& x, double p) const override;

  Eigen::VectorXd parameters() const override;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& p) override;
  std::vector<std::string> parameter_names() const override;
  std::vector<Interval> parameter_bounds() const override;
  std::vector<LinearPredictor*> predictors() override { return {&zero_, &mean_}; }
  std::unique_ptr<Marginal> clone() const override {
    return std::make_unique<SemiContinuousMarginal>(*this);
  }

 private:
  LinearPredictor zero_;
  LinearPredictor mean_;
  double alpha_;
};

/// Gamma regression with log link on the mean, for strictly positive outcomes.
class GammaMarginal final : public Marginal {
 public:
  GammaMarginal(LinearPredictor mean, double alpha);

  double alpha() const { return alpha_; }
  const LinearPredictor& mean_predictor() const { return mean_; }

  Scale scale() const override { return Scale::Continuous; }
  std::string family() const override { return "gamma"; }
  CdfPoint evaluate(const CovRow& x, double y) const override;
  double log_density(const CovRow& x, double y) const override;
  double quantile(const CovRow& x, double p) const override;

  Eigen::VectorXd parameters() const override;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& p) override;
  std::vector<std::string> parameter_names() const override;
  std::vector<Interval> parameter_bounds() const override;
  std::vector<LinearPredictor*> predictors() override { return {&mean_}; }
  std::unique_ptr<Marginal> clone() const override { return std::make_unique<GammaMarginal>(*this); }

 private:
  LinearPredictor mean_;
  double alpha_;
};

/// Family string plus the term lists of each regression component.
/// inflation_terms drive p0/p1 for count families and q for logit-gamma.
struct MarginalSpec {
  std::string family;
  std::vector<std::string> mean_terms{kIntercept};
  std::vector<std::string> inflation_terms{kIntercept};
};

/// Unfitted model with neutral starting coefficients.
std::unique_ptr<Marginal> make_marginal(const MarginalSpec& spec);
Scale scale_of_family(const std::string& family);

struct MarginalFit {
  std::shared_ptr<const Marginal> model;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;
  /// An inflation coefficient ended at its +-20 cap.
  bool boundary = false;
  /// Inverse-Hessian standard errors, NaN where the Hessian is not definite.
  Eigen::VectorXd se;
  int n_obs = 0;
};

/// Maximizes the independence log-likelihood of outcome j over all subjects
/// and periods. Throws DataError on a rank-deficient design or too few rows.
MarginalFit fit_marginal(const MarginalSpec& spec, const PanelDataset& data, int outcome);
/// Refit starting from an existing model's parameters (bootstrap refits);
/// standard errors are left NaN unless with_se.
MarginalFit fit_marginal(const Marginal& start, const PanelDataset& data, int outcome, bool with_se = true);

double marginal_loglik(const Marginal& m, const PanelDataset& data, int outcome);

struct GofTable {
  std::vector<std::string> labels;
  std::vector<double> observed;
  std::vector<double> expected;
  double statistic = 0.0;
};

/// Pearson statistic over count categories {0, ..., top-1, >= top}, with
/// expected counts summed over all rows. Tail categories are pooled until
/// every expected count is at least 1.
GofTable chisq_gof(const CountMarginal& m, const PanelDataset& data, int outcome, int top = 15);

}  // namespace mlv
