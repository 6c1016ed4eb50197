#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace mlv {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Normal distribution kernels
// ---------------------------------------------------------------------------

/// Standard normal cdf; saturates to 0/1 in the far tails.
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

inline double std_normal_pdf(double x) {
  constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

/// Inverse of std_normal_cdf. Throws std::domain_error unless 0 < p < 1.
double std_normal_quantile(double p);

template <typename Derived>
auto std_normal_cdf(const Eigen::ArrayBase<Derived>& x) {
  return x.unaryExpr([](double v) { return std_normal_cdf(v); });
}

template <typename Derived>
auto std_normal_quantile(const Eigen::ArrayBase<Derived>& p) {
  return p.unaryExpr([](double v) { return std_normal_quantile(v); });
}

/// P(X <= h, Y <= k) for a standard bivariate normal with correlation rho.
/// Genz's Gauss-Legendre scheme; absolute error around 1e-15.
double bvn_cdf(double h, double k, double rho);

/// P(lower < Z <= upper) for Z ~ N(0, corr). Infinite bounds allowed.
/// Dimension 1..4; larger dimensions throw std::invalid_argument.
double mvn_rectangle(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                     const Eigen::MatrixXd& corr);

// ---------------------------------------------------------------------------
// Correlation matrices
// ---------------------------------------------------------------------------

/// Symmetric, unit diagonal, positive definite. Validated on construction.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  explicit CorrelationMatrix(Eigen::MatrixXd m);

  static CorrelationMatrix identity(int dim);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  Eigen::MatrixXd m_;
};

/// Eigenvalue floor followed by rescaling to unit diagonal.
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& m, double eigen_floor = 1e-6);

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

double gamma_cdf(double y, double shape, double scale);
double gamma_log_pdf(double y, double shape, double scale);
/// Inverse of gamma_cdf in y; p in (0, 1).
double gamma_quantile(double p, double shape, double scale);

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule, cached per n.
const GaussLegendreRule& gauss_legendre(int n);

/// Globally adaptive Gauss-Kronrod (7/15) on a finite interval.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-10, int max_intervals = 2000);

// ---------------------------------------------------------------------------
// Root finding and optimization
// ---------------------------------------------------------------------------

/// Solves f(x) = target for nondecreasing f on [lo, hi] by bisection with
/// secant (Illinois) steps. Stops when |f(x) - target| < value_tol or the
/// bracket is narrower than width_tol. Throws std::invalid_argument when the
/// bracket does not straddle the target.
double find_root_increasing(const std::function<double(double)>& f, double target, double lo,
                            double hi, double value_tol = 1e-9, double width_tol = 1e-12);

/// Open interval (lo, hi); either end may be infinite.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double x) const { return x > lo && x < hi; }
  /// Maps x in (lo, hi) to the real line: log for half-lines, logit for
  /// finite intervals, identity when unbounded.
  double to_unconstrained(double x) const;
  double from_unconstrained(double z) const;
};

enum class OptimizerMethod { NelderMead, Bfgs };

struct OptimizerProblem {
  std::function<double(const Eigen::VectorXd&)> objective;
  std::vector<Interval> bounds;  // empty means unbounded in every coordinate
  Eigen::VectorXd initial;
  double tolerance = 1e-10;
  int max_evals = 20000;
  OptimizerMethod method = OptimizerMethod::NelderMead;
  /// Initial simplex edge in unconstrained coordinates.
  double initial_step = 0.25;
};

struct OptimizerResult {
  Eigen::VectorXd argmin;
  double value = kInf;
  /// True when successive objective changes fell below the tolerance before
  /// max_evals. A minimizer drifting toward an open bound converges in this
  /// sense once the objective has flattened out.
  bool converged = false;
  int evaluations = 0;
};

/// Local minimization with box constraints handled through Interval's smooth
/// bijection. Never returns a point worse than the initial one. Throws
/// std::domain_error if the objective evaluates to NaN.
OptimizerResult minimize(const OptimizerProblem& problem);

/// Central finite-difference Hessian in the original coordinates.
Eigen::MatrixXd numeric_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x, double rel_step = 1e-4);

struct ScalarMin {
  double x = 0.0;
  double value = kInf;
  int evaluations = 0;
};

/// Brent's method (golden section with parabolic steps) on [lo, hi].
ScalarMin minimize_scalar(const std::function<double(double)>& f, double lo, double hi, double x_tol = 1e-9);

// ---------------------------------------------------------------------------
// Small statistics helpers
// ---------------------------------------------------------------------------

/// Kendall's tau-b over paired samples, O(n log n).
double kendall_tau(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> x);

}  // namespace mlv
