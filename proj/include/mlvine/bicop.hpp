#pragma once

#include "mlvine/numerics.hpp"
#include "mlvine/rng.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace mlv {

enum class Family { Independence, Gaussian, Frank, Clayton, Gumbel, Joe };

/// A one-parameter family plus a rotation in degrees. Rotating by 180 gives
/// the survival copula; 90 and 270 flip one margin and negate Kendall's tau.
struct CopulaFamily {
  Family family = Family::Independence;
  int rotation = 0;

  CopulaFamily() = default;
  /// Throws std::invalid_argument for rotations the family does not admit.
  CopulaFamily(Family f, int rot);

  /// Lowercase family name with a rotation suffix, e.g. "gumbel180".
  std::string name() const;
  static CopulaFamily parse(std::string_view name);

  /// Parameter range used when fitting (an open interval inside the domain).
  Interval fitting_bounds() const;
  bool is_independence() const { return family == Family::Independence; }

  friend bool operator==(const CopulaFamily&, const CopulaFamily&) = default;
};

class BivariateCopula {
 public:
  /// The independence copula.
  BivariateCopula() = default;
  /// Throws std::domain_error when theta lies outside the family's domain:
  /// Gaussian (-1,1), Frank R\{0}, Clayton (0,inf), Gumbel and Joe [1,inf).
  BivariateCopula(CopulaFamily family, double theta);

  const CopulaFamily& family() const { return family_; }
  double theta() const { return theta_; }
  bool is_independence() const { return family_.is_independence(); }
  std::string name() const { return family_.name(); }

  double cdf(double u, double v) const;
  double pdf(double u, double v) const;
  /// dC/du: the conditional cdf of V given U = u, evaluated at v.
  double h1(double u, double v) const;
  /// dC/dv: the conditional cdf of U given V = v, evaluated at u.
  double h2(double u, double v) const;
  /// v such that h1(u, v) = p.
  double h1_inverse(double p, double u) const;
  /// u such that h2(u, v) = p.
  double h2_inverse(double p, double v) const;

  double tau() const;
  static double tau(CopulaFamily family, double theta);
  /// Throws std::domain_error when tau is not attainable by the family.
  static double theta_from_tau(CopulaFamily family, double tau);

  /// n draws as rows of an n x 2 matrix.
  Eigen::MatrixX2d sample(int n, RngStream& rng) const;

 private:
  CopulaFamily family_;
  double theta_ = 0.0;
};

/// Inputs are clamped to this distance from 0 and 1 before evaluation.
inline constexpr double kCopulaClamp = 1e-12;

}  // namespace mlv
