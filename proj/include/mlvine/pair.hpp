#pragma once

#include "mlvine/bicop.hpp"

namespace mlv {

/// F(y), its left limit F(y-), the mass or density f(y), and whether y is a
/// probability atom. For non-atoms F_minus == F.
struct CdfPoint {
  double F = 0.0;
  double F_minus = 0.0;
  double f = 0.0;
  bool atom = false;
};

/// Smallest probability used as a conditioning denominator.
inline constexpr double kProbFloor = 1e-300;

/// Joint mass, density, or mixed mass-density of (s, t) when their
/// (conditional) margins are joined by c. Atoms enter through copula-cdf
/// differences, non-atoms through h-functions or the density.
double pair_joint(const BivariateCopula& c, const CdfPoint& s, const CdfPoint& t);

/// Distribution of s given t (first argument of c conditioned on the second).
/// `floored` counts denominators raised to kProbFloor, when non-null.
CdfPoint condition_on_second(const BivariateCopula& c, const CdfPoint& s, const CdfPoint& t,
                             long* floored = nullptr);
/// Distribution of t given s.
CdfPoint condition_on_first(const BivariateCopula& c, const CdfPoint& s, const CdfPoint& t,
                            long* floored = nullptr);

}  // namespace mlv
