#include "mlvine/pair.hpp"

#include <algorithm>

namespace mlv {

namespace {

double floor_prob(double p, long* floored) {
  if (p >= kProbFloor) return p;
  if (floored) ++*floored;
  return kProbFloor;
}

double clamp_prob(double p) { return std::clamp(p, 0.0, 1.0); }

/// Swaps the roles of the copula arguments.
struct Flipped {
  const BivariateCopula& c;
  double cdf(double a, double b) const { return c.cdf(b, a); }
  double h2(double a, double b) const { return c.h1(b, a); }
  double h1(double a, double b) const { return c.h2(b, a); }
  double pdf(double a, double b) const { return c.pdf(b, a); }
};

struct Direct {
  const BivariateCopula& c;
  double cdf(double a, double b) const { return c.cdf(a, b); }
  double h2(double a, double b) const { return c.h2(a, b); }
  double h1(double a, double b) const { return c.h1(a, b); }
  double pdf(double a, double b) const { return c.pdf(a, b); }
};

// Distribution of the first argument a given the second b.
template <typename Cop>
CdfPoint condition(const Cop& c, const CdfPoint& a, const CdfPoint& b, long* floored) {
  CdfPoint out;
  out.atom = a.atom;
  if (!b.atom) {
    out.F = clamp_prob(c.h2(a.F, b.F));
    if (a.atom) {
      out.F_minus = clamp_prob(c.h2(a.F_minus, b.F));
      out.f = std::max(0.0, out.F - out.F_minus);
    } else {
      out.F_minus = out.F;
      out.f = a.f * c.pdf(a.F, b.F);
    }
    return out;
  }
  const double pb = floor_prob(b.F - b.F_minus, floored);
  out.F = clamp_prob((c.cdf(a.F, b.F) - c.cdf(a.F, b.F_minus)) / pb);
  if (a.atom) {
    out.F_minus = clamp_prob((c.cdf(a.F_minus, b.F) - c.cdf(a.F_minus, b.F_minus)) / pb);
    out.f = std::max(0.0, out.F - out.F_minus);
  } else {
    out.F_minus = out.F;
    out.f = std::max(0.0, a.f * (c.h1(a.F, b.F) - c.h1(a.F, b.F_minus)) / pb);
  }
  return out;
}

}  // namespace

double pair_joint(const BivariateCopula& c, const CdfPoint& s, const CdfPoint& t) {
  if (c.is_independence()) return s.f * t.f;
  if (s.atom && t.atom)
    return std::max(0.0, c.cdf(s.F, t.F) - c.cdf(s.F_minus, t.F) - c.cdf(s.F, t.F_minus) +
                             c.cdf(s.F_minus, t.F_minus));
  if (!s.atom && t.atom) return std::max(0.0, s.f * (c.h1(s.F, t.F) - c.h1(s.F, t.F_minus)));
  if (s.atom && !t.atom) return std::max(0.0, t.f * (c.h2(s.F, t.F) - c.h2(s.F_minus, t.F)));
  return s.f * t.f * c.pdf(s.F, t.F);
}

CdfPoint condition_on_second(const BivariateCopula& c, const CdfPoint& s, const CdfPoint& t, long* floored) {
  if (c.is_independence()) return s;
  return condition(Direct{c}, s, t, floored);
}

CdfPoint condition_on_first(const BivariateCopula& c, const CdfPoint& s, const CdfPoint& t, long* floored) {
  if (c.is_independence()) return t;
  return condition(Flipped{c}, t, s, floored);
}

}  // namespace mlv
