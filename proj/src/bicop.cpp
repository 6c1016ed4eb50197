#include "mlvine/bicop.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace mlv {

namespace {

double clamp01(double x) { return std::clamp(x, kCopulaClamp, 1.0 - kCopulaClamp); }

// ---------------------------------------------------------------------------
// Unrotated families. Arguments are already clamped to the open unit square.
// ---------------------------------------------------------------------------

double gumbel_a(double x, double y, double th) {
  const double hi = std::max(x, y), lo = std::min(x, y);
  return hi * std::pow(1.0 + std::pow(lo / hi, th), 1.0 / th);
}

double base_cdf(Family f, double th, double u, double v) {
  switch (f) {
    case Family::Independence:
      return u * v;
    case Family::Gaussian:
      return bvn_cdf(std_normal_quantile(u), std_normal_quantile(v), th);
    case Family::Frank: {
      // Radial symmetry keeps log1p away from -1 in the upper corner.
      if (u + v > 1.0) return u + v - 1.0 + base_cdf(f, th, 1.0 - u, 1.0 - v);
      const double a = std::expm1(-th * u), b = std::expm1(-th * v), d = std::expm1(-th);
      return -std::log1p(a * b / d) / th;
    }
    case Family::Clayton: {
      const double t = std::pow(u, -th) + std::pow(v, -th) - 1.0;
      return std::exp(-std::log(t) / th);
    }
    case Family::Gumbel: {
      return std::exp(-gumbel_a(-std::log(u), -std::log(v), th));
    }
    case Family::Joe: {
      const double a = std::pow(1.0 - u, th), b = std::pow(1.0 - v, th);
      return 1.0 - std::pow(a + b - a * b, 1.0 / th);
    }
  }
  return 0.0;
}

// u + v - 1 + C(1-u, 1-v), written to avoid cancellation where it matters.
double base_survival_cdf(Family f, double th, double u, double v) {
  switch (f) {
    case Family::Clayton: {
      const double am1 = std::expm1(-th * std::log1p(-u));
      const double bm1 = std::expm1(-th * std::log1p(-v));
      return u + v + std::expm1(-std::log1p(am1 + bm1) / th);
    }
    case Family::Gumbel:
      return u + v + std::expm1(-gumbel_a(-std::log1p(-u), -std::log1p(-v), th));
    case Family::Joe: {
      const double a = std::pow(u, th), b = std::pow(v, th);
      return u + v - std::pow(a + b - a * b, 1.0 / th);
    }
    default:
      return u + v - 1.0 + base_cdf(f, th, 1.0 - u, 1.0 - v);
  }
}

double base_pdf(Family f, double th, double u, double v) {
  switch (f) {
    case Family::Independence:
      return 1.0;
    case Family::Gaussian: {
      const double x = std_normal_quantile(u), y = std_normal_quantile(v);
      const double r2 = 1.0 - th * th;
      return std::exp(-(th * th * (x * x + y * y) - 2.0 * th * x * y) / (2.0 * r2)) / std::sqrt(r2);
    }
    case Family::Frank: {
      if (u + v > 1.0) return base_pdf(f, th, 1.0 - u, 1.0 - v);
      const double a = std::expm1(-th * u), b = std::expm1(-th * v), d = std::expm1(-th);
      const double den = d + a * b;
      return -th * d * std::exp(-th * (u + v)) / (den * den);
    }
    case Family::Clayton: {
      const double lt = std::log(std::pow(u, -th) + std::pow(v, -th) - 1.0);
      return std::exp(std::log1p(th) - (th + 1.0) * (std::log(u) + std::log(v)) -
                      (1.0 / th + 2.0) * lt);
    }
    case Family::Gumbel: {
      const double x = -std::log(u), y = -std::log(v);
      const double a = gumbel_a(x, y, th);
      return std::exp(-a + x + y + (th - 1.0) * (std::log(x) + std::log(y)) +
                      (1.0 - 2.0 * th) * std::log(a)) *
             (a + th - 1.0);
    }
    case Family::Joe: {
      const double ub = 1.0 - u, vb = 1.0 - v;
      const double a = std::pow(ub, th), b = std::pow(vb, th);
      const double s = a + b - a * b;
      return std::exp((1.0 / th - 2.0) * std::log(s) + (th - 1.0) * (std::log(ub) + std::log(vb))) *
             (th - 1.0 + s);
    }
  }
  return 1.0;
}

// dC/dv for the unrotated family.
double base_h2(Family f, double th, double u, double v) {
  switch (f) {
    case Family::Independence:
      return u;
    case Family::Gaussian: {
      const double x = std_normal_quantile(u), y = std_normal_quantile(v);
      return std_normal_cdf((x - th * y) / std::sqrt(1.0 - th * th));
    }
    case Family::Frank: {
      if (u + v > 1.0) return 1.0 - base_h2(f, th, 1.0 - u, 1.0 - v);
      const double a = std::expm1(-th * u), b = std::expm1(-th * v), d = std::expm1(-th);
      return std::exp(-th * v) * a / (d + a * b);
    }
    case Family::Clayton: {
      const double lt = std::log(std::pow(u, -th) + std::pow(v, -th) - 1.0);
      return std::exp(-(th + 1.0) * std::log(v) - (1.0 / th + 1.0) * lt);
    }
    case Family::Gumbel: {
      const double x = -std::log(u), y = -std::log(v);
      const double a = gumbel_a(x, y, th);
      return std::exp(-a + (1.0 - th) * std::log(a) + (th - 1.0) * std::log(y) + y);
    }
    case Family::Joe: {
      const double ub = 1.0 - u, vb = 1.0 - v;
      const double a = std::pow(ub, th), b = std::pow(vb, th);
      const double s = a + b - a * b;
      return std::exp((1.0 / th - 1.0) * std::log(s) + (th - 1.0) * std::log(vb)) * (1.0 - a);
    }
  }
  return u;
}

double base_h2_inverse(Family f, double th, double p, double v) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  switch (f) {
    case Family::Independence:
      return p;
    case Family::Gaussian:
      return std_normal_cdf(th * std_normal_quantile(v) +
                            std::sqrt(1.0 - th * th) * std_normal_quantile(p));
    case Family::Frank: {
      auto log_add = [](double x, double y) {
        const double m = std::max(x, y);
        return m + std::log1p(std::exp(-std::abs(x - y)));
      };
      const double w = -th * v + std::log1p(-p), lp = std::log(p);
      return (log_add(w, lp) - log_add(w, lp - th)) / th;
    }
    case Family::Clayton: {
      const double w = std::pow(p * std::pow(v, th + 1.0), -th / (1.0 + th)) + 1.0 - std::pow(v, -th);
      return std::pow(w, -1.0 / th);
    }
    default: {
      auto h = [&](double u) { return base_h2(f, th, u, v); };
      const double lo = kCopulaClamp, hi = 1.0 - kCopulaClamp;
      if (p <= h(lo)) return lo;
      if (p >= h(hi)) return hi;
      return find_root_increasing(h, p, lo, hi, 1e-14, 1e-15);
    }
  }
}

// Debye-type integral (1/x) * int_0^x t / (e^t - 1) dt.
double debye1(double x) {
  if (x == 0.0) return 1.0;
  auto g = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
  return integrate(g, 0.0, x, 1e-13) / x;
}

double frank_tau(double th) {
  if (std::abs(th) < 1e-8) return th / 9.0;
  return 1.0 - 4.0 / th + 4.0 * debye1(th) / th;
}

double joe_tau(double th) {
  if (th <= 1.0) return 0.0;
  // Archimedean identity: tau = 1 + 4 int_0^1 phi / phi', with
  // phi(t) = -log(1 - (1 - t)^theta); written in s = 1 - t.
  auto g = [th](double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double st = std::pow(s, th);
    return std::log1p(-st) * (1.0 - st) / (th * std::pow(s, th - 1.0));
  };
  return 1.0 + 4.0 * integrate(g, 0.0, 1.0, 1e-12);
}

double base_tau(Family f, double th) {
  switch (f) {
    case Family::Independence:
      return 0.0;
    case Family::Gaussian:
      return 2.0 / M_PI * std::asin(th);
    case Family::Frank:
      return frank_tau(th);
    case Family::Clayton:
      return th / (th + 2.0);
    case Family::Gumbel:
      return 1.0 - 1.0 / th;
    case Family::Joe:
      return joe_tau(th);
  }
  return 0.0;
}

std::string family_stem(Family f) {
  switch (f) {
    case Family::Independence: return "independence";
    case Family::Gaussian: return "gaussian";
    case Family::Frank: return "frank";
    case Family::Clayton: return "clayton";
    case Family::Gumbel: return "gumbel";
    case Family::Joe: return "joe";
  }
  return "independence";
}

}  // namespace

CopulaFamily::CopulaFamily(Family f, int rot) : family(f), rotation(rot) {
  if (rot != 0 && rot != 90 && rot != 180 && rot != 270)
    throw std::invalid_argument("copula rotation must be 0, 90, 180 or 270");
  if (f == Family::Independence && rot != 0)
    throw std::invalid_argument("independence copula admits no rotation");
  if ((f == Family::Gaussian || f == Family::Frank) && rot != 0)
    throw std::invalid_argument(family_stem(f) + " copula is radially symmetric; rotation must be 0");
}

std::string CopulaFamily::name() const {
  std::string s = family_stem(family);
  if (rotation != 0) s += std::to_string(rotation);
  return s;
}

CopulaFamily CopulaFamily::parse(std::string_view name) {
  std::size_t cut = name.size();
  while (cut > 0 && std::isdigit(static_cast<unsigned char>(name[cut - 1]))) --cut;
  const std::string stem(name.substr(0, cut));
  const int rot = cut < name.size() ? std::stoi(std::string(name.substr(cut))) : 0;
  for (Family f : {Family::Independence, Family::Gaussian, Family::Frank, Family::Clayton,
                   Family::Gumbel, Family::Joe}) {
    if (family_stem(f) == stem) return CopulaFamily(f, rot);
  }
  throw std::invalid_argument("unknown copula family '" + std::string(name) + "'");
}

Interval CopulaFamily::fitting_bounds() const {
  switch (family) {
    case Family::Independence: return {-1.0, 1.0};
    case Family::Gaussian: return {-0.999, 0.999};
    case Family::Frank: return {-50.0, 50.0};
    case Family::Clayton: return {1e-4, 50.0};
    case Family::Gumbel: return {1.0, 50.0};
    case Family::Joe: return {1.0, 50.0};
  }
  return {};
}

BivariateCopula::BivariateCopula(CopulaFamily family, double theta)
    : family_(family), theta_(theta) {
  const bool ok = [&] {
    if (!std::isfinite(theta)) return false;
    switch (family.family) {
      case Family::Independence: return true;
      case Family::Gaussian: return std::abs(theta) < 1.0;
      case Family::Frank: return theta != 0.0;
      case Family::Clayton: return theta > 0.0;
      case Family::Gumbel:
      case Family::Joe: return theta >= 1.0;
    }
    return false;
  }();
  if (!ok)
    throw std::domain_error("parameter " + std::to_string(theta) + " outside the domain of " +
                            family.name());
  if (family.is_independence()) theta_ = 0.0;
}

double BivariateCopula::cdf(double u, double v) const {
  if (u <= 0.0 || v <= 0.0) return 0.0;
  if (u >= 1.0) return std::min(v, 1.0);
  if (v >= 1.0) return u;
  if (is_independence()) return u * v;
  const Family f = family_.family;
  u = clamp01(u);
  v = clamp01(v);
  double c = 0.0;
  switch (family_.rotation) {
    case 0: c = base_cdf(f, theta_, u, v); break;
    case 90: c = v - base_cdf(f, theta_, 1.0 - u, v); break;
    case 180: c = base_survival_cdf(f, theta_, u, v); break;
    case 270: c = u - base_cdf(f, theta_, u, 1.0 - v); break;
  }
  return std::clamp(c, std::max(u + v - 1.0, 0.0), std::min(u, v));
}

double BivariateCopula::pdf(double u, double v) const {
  if (is_independence()) return 1.0;
  const Family f = family_.family;
  u = clamp01(u);
  v = clamp01(v);
  switch (family_.rotation) {
    case 90: return base_pdf(f, theta_, 1.0 - u, v);
    case 180: return base_pdf(f, theta_, 1.0 - u, 1.0 - v);
    case 270: return base_pdf(f, theta_, u, 1.0 - v);
    default: return base_pdf(f, theta_, u, v);
  }
}

double BivariateCopula::h2(double u, double v) const {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  if (is_independence()) return u;
  const Family f = family_.family;
  u = clamp01(u);
  v = clamp01(v);
  double h = 0.0;
  switch (family_.rotation) {
    case 0: h = base_h2(f, theta_, u, v); break;
    case 90: h = 1.0 - base_h2(f, theta_, 1.0 - u, v); break;
    case 180: h = 1.0 - base_h2(f, theta_, 1.0 - u, 1.0 - v); break;
    case 270: h = base_h2(f, theta_, u, 1.0 - v); break;
  }
  return std::clamp(h, 0.0, 1.0);
}

double BivariateCopula::h1(double u, double v) const {
  if (v <= 0.0) return 0.0;
  if (v >= 1.0) return 1.0;
  if (is_independence()) return v;
  const Family f = family_.family;
  u = clamp01(u);
  v = clamp01(v);
  // Every base family is exchangeable: dC0/du (a, b) = base_h2(b, a).
  double h = 0.0;
  switch (family_.rotation) {
    case 0: h = base_h2(f, theta_, v, u); break;
    case 90: h = base_h2(f, theta_, v, 1.0 - u); break;
    case 180: h = 1.0 - base_h2(f, theta_, 1.0 - v, 1.0 - u); break;
    case 270: h = 1.0 - base_h2(f, theta_, 1.0 - v, u); break;
  }
  return std::clamp(h, 0.0, 1.0);
}

double BivariateCopula::h2_inverse(double p, double v) const {
  if (is_independence()) return p;
  const Family f = family_.family;
  v = clamp01(v);
  switch (family_.rotation) {
    case 90: return 1.0 - base_h2_inverse(f, theta_, 1.0 - p, v);
    case 180: return 1.0 - base_h2_inverse(f, theta_, 1.0 - p, 1.0 - v);
    case 270: return base_h2_inverse(f, theta_, p, 1.0 - v);
    default: return base_h2_inverse(f, theta_, p, v);
  }
}

double BivariateCopula::h1_inverse(double p, double u) const {
  if (is_independence()) return p;
  const Family f = family_.family;
  u = clamp01(u);
  switch (family_.rotation) {
    case 90: return base_h2_inverse(f, theta_, p, 1.0 - u);
    case 180: return 1.0 - base_h2_inverse(f, theta_, 1.0 - p, 1.0 - u);
    case 270: return 1.0 - base_h2_inverse(f, theta_, 1.0 - p, u);
    default: return base_h2_inverse(f, theta_, p, u);
  }
}

double BivariateCopula::tau(CopulaFamily family, double theta) {
  const double t = base_tau(family.family, theta);
  return (family.rotation == 90 || family.rotation == 270) ? -t : t;
}

double BivariateCopula::tau() const { return tau(family_, theta_); }

double BivariateCopula::theta_from_tau(CopulaFamily family, double tau) {
  if (family.rotation == 90 || family.rotation == 270) tau = -tau;
  auto unattainable = [&] {
    return std::domain_error("Kendall's tau " + std::to_string(tau) + " is not attainable by " +
                             family.name());
  };
  if (!(tau > -1.0 && tau < 1.0)) throw unattainable();
  switch (family.family) {
    case Family::Independence:
      if (tau != 0.0) throw unattainable();
      return 0.0;
    case Family::Gaussian:
      return std::sin(M_PI * tau / 2.0);
    case Family::Clayton:
      if (tau <= 0.0) throw unattainable();
      return 2.0 * tau / (1.0 - tau);
    case Family::Gumbel:
      if (tau < 0.0) throw unattainable();
      return 1.0 / (1.0 - tau);
    case Family::Frank: {
      if (tau == 0.0) throw unattainable();
      const double sign = tau > 0.0 ? 1.0 : -1.0;
      auto f = [](double th) { return frank_tau(th); };
      return sign * find_root_increasing(f, std::abs(tau), 1e-8, 2000.0, 1e-12, 1e-12);
    }
    case Family::Joe: {
      if (tau < 0.0) throw unattainable();
      if (tau == 0.0) return 1.0;
      return find_root_increasing(joe_tau, tau, 1.0, 1e4, 1e-12, 1e-12);
    }
  }
  throw unattainable();
}

Eigen::MatrixX2d BivariateCopula::sample(int n, RngStream& rng) const {
  Eigen::MatrixX2d out(n, 2);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double p = rng.uniform();
    out(i, 0) = u;
    out(i, 1) = h1_inverse(p, u);
  }
  return out;
}

}  // namespace mlv
