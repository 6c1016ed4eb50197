#include "mlvine/numerics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <queue>
#include <array>
#include <map>
#include <mutex>
#include <numeric>

namespace mlv {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double acklam_quantile(double p) {
  static constexpr std::array<double, 6> a = {-3.969683028665376e+01, 2.209460984245205e+02,
                                              -2.759285104469687e+02, 1.383577518672690e+02,
                                              -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b = {-5.447609879822406e+01, 1.615858368580409e+02,
                                              -1.556989798598866e+02, 6.680131188771972e+01,
                                              -1.328068155288572e+01};
  static constexpr std::array<double, 6> c = {-7.784894002430293e-03, -3.223964580411365e-01,
                                              -2.400758277161838e+00, -2.549732539343734e+00,
                                              4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d = {7.784695709041462e-03, 3.224671290700398e-01,
                                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// P(X > h, Y > k) for the standard bivariate normal (Genz, bvnu).
double bvn_upper(double h, double k, double r) {
  if (h == kInf || k == kInf) return 0.0;
  if (h == -kInf) return k == -kInf ? 1.0 : std_normal_cdf(-k);
  if (k == -kInf) return std_normal_cdf(-h);
  if (r == 0.0) return std_normal_cdf(-h) * std_normal_cdf(-k);

  const double ar = std::abs(r);
  static const GaussLegendreRule& rule6 = gauss_legendre(6);
  static const GaussLegendreRule& rule12 = gauss_legendre(12);
  static const GaussLegendreRule& rule20 = gauss_legendre(20);
  const GaussLegendreRule& rule = ar < 0.3 ? rule6 : (ar < 0.75 ? rule12 : rule20);
  const std::size_t n = rule.nodes.size();

  double hk = h * k;
  double bvn = 0.0;
  if (ar < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = 0.5 * std::asin(r);
    for (std::size_t i = 0; i < n; ++i) {
      const double sn = std::sin(asr * (rule.nodes[i] + 1.0));
      bvn += rule.weights[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    bvn = bvn * asr / kTwoPi + std_normal_cdf(-h) * std_normal_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (ar < 1.0) {
      const double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 80.0;
      double asr = -0.5 * (bs / as + hk);
      if (asr > -100.0) {
        bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
      }
      if (hk > -100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(kTwoPi) * std_normal_cdf(-b / a);
        bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
      }
      a *= 0.5;
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = a * (rule.nodes[i] + 1.0);
        const double xs = x * x;
        const double e = -0.5 * (bs / xs + hk);
        if (e > -100.0) {
          const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
          const double rs = std::sqrt(1.0 - xs);
          const double ep = std::exp(-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
          sum += rule.weights[i] * std::exp(e) * (sp - ep);
        }
      }
      bvn = (a * sum - bvn) / kTwoPi;
    }
    if (r > 0.0) {
      bvn += std_normal_cdf(-std::max(h, k));
    } else if (h >= k) {
      bvn = -bvn;
    } else {
      const double l = h < 0.0 ? std_normal_cdf(k) - std_normal_cdf(h)
                               : std_normal_cdf(-h) - std_normal_cdf(-k);
      bvn = l - bvn;
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

double rectangle_2d(double l1, double l2, double u1, double u2, double r) {
  auto corner = [r](double a, double b) {
    if (a == -kInf || b == -kInf) return 0.0;
    return bvn_cdf(a, b, r);
  };
  const double p = corner(u1, u2) - corner(l1, u2) - corner(u1, l2) + corner(l1, l2);
  return std::max(p, 0.0);
}

double rectangle_recursive(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const Eigen::MatrixXd& corr, double tol) {
  const int d = static_cast<int>(lower.size());
  if (d == 1) return std::max(0.0, std_normal_cdf(upper(0)) - std_normal_cdf(lower(0)));
  if (d == 2) return rectangle_2d(lower(0), lower(1), upper(0), upper(1), corr(0, 1));

  // Condition on the coordinate with the narrowest probability interval.
  int outer = 0;
  double narrowest = kInf;
  for (int i = 0; i < d; ++i) {
    const double w = std_normal_cdf(upper(i)) - std_normal_cdf(lower(i));
    if (w < narrowest) {
      narrowest = w;
      outer = i;
    }
  }
  if (narrowest <= 0.0) return 0.0;

  std::vector<int> rest;
  for (int i = 0; i < d; ++i)
    if (i != outer) rest.push_back(i);
  const int m = d - 1;
  Eigen::VectorXd r(m);
  Eigen::MatrixXd cond(m, m);
  for (int a = 0; a < m; ++a) {
    r(a) = corr(rest[a], outer);
    for (int b = 0; b < m; ++b) cond(a, b) = corr(rest[a], rest[b]);
  }
  cond -= r * r.transpose();
  Eigen::VectorXd sd = cond.diagonal().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd cond_corr(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) cond_corr(a, b) = a == b ? 1.0 : cond(a, b) / (sd(a) * sd(b));

  Eigen::VectorXd lo(m), hi(m);
  auto integrand = [&](double w) {
    w = std::clamp(w, 1e-300, 1.0 - 1e-16);
    const double z = std_normal_quantile(w);
    for (int a = 0; a < m; ++a) {
      const double mu = r(a) * z;
      lo(a) = lower(rest[a]) == -kInf ? -kInf : (lower(rest[a]) - mu) / sd(a);
      hi(a) = upper(rest[a]) == kInf ? kInf : (upper(rest[a]) - mu) / sd(a);
    }
    return rectangle_recursive(lo, hi, cond_corr, tol * 0.1);
  };
  return integrate(integrand, std_normal_cdf(lower(outer)), std_normal_cdf(upper(outer)), tol);
}

// Kronrod 15-point nodes/weights and the embedded 7-point Gauss weights.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double gk15(const std::function<double(double)>& f, double a, double b, double& err) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kron = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    kron += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
  }
  err = std::abs((kron - gauss) * half);
  return kron * half;
}

double log_gamma_prefactor(double a, double x) { return -x + a * std::log(x) - std::lgamma(a); }

double gamma_series(double a, double x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int n = 0; n < 1000000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(log_gamma_prefactor(a, x));
}

double gamma_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(log_gamma_prefactor(a, x)) * h;
}

}  // namespace

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("std_normal_quantile: p must lie in (0, 1)");
  if (p > 0.5) return -std_normal_quantile(1.0 - p);
  double x = acklam_quantile(p);
  // Halley refinement against the erfc-based cdf.
  for (int i = 0; i < 2; ++i) {
    const double e = std_normal_cdf(x) - p;
    const double u = e * std::sqrt(kTwoPi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double bvn_cdf(double h, double k, double rho) {
  if (h == -kInf || k == -kInf) return 0.0;
  return bvn_upper(-h, -k, rho);
}

double mvn_rectangle(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                     const Eigen::MatrixXd& corr) {
  const auto d = lower.size();
  if (upper.size() != d || corr.rows() != d || corr.cols() != d)
    throw std::invalid_argument("mvn_rectangle: dimension mismatch");
  if (d < 1 || d > 4) throw std::invalid_argument("mvn_rectangle: dimension must be 1..4");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i)))
      throw std::invalid_argument("mvn_rectangle: NaN bound");
    if (!(lower(i) < upper(i))) return 0.0;
  }
  return std::clamp(rectangle_recursive(lower, upper, corr, 1e-10), 0.0, 1.0);
}

CorrelationMatrix::CorrelationMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() < 1)
    throw std::invalid_argument("correlation matrix must be square");
  const auto n = m_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(m_(i, i) - 1.0) > 1e-12)
      throw std::invalid_argument("correlation matrix must have a unit diagonal");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(m_(i, j) - m_(j, i)) > 1e-12)
        throw std::invalid_argument("correlation matrix must be symmetric");
      if (!(std::abs(m_(i, j)) < 1.0))
        throw std::invalid_argument("correlations must lie in (-1, 1)");
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 1e-10)
    throw std::invalid_argument("correlation matrix must be positive definite");
}

CorrelationMatrix CorrelationMatrix::identity(int dim) {
  return CorrelationMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& m, double eigen_floor) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(eigen_floor);
  Eigen::MatrixXd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  Eigen::VectorXd s = out.diagonal().cwiseSqrt().cwiseInverse();
  out = s.asDiagonal() * out * s.asDiagonal();
  out = 0.5 * (out + out.transpose());
  out.diagonal().setOnes();
  return out;
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("regularized_gamma_p: shape must be positive");
  if (x <= 0.0) return 0.0;
  if (x == kInf) return 1.0;
  if (x < a + 1.0) return std::min(1.0, gamma_series(a, x));
  return std::max(0.0, 1.0 - gamma_continued_fraction(a, x));
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("regularized_gamma_q: shape must be positive");
  if (x <= 0.0) return 1.0;
  if (x == kInf) return 0.0;
  if (x < a + 1.0) return std::max(0.0, 1.0 - gamma_series(a, x));
  return std::min(1.0, gamma_continued_fraction(a, x));
}

double gamma_cdf(double y, double shape, double scale) {
  if (y <= 0.0) return 0.0;
  return regularized_gamma_p(shape, y / scale);
}

double gamma_log_pdf(double y, double shape, double scale) {
  if (y <= 0.0) return -kInf;
  return (shape - 1.0) * std::log(y) - y / scale - std::lgamma(shape) - shape * std::log(scale);
}

double gamma_quantile(double p, double shape, double scale) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("gamma_quantile: p must lie in (0, 1)");
  // Wilson-Hilferty start, then safeguarded Newton on log(x).
  const double z = std_normal_quantile(p);
  const double c = 1.0 / (9.0 * shape);
  double x = shape * std::pow(std::max(1.0 - c + z * std::sqrt(c), 1e-3), 3.0);
  if (shape < 1.0 && p < 0.5) x = std::pow(p * std::tgamma(shape + 1.0), 1.0 / shape);
  double lo = 0.0, hi = kInf;
  for (int it = 0; it < 200; ++it) {
    const double f = regularized_gamma_p(shape, x) - p;
    if (f < 0.0) lo = std::max(lo, x);
    else hi = std::min(hi, x);
    if (std::abs(f) < 1e-14) break;
    const double dens = std::exp(gamma_log_pdf(x, shape, 1.0));
    double next = dens > 0.0 ? x - f / dens : x;
    if (!(next > lo && next < hi) || !std::isfinite(next))
      next = hi == kInf ? 2.0 * std::max(x, 1e-300) : 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * x) {
      x = next;
      break;
    }
    x = next;
  }
  return x * scale;
}

const GaussLegendreRule& gauss_legendre(int n) {
  static std::map<int, GaussLegendreRule> cache;
  static std::mutex mu;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                 int max_intervals) {
  if (a == b) return 0.0;
  if (a > b) return -integrate(f, b, a, abs_tol, max_intervals);
  struct Piece {
    double a, b, value, err;
    bool operator<(const Piece& o) const { return err < o.err; }
  };
  std::priority_queue<Piece> heap;
  double err = 0.0;
  double total = gk15(f, a, b, err);
  double total_err = err;
  heap.push({a, b, total, err});
  // Global bisection of the worst interval until the summed error estimate is
  // below tolerance (absolute or at rounding level) or the budget is spent.
  while (static_cast<int>(heap.size()) < max_intervals &&
         total_err > std::max(abs_tol, 1e-15 * std::abs(total))) {
    const Piece worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push({worst.a, worst.b, worst.value, 0.0});
      total_err -= worst.err;
      continue;
    }
    double e1 = 0.0, e2 = 0.0;
    const double left = gk15(f, worst.a, mid, e1);
    const double right = gk15(f, mid, worst.b, e2);
    total += left + right - worst.value;
    total_err += e1 + e2 - worst.err;
    heap.push({worst.a, mid, left, e1});
    heap.push({mid, worst.b, right, e2});
  }
  // Re-sum to shed accumulated rounding from the running updates.
  double sum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    heap.pop();
  }
  return sum;
}

double find_root_increasing(const std::function<double(double)>& f, double target, double lo,
                            double hi, double value_tol, double width_tol) {
  double flo = f(lo) - target;
  double fhi = f(hi) - target;
  if (flo > 0.0 || fhi < 0.0)
    throw std::invalid_argument("find_root_increasing: bracket does not straddle the target");
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  int side = 0;
  for (int it = 0; it < 500; ++it) {
    double x = (lo * fhi - hi * flo) / (fhi - flo);
    // Fall back to bisection when the secant point is degenerate or the
    // bracket is shrinking slowly from one side.
    if (!(x > lo && x < hi) || it % 4 == 3) x = 0.5 * (lo + hi);
    const double fx = f(x) - target;
    if (std::abs(fx) < value_tol || hi - lo < width_tol) return x;
    if (fx < 0.0) {
      lo = x;
      flo = fx;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = x;
      fhi = fx;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (lo + hi);
}

ScalarMin minimize_scalar(const std::function<double(double)>& f, double lo, double hi, double x_tol) {
  if (!(lo < hi)) throw std::invalid_argument("minimize_scalar: empty interval");
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  ScalarMin out;
  double a = lo, b = hi;
  double x = a + golden * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  out.evaluations = 1;
  double d = 0.0, e = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    const double tol1 = x_tol + 1e-12 * std::abs(x), tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;
    bool golden_step = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      if (std::abs(p) < std::abs(0.5 * q * e) && p > q * (a - x) && p < q * (b - x)) {
        e = d;
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = x < m ? tol1 : -tol1;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x < m ? b : a) - x;
      d = golden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    ++out.evaluations;
    if (fu <= fx) {
      (u < x ? b : a) = x;
      v = w, fv = fw;
      w = x, fw = fx;
      x = u, fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w, fv = fw;
        w = u, fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u, fv = fu;
      }
    }
  }
  out.x = x;
  out.value = fx;
  return out;
}

double Interval::to_unconstrained(double x) const {
  const bool has_lo = std::isfinite(lo);
  const bool has_hi = std::isfinite(hi);
  if (has_lo && has_hi) {
    const double t = (x - lo) / (hi - lo);
    return std::log(t) - std::log1p(-t);
  }
  if (has_lo) return std::log(x - lo);
  if (has_hi) return -std::log(hi - x);
  return x;
}

double Interval::from_unconstrained(double z) const {
  const bool has_lo = std::isfinite(lo);
  const bool has_hi = std::isfinite(hi);
  if (has_lo && has_hi) {
    const double t = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return lo + (hi - lo) * t;
  }
  if (has_lo) return lo + std::exp(z);
  if (has_hi) return hi - std::exp(-z);
  return z;
}

Eigen::MatrixXd numeric_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x, double rel_step) {
  const auto n = x.size();
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) h(i) = rel_step * std::max(1.0, std::abs(x(i)));
  Eigen::MatrixXd hess(n, n);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h(i);
    xm(i) -= h(i);
    hess(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h(i) * h(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
      pp(i) += h(i); pp(j) += h(j);
      pm(i) += h(i); pm(j) -= h(j);
      mp(i) -= h(i); mp(j) += h(j);
      mm(i) -= h(i); mm(j) -= h(j);
      hess(i, j) = hess(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h(i) * h(j));
    }
  }
  return hess;
}

namespace {

// Counts pairs i < j with v[i] > v[j] while merge-sorting v.
long long count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                           std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<long long>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return inv;
}

template <typename Eq>
long long tie_pairs(std::size_t n, Eq eq) {
  long long total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && eq(i - 1, i)) {
      ++run;
    } else {
      total += static_cast<long long>(run) * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }
  const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
  const long long n1 = tie_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b]; });
  const long long n3 = tie_pairs(
      n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b] && ys[a] == ys[b]; });
  std::vector<double> buf(n);
  const long long swaps = count_inversions(ys, buf, 0, n);
  const long long n2 = tie_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
  const double num = static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps);
  const double den = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return den > 0.0 ? num / den : 0.0;
}

double mean(std::span<const double> x) {
  if (x.empty()) return std::nan("");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return std::nan("");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace mlv
