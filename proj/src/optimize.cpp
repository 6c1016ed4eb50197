#include "mlvine/numerics.hpp"

#include <algorithm>
#include <numeric>

namespace mlv {

namespace {

class Evaluator {
 public:
  explicit Evaluator(const OptimizerProblem& p) : p_(p) {}

  Eigen::VectorXd to_original(const Eigen::VectorXd& z) const {
    if (p_.bounds.empty()) return z;
    Eigen::VectorXd x(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) x(i) = p_.bounds[i].from_unconstrained(z(i));
    return x;
  }

  Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& x) const {
    if (p_.bounds.empty()) return x;
    Eigen::VectorXd z(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) z(i) = p_.bounds[i].to_unconstrained(x(i));
    return z;
  }

  double operator()(const Eigen::VectorXd& z) {
    ++evals_;
    const Eigen::VectorXd x = to_original(z);
    if (!p_.bounds.empty()) {
      // Saturated logistic maps can land exactly on a bound.
      for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!p_.bounds[i].contains(x(i))) return kInf;
    }
    const double f = p_.objective(x);
    if (std::isnan(f)) throw std::domain_error("minimize: objective evaluated to NaN");
    return std::isfinite(f) ? f : kInf;
  }

  int evals() const { return evals_; }
  bool exhausted() const { return evals_ >= p_.max_evals; }

 private:
  const OptimizerProblem& p_;
  int evals_ = 0;
};

bool small_change(double a, double b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::abs(b));
}

struct Trace {
  Eigen::VectorXd z;
  double f;
  bool converged;
};

Trace nelder_mead(Evaluator& eval, const Eigen::VectorXd& z0, double f0, double step, double tol) {
  const auto n = z0.size();
  std::vector<Eigen::VectorXd> pts(n + 1, z0);
  std::vector<double> fv(n + 1, f0);
  for (Eigen::Index i = 0; i < n; ++i) {
    pts[i + 1](i) += step;
    fv[i + 1] = eval(pts[i + 1]);
  }
  std::vector<std::size_t> order(n + 1);
  while (!eval.exhausted()) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    if (std::isfinite(fv[worst]) && small_change(fv[worst], fv[best], tol))
      return {pts[best], fv[best], true};

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < order.size() - 1; ++i) centroid += pts[order[i]];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    const Eigen::VectorXd xc =
        outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : fv[worst])) {
      pts[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      fv[i] = eval(pts[i]);
    }
  }
  const auto it = std::min_element(fv.begin(), fv.end());
  return {pts[static_cast<std::size_t>(it - fv.begin())], *it, false};
}

Eigen::VectorXd central_gradient(Evaluator& eval, const Eigen::VectorXd& z) {
  Eigen::VectorXd g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(z(i)));
    Eigen::VectorXd zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    g(i) = (eval(zp) - eval(zm)) / (2.0 * h);
  }
  return g;
}

Trace bfgs(Evaluator& eval, const Eigen::VectorXd& z0, double f0, double tol) {
  const auto n = z0.size();
  Eigen::VectorXd z = z0;
  double f = f0;
  Eigen::VectorXd g = central_gradient(eval, z);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  while (!eval.exhausted()) {
    if (!g.allFinite()) return {z, f, false};
    Eigen::VectorXd dir = -hinv * g;
    if (dir.dot(g) >= 0.0) {
      hinv.setIdentity();
      dir = -g;
    }
    double t = 1.0;
    double fn = kInf;
    Eigen::VectorXd zn;
    for (int ls = 0; ls < 40; ++ls) {
      zn = z + t * dir;
      fn = eval(zn);
      if (fn <= f + 1e-4 * t * g.dot(dir)) break;
      t *= 0.5;
    }
    if (!(fn < f)) {
      // No descent along the quasi-Newton direction: stationary to FD accuracy.
      return {z, f, g.lpNorm<Eigen::Infinity>() < 1e-3 * (1.0 + std::abs(f))};
    }
    const Eigen::VectorXd gn = central_gradient(eval, zn);
    const Eigen::VectorXd s = zn - z;
    const Eigen::VectorXd y = gn - g;
    const bool done = small_change(fn, f, tol);
    z = zn;
    f = fn;
    g = gn;
    if (done) return {z, f, true};
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      hinv = (I - rho * s * y.transpose()) * hinv * (I - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
  }
  return {z, f, false};
}

}  // namespace

OptimizerResult minimize(const OptimizerProblem& problem) {
  if (!problem.objective) throw std::invalid_argument("minimize: objective is empty");
  if (!(problem.tolerance > 0.0)) throw std::invalid_argument("minimize: tolerance must be > 0");
  const auto n = problem.initial.size();
  if (n == 0) throw std::invalid_argument("minimize: empty parameter vector");
  if (!problem.bounds.empty()) {
    if (static_cast<Eigen::Index>(problem.bounds.size()) != n)
      throw std::invalid_argument("minimize: bounds size mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
      if (!problem.bounds[i].contains(problem.initial(i)))
        throw std::invalid_argument("minimize: initial point must lie strictly inside bounds");
  }

  Evaluator eval(problem);
  const Eigen::VectorXd z0 = eval.to_unconstrained(problem.initial);
  const double f0 = eval(z0);
  if (!std::isfinite(f0)) throw std::invalid_argument("minimize: objective not finite at start");

  Trace best{z0, f0, false};
  if (problem.method == OptimizerMethod::Bfgs) {
    best = bfgs(eval, z0, f0, problem.tolerance);
    if (!best.converged && !eval.exhausted()) {
      Trace nm = nelder_mead(eval, best.z, best.f, problem.initial_step, problem.tolerance);
      if (nm.f <= best.f) best = nm;
    }
  } else {
    best = nelder_mead(eval, z0, f0, problem.initial_step, problem.tolerance);
    // One restart from the reported optimum guards against a collapsed simplex.
    if (best.converged && !eval.exhausted()) {
      Trace again = nelder_mead(eval, best.z, best.f, problem.initial_step, problem.tolerance);
      const bool improved = !small_change(again.f, best.f, problem.tolerance);
      if (again.f <= best.f) best = again;
      if (improved) {
        Trace third =
            nelder_mead(eval, best.z, best.f, problem.initial_step, problem.tolerance);
        if (third.f <= best.f) best = third;
        best.converged = third.converged;
      }
    }
  }

  OptimizerResult out;
  if (best.f <= f0) {
    out.argmin = eval.to_original(best.z);
    out.value = best.f;
  } else {
    out.argmin = problem.initial;
    out.value = f0;
  }
  out.converged = best.converged;
  out.evaluations = eval.evals();
  return out;
}

}  // namespace mlv
