#include "mlvine/crosscop.hpp"

#include "mlvine/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace mlv {

namespace {

double to_z(double u) {
  if (u <= 0.0) return -kInf;
  if (u >= 1.0) return kInf;
  return std_normal_quantile(u);
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = m(rows[a], cols[b]);
  return out;
}

}  // namespace

GaussianCrossCopula::GaussianCrossCopula(CorrelationMatrix corr) : corr_(std::move(corr)) {
  const Eigen::MatrixXd& r = corr_.matrix();
  llt_.compute(r);
  if (llt_.info() != Eigen::Success) throw std::invalid_argument("cross-outcome correlation matrix is singular");
  log_det_ = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  identity_ = r.isIdentity(0.0);
}

double GaussianCrossCopula::log_density(const Eigen::VectorXd& u) const {
  if (u.size() != dim()) throw std::invalid_argument("density: dimension mismatch");
  if (identity_) return 0.0;
  Eigen::VectorXd z(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) z(k) = std_normal_quantile(std::clamp(u(k), kCopulaClamp, 1.0 - kCopulaClamp));
  const double q = z.dot(llt_.solve(z)) - z.squaredNorm();
  return -0.5 * log_det_ - 0.5 * q;
}

double GaussianCrossCopula::density(const Eigen::VectorXd& u) const { return std::exp(log_density(u)); }

double GaussianCrossCopula::cdf(const Eigen::VectorXd& u) const {
  return rectangle(Eigen::VectorXd::Zero(u.size()), u);
}

double GaussianCrossCopula::rectangle(const Eigen::VectorXd& lower_u, const Eigen::VectorXd& upper_u) const {
  if (lower_u.size() != dim() || upper_u.size() != dim())
    throw std::invalid_argument("rectangle: dimension mismatch");
  for (Eigen::Index k = 0; k < dim(); ++k)
    if (!(upper_u(k) > lower_u(k))) return 0.0;
  if (identity_) return (upper_u - lower_u).prod();
  Eigen::VectorXd lo(dim()), hi(dim());
  for (Eigen::Index k = 0; k < dim(); ++k) {
    lo(k) = to_z(lower_u(k));
    hi(k) = to_z(upper_u(k));
  }
  return mvn_rectangle(lo, hi, corr_.matrix());
}

double GaussianCrossCopula::hybrid(const Eigen::VectorXd& lower_u, const Eigen::VectorXd& upper_u,
                                   const std::vector<bool>& continuous) const {
  if (static_cast<int>(continuous.size()) != dim()) throw std::invalid_argument("hybrid: dimension mismatch");
  std::vector<int> L, A;
  for (int k = 0; k < dim(); ++k) (continuous[static_cast<std::size_t>(k)] ? L : A).push_back(k);
  if (L.empty()) return rectangle(lower_u, upper_u);
  if (A.empty()) return density(upper_u);
  for (int a : A)
    if (!(upper_u(a) > lower_u(a))) return 0.0;

  const Eigen::MatrixXd& r = corr_.matrix();
  Eigen::VectorXd zl(static_cast<Eigen::Index>(L.size()));
  Eigen::VectorXd ul(static_cast<Eigen::Index>(L.size()));
  for (std::size_t k = 0; k < L.size(); ++k) {
    ul(static_cast<Eigen::Index>(k)) = upper_u(L[k]);
    zl(static_cast<Eigen::Index>(k)) = std_normal_quantile(std::clamp(upper_u(L[k]), kCopulaClamp, 1.0 - kCopulaClamp));
  }
  if (identity_) {
    double p = 1.0;
    for (int a : A) p *= upper_u(a) - lower_u(a);
    return p;
  }

  const Eigen::MatrixXd rll = submatrix(r, L, L);
  const Eigen::MatrixXd ral = submatrix(r, A, L);
  const Eigen::MatrixXd raa = submatrix(r, A, A);
  const Eigen::LLT<Eigen::MatrixXd> llt(rll);
  double c_l = 1.0;
  if (L.size() > 1) c_l = GaussianCrossCopula(CorrelationMatrix(rll)).density(ul);

  const Eigen::VectorXd mu = ral * llt.solve(zl);
  const Eigen::MatrixXd cov = raa - ral * llt.solve(ral.transpose());
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  const auto m = static_cast<Eigen::Index>(A.size());
  Eigen::VectorXd lo(m), hi(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    lo(a) = (to_z(lower_u(A[static_cast<std::size_t>(a)])) - mu(a)) / sd(a);
    hi(a) = (to_z(upper_u(A[static_cast<std::size_t>(a)])) - mu(a)) / sd(a);
  }
  Eigen::MatrixXd cc = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  cc.diagonal().setOnes();
  return c_l * mvn_rectangle(lo, hi, cc);
}

double GaussianCrossCopula::mixed_partial(const Eigen::VectorXd& u, const std::vector<int>& L) const {
  if (u.size() != dim()) throw std::invalid_argument("mixed_partial: dimension mismatch");
  if (L.empty()) throw std::invalid_argument("mixed_partial: empty index set, use cdf");
  if (static_cast<int>(L.size()) >= dim()) throw std::invalid_argument("mixed_partial: all indices, use density");
  std::vector<bool> cont(static_cast<std::size_t>(dim()), false);
  for (int l : L) {
    if (l < 0 || l >= dim()) throw std::out_of_range("mixed_partial: index out of range");
    cont[static_cast<std::size_t>(l)] = true;
  }
  return hybrid(Eigen::VectorXd::Zero(dim()), u, cont);
}

BivariateCopula GaussianCrossCopula::pair(int j, int k) const {
  return BivariateCopula(CopulaFamily(Family::Gaussian, 0), corr_(j, k));
}

double pair_composite_loglik(double rho, int j, int k, const std::vector<CrossSection>& rows) {
  const BivariateCopula c(CopulaFamily(Family::Gaussian, 0), rho);
  double s = 0.0;
  for (const auto& row : rows)
    s += std::log(std::max(pair_joint(c, row[static_cast<std::size_t>(j)], row[static_cast<std::size_t>(k)]),
                           kProbFloor));
  return s;
}

double pairwise_composite_loglik(const GaussianCrossCopula& g, const std::vector<CrossSection>& rows) {
  double s = 0.0;
  for (int j = 1; j < g.dim(); ++j)
    for (int k = 0; k < j; ++k) s += pair_composite_loglik(g.corr()(j, k), j, k, rows);
  return s;
}

CompositeFit fit_pairwise(const std::vector<CrossSection>& rows, int dim, int threads, const Eigen::MatrixXd* start) {
  if (dim < 2) throw std::invalid_argument("fit_pairwise: need at least two outcomes");
  for (const auto& row : rows)
    if (static_cast<int>(row.size()) != dim) throw std::invalid_argument("fit_pairwise: row dimension mismatch");
  std::vector<std::pair<int, int>> pairs;
  for (int j = 1; j < dim; ++j)
    for (int k = 0; k < j; ++k) pairs.emplace_back(j, k);

  std::vector<double> rho(pairs.size(), 0.0), value(pairs.size(), 0.0);
  std::vector<char> ok(pairs.size(), 1);
  const Interval bounds{-0.999, 0.999};
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    const auto [j, k] = pairs[p];
    auto nll = [&](double r) { return -pair_composite_loglik(r, j, k, rows); };
    double lo = bounds.lo, hi = bounds.hi;
    if (start && std::abs((*start)(j, k)) < 0.99) {
      lo = std::max(bounds.lo, (*start)(j, k) - 0.15);
      hi = std::min(bounds.hi, (*start)(j, k) + 0.15);
    } else {
      double best = 0.0, best_v = nll(0.0);
      for (int g = -9; g <= 9; ++g) {
        const double r = 0.1 * g;
        const double v = nll(r);
        if (v < best_v) {
          best_v = v;
          best = r;
        }
      }
      lo = std::max(bounds.lo, best - 0.1);
      hi = std::min(bounds.hi, best + 0.1);
    }
    ScalarMin res = minimize_scalar(nll, lo, hi, 1e-9);
    // A minimizer pinned to a window edge is searched again on the full range.
    if ((res.x - lo < 1e-6 && lo > bounds.lo) || (hi - res.x < 1e-6 && hi < bounds.hi))
      res = minimize_scalar(nll, bounds.lo, bounds.hi, 1e-9);
    rho[p] = res.x;
    value[p] = res.value;
    ok[p] = std::isfinite(res.value) ? 1 : 0;
  });

  CompositeFit fit;
  fit.pairwise_rho = Eigen::MatrixXd::Identity(dim, dim);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [j, k] = pairs[p];
    fit.pairwise_rho(j, k) = fit.pairwise_rho(k, j) = rho[p];
    fit.loglik -= value[p];
    fit.converged = fit.converged && ok[p];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.pairwise_rho);
  Eigen::MatrixXd r = fit.pairwise_rho;
  if (eig.eigenvalues().minCoeff() < 1e-6) {
    r = nearest_correlation(r, 1e-6);
    fit.projected = true;
  }
  fit.copula = GaussianCrossCopula(CorrelationMatrix(r));
  return fit;
}

std::string pair_label(const std::string& a, const std::string& b) { return a + "-" + b; }

}  // namespace mlv
