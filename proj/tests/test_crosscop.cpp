#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mlv;
using namespace mlv::testing;

namespace {

GaussianCrossCopula cop3() {
  Eigen::Matrix3d r;
  r << 1, 0.2, 0.5, 0.2, 1, 0.8, 0.5, 0.8, 1;
  return GaussianCrossCopula(CorrelationMatrix(r));
}

double corner_sum(const GaussianCrossCopula& g, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double s = 0.0;
  for (int mask = 0; mask < 8; ++mask) {
    Eigen::Vector3d c;
    int lows = 0;
    for (int k = 0; k < 3; ++k) {
      const bool low = (mask >> k) & 1;
      c(k) = low ? lo(k) : hi(k);
      lows += low;
    }
    s += (lows % 2 ? -1.0 : 1.0) * g.cdf(c);
  }
  return s;
}

}  // namespace

TEST(CrossCopula, RectangleIsInclusionExclusion) {
  const auto g = cop3();
  RngStream rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::Vector3d lo, hi;
    for (int k = 0; k < 3; ++k) {
      const double a = rng.uniform(), b = rng.uniform();
      lo(k) = std::min(a, b);
      hi(k) = std::max(a, b);
    }
    EXPECT_NEAR(g.rectangle(lo, hi), corner_sum(g, lo, hi), 1e-7);
  }
}

TEST(CrossCopula, RectangleMatchesMonteCarlo) {
  const auto g = cop3();
  const Eigen::Vector3d lo(0.2, 0.1, 0.3), hi(0.7, 0.6, 0.9);
  const Eigen::Matrix3d L = g.corr().matrix().llt().matrixL();
  RngStream rng(99);
  const int n = 1000000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d e;
    for (int k = 0; k < 3; ++k) e(k) = std_normal_quantile(rng.uniform());
    const Eigen::Vector3d z = L * e;
    bool in = true;
    for (int k = 0; k < 3; ++k) {
      const double u = std_normal_cdf(z(k));
      in = in && u > lo(k) && u <= hi(k);
    }
    hits += in;
  }
  const double p = static_cast<double>(hits) / n, se = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(g.rectangle(lo, hi), p, 3 * se);
}

TEST(CrossCopula, HybridReductions) {
  const auto g = cop3();
  const Eigen::Vector3d lo(0.1, 0.2, 0.3), hi(0.6, 0.5, 0.8);
  EXPECT_NEAR(g.hybrid(lo, hi, {false, false, false}), g.rectangle(lo, hi), 1e-14);
  EXPECT_NEAR(g.hybrid(lo, hi, {true, true, true}), g.density(hi), 1e-12);
  EXPECT_NEAR(std::log(g.density(hi)), g.log_density(hi), 1e-12);
  // d/du1 of the cdf by central differences
  const double e = 1e-5;
  Eigen::Vector3d a = hi, b = hi;
  a(0) += e;
  b(0) -= e;
  EXPECT_NEAR(g.mixed_partial(hi, {0}), (g.cdf(a) - g.cdf(b)) / (2 * e), 1e-6);
  // d2/du1du3
  auto at = [&](double s0, double s2) {
    Eigen::Vector3d c = hi;
    c(0) += s0;
    c(2) += s2;
    return g.cdf(c);
  };
  const double h = 1e-4;
  EXPECT_NEAR(g.mixed_partial(hi, {0, 2}), (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h), 1e-5);
  EXPECT_THROW(g.mixed_partial(hi, {}), std::invalid_argument);
  // a continuous coordinate combined with a rectangle in the others
  const double fd = ((g.rectangle(Eigen::Vector3d(hi(0) - e, lo(1), lo(2)), Eigen::Vector3d(hi(0) + e, hi(1), hi(2)))) /
                     (2 * e));
  EXPECT_NEAR(g.hybrid(lo, hi, {true, false, false}), fd, 1e-6);
}

TEST(CrossCopula, DensityFormulaAndPairMargins) {
  const auto g = cop3();
  const Eigen::Vector3d u(0.3, 0.6, 0.45);
  Eigen::Vector3d z;
  for (int k = 0; k < 3; ++k) z(k) = std_normal_quantile(u(k));
  const Eigen::Matrix3d R = g.corr().matrix();
  const double expect = std::exp(-0.5 * z.dot((R.inverse() - Eigen::Matrix3d::Identity()) * z)) / std::sqrt(R.determinant());
  EXPECT_NEAR(g.density(u), expect, 1e-12);
  const BivariateCopula p = g.pair(1, 2);
  EXPECT_NEAR(p.theta(), 0.8, 1e-15);
  EXPECT_NEAR(p.cdf(0.6, 0.45), g.cdf(Eigen::Vector3d(1.0, 0.6, 0.45)), 1e-9);
}

TEST(CrossCopula, CrossSectionPmfSumsToOne) {
  std::vector<OutcomeModel> outs;
  for (int j = 0; j < 3; ++j) outs.push_back({"y" + std::to_string(j), poisson_marginal(), DVineModel(Scale::Discrete, {})});
  const JointModel m(outs, cop3());
  const double mu[3] = {0.6, 1.1, 0.4};
  auto point = [](double lambda, int y) {
    double F = 0, f = 0, t = std::exp(-lambda);
    for (int k = 0; k <= y; ++k) {
      f = t;
      F += t;
      t *= lambda / (k + 1);
    }
    return CdfPoint{F, F - f, f, true};
  };
  double total = 0.0;
  const int K = 14;
  for (int a = 0; a <= K; ++a)
    for (int b = 0; b <= K; ++b)
      for (int c = 0; c <= K; ++c)
        total += std::exp(period_loglik(m, {point(mu[0], a), point(mu[1], b), point(mu[2], c)}));
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(CompositeFit, RecoversCorrelations) {
  const JointModel m = experiment_model(poisson_marginal());
  const PanelDataset d = simulate(m, 1000, 4, 41);
  const JointModel b = m.bound(d.covariate_names());
  std::vector<CrossSection> rows;
  for (int i = 0; i < d.n_subjects(); ++i)
    for (auto& r : conditional_points(b, d, i)) rows.push_back(r);
  const CompositeFit f = fit_pairwise(rows, 3);
  EXPECT_TRUE(f.converged);
  EXPECT_NEAR(f.copula.corr()(0, 1), 0.2, 0.08);
  EXPECT_NEAR(f.copula.corr()(0, 2), 0.5, 0.08);
  EXPECT_NEAR(f.copula.corr()(1, 2), 0.8, 0.08);
  const Eigen::MatrixXd start = f.copula.corr().matrix();
  const CompositeFit w = fit_pairwise(rows, 3, 1, &start);
  EXPECT_NEAR(w.copula.corr()(1, 2), f.copula.corr()(1, 2), 1e-6);
  EXPECT_NEAR(pairwise_composite_loglik(f.copula, rows), f.loglik, 1e-6 * std::abs(f.loglik));
}
