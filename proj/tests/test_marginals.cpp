#include "helpers.hpp"

#include "mlvine/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mlv;
using namespace mlv::testing;

namespace {

Eigen::RowVectorXd row(double x1, double x2) {
  Eigen::RowVectorXd r(2);
  r << x1, x2;
  return r;
}

std::vector<std::string> schema() { return {"x1", "x2"}; }

}  // namespace

TEST(CountMarginal, AllFamiliesArePmfs) {
  for (const char* fam : {"poisson", "nb2", "zip", "zinb", "zoip", "zoinb", "oip", "oinb"}) {
    auto m = make_marginal({fam, xterms(), xterms()});
    Eigen::VectorXd p = m->parameters();
    for (Eigen::Index k = 0; k < p.size(); ++k) p(k) = 0.3 - 0.1 * static_cast<double>(k);
    const auto names = m->parameter_names();
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == "phi") p(static_cast<Eigen::Index>(k)) = 1.3;
    m->set_parameters(p);
    m->bind(schema());
    const auto x = row(0.4, 1.0);
    double total = 0.0, F = 0.0;
    for (int y = 0; y < 400; ++y) {
      const CdfPoint c = m->evaluate(x, y);
      EXPECT_TRUE(c.atom);
      EXPECT_NEAR(c.F_minus, F, 1e-12) << fam << " y=" << y;
      EXPECT_NEAR(c.F - c.F_minus, c.f, 1e-12) << fam;
      total += c.f;
      F = c.F;
    }
    EXPECT_NEAR(total, 1.0, 1e-10) << fam;
    for (double u : {0.05, 0.5, 0.93}) {
      const double q = m->quantile(x, u);
      EXPECT_GE(m->cdf(x, q), u) << fam;
      if (q > 0) EXPECT_LT(m->cdf(x, q - 1), u) << fam;
    }
  }
}

TEST(CountMarginal, ZeroOneInflationFormula) {
  auto m = zoinb_marginal()->clone();
  m->bind(schema());
  const auto x = row(0.2, 1.0);
  const auto& c = static_cast<const CountMarginal&>(*m);
  const auto [p0, p1] = c.inflation_probs(x);
  const double mu = c.base_mean(x), phi = c.phi();
  auto nb = [&](int y) {
    return std::exp(std::lgamma(y + phi) - std::lgamma(phi) - std::lgamma(y + 1.0) + phi * std::log(phi / (phi + mu)) +
                    y * std::log(mu / (phi + mu)));
  };
  const double w = 1 - p0 - p1;
  EXPECT_NEAR(c.pmf(x, 0), p0 + w * nb(0), 1e-13);
  EXPECT_NEAR(c.pmf(x, 1), p1 + w * nb(1), 1e-13);
  EXPECT_NEAR(c.pmf(x, 4), w * nb(4), 1e-13);
  // multinomial logit weights
  const double e0 = std::exp(-1.5 + 0.3 * 0.2), e1 = std::exp(-2.0 + 0.5);
  EXPECT_NEAR(p0, e0 / (1 + e0 + e1), 1e-14);
  EXPECT_NEAR(p1, e1 / (1 + e0 + e1), 1e-14);
}

TEST(SemiContinuous, ZeroProbabilityFromLogit) {
  auto m = semicontinuous_marginal()->clone();
  m->bind(schema());
  const auto& s = static_cast<const SemiContinuousMarginal&>(*m);
  EXPECT_NEAR(s.zero_prob(row(0.0, 1.0)), 0.5, 1e-15);
  const CdfPoint z = m->evaluate(row(0.0, 1.0), 0.0);
  EXPECT_TRUE(z.atom);
  EXPECT_NEAR(z.F, 0.5, 1e-15);
  EXPECT_EQ(z.F_minus, 0.0);
  const CdfPoint p = m->evaluate(row(0.0, 1.0), std::exp(10.5));
  EXPECT_FALSE(p.atom);
  EXPECT_NEAR(p.F, 0.5 + 0.5 * gamma_cdf(std::exp(10.5), 5000, std::exp(10.5) / 5000), 1e-12);
  EXPECT_NEAR(std::log(p.f), m->log_density(row(0.0, 1.0), std::exp(10.5)), 1e-10);
}

TEST(SemiContinuous, DensityIntegratesToPositiveMass) {
  auto m = std::make_shared<SemiContinuousMarginal>(LinearPredictor(xterms(), Eigen::Vector3d(0.3, 0.0, 0.0)),
                                                    LinearPredictor(xterms(), Eigen::Vector3d(1.0, 0.0, 0.0)), 2.0);
  m->bind(schema());
  const auto x = row(0, 0);
  const double q = m->evaluate(x, 0.0).F;
  const double mass = integrate([&](double y) { return m->evaluate(x, y).f; }, 1e-12, 200.0, 1e-12);
  EXPECT_NEAR(q + mass, 1.0, 1e-8);
  for (double u : {0.2, 0.7, 0.99}) {
    const double y = m->quantile(x, u);
    if (u <= q) EXPECT_EQ(y, 0.0);
    else EXPECT_NEAR(m->cdf(x, y), u, 1e-9);
  }
}

TEST(GammaMarginal, CdfAndQuantile) {
  auto m = gamma_marginal()->clone();
  m->bind(schema());
  const auto x = row(0.5, 1.0);
  for (double u : {0.01, 0.5, 0.99}) EXPECT_NEAR(m->cdf(x, m->quantile(x, u)), u, 1e-10);
  EXPECT_NEAR(std::log(m->evaluate(x, 2.0).f), m->log_density(x, 2.0), 1e-12);
}

TEST(LinearPredictor, BindErrors) {
  LinearPredictor lp({kIntercept, "missing"}, Eigen::Vector2d(1, 2));
  EXPECT_THROW(lp.bind(schema()), DataError);
  LinearPredictor ok({kIntercept, "x2"}, Eigen::Vector2d(1, 2));
  ok.bind(schema());
  EXPECT_DOUBLE_EQ(ok.eval(row(7.0, 3.0)), 7.0);
}

TEST(FitMarginal, RecoversPoissonRegression) {
  const JointModel m = experiment_model(poisson_marginal(), false).independence();
  const PanelDataset d = simulate(m, 2000, 3, 5);
  const MarginalFit f = fit_marginal(MarginalSpec{"poisson", xterms(), xterms()}, d, 0);
  ASSERT_TRUE(f.converged);
  const Eigen::VectorXd p = f.model->parameters();
  EXPECT_NEAR(p(0), -1.0, 4 * f.se(0));
  EXPECT_NEAR(p(1), 0.5, 4 * f.se(1));
  EXPECT_NEAR(p(2), 0.5, 4 * f.se(2));
  EXPECT_NEAR(f.loglik, marginal_loglik(*f.model, d, 0), 1e-8);
  EXPECT_NEAR(f.aic, -2 * f.loglik + 6, 1e-8);
}

TEST(FitMarginal, RecoversSemiContinuousRegression) {
  const JointModel m = experiment_model(semicontinuous_marginal(), false).independence();
  const PanelDataset d = simulate(m, 1500, 3, 8);
  const MarginalFit f = fit_marginal(MarginalSpec{"logit-gamma", xterms(), xterms()}, d, 1);
  ASSERT_TRUE(f.converged);
  const Eigen::VectorXd p = f.model->parameters();
  const double truth[] = {2.0, -1.0, -2.0, 10.0, 1.0, 0.5, 5000.0};
  for (int k = 0; k < 7; ++k) EXPECT_NEAR(p(k), truth[k], 4 * f.se(k)) << f.model->parameter_names()[k];
}

TEST(GoodnessOfFit, PearsonTablePoolsTail) {
  const JointModel m = experiment_model(poisson_marginal(), false).independence();
  const PanelDataset d = simulate(m, 500, 4, 3);
  auto cm = poisson_marginal();
  cm->bind(d.covariate_names());
  const GofTable g = chisq_gof(static_cast<const CountMarginal&>(*cm), d, 0);
  double obs = 0, exp = 0;
  for (std::size_t k = 0; k < g.observed.size(); ++k) {
    obs += g.observed[k];
    exp += g.expected[k];
    EXPECT_GE(g.expected[k], 1.0);
  }
  EXPECT_DOUBLE_EQ(obs, 2000.0);
  EXPECT_NEAR(exp, 2000.0, 1e-6);
  EXPECT_GT(g.statistic, 0.0);
}
