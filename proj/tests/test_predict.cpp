#include "helpers.hpp"

#include "mlvine/errors.hpp"
#include "mlvine/predict.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mlv;
using namespace mlv::testing;

TEST(Sample, EmpiricalCdfAndTransform) {
  const PredictiveSample s = make_sample({2, 0, 1, 5, 1}, true, "a");
  EXPECT_EQ(s.sorted, (std::vector<double>{0, 1, 1, 2, 5}));
  EXPECT_DOUBLE_EQ(s.cdf(1), 0.6);
  EXPECT_DOUBLE_EQ(s.cdf_minus(1), 0.2);
  EXPECT_DOUBLE_EQ(s.cdf(3), 0.8);
  EXPECT_DOUBLE_EQ(s.cdf_minus(3), 0.8);
  EXPECT_DOUBLE_EQ(generalized_transform(s, 1, 0.5), 0.4);
  EXPECT_DOUBLE_EQ(generalized_transform(s, 1, 0.0), 0.2);
  EXPECT_DOUBLE_EQ(generalized_transform(s, 7, 0.3), 1.0);
  EXPECT_THROW(generalized_transform(s, 1, 1.5), std::domain_error);
}

TEST(Scores, HandComputedValues) {
  const PredictiveSample s = make_sample({0, 1, 1, 2}, true);
  EXPECT_NEAR(rps(s, 1), 0.0625 + 0.0625, 1e-15);
  // observation outside the sample support still counts its step
  EXPECT_NEAR(rps(s, 4), 0.0625 + 0.5625 + 1 + 1, 1e-15);
  EXPECT_NEAR(qs(s, 1), -1.0 + 0.375, 1e-15);
  EXPECT_NEAR(qs(s, 3), 0.375, 1e-15);
  EXPECT_NEAR(sphs(s, 1), -0.5 / std::sqrt(0.375), 1e-15);
  const PredictiveSample c = make_sample({1, 2, 3, 4}, false);
  EXPECT_NEAR(rps(c, 2.5), 1.0 - 10.0 / 16.0, 1e-15);
  EXPECT_THROW(qs(c, 2), std::domain_error);
}

TEST(Scores, ProperOnAverage) {
  // the true distribution scores better than a shifted one in expectation
  RngStream rng(4);
  std::vector<double> truth, shifted;
  for (int k = 0; k < 4000; ++k) {
    const double u = rng.uniform();
    truth.push_back(u < 0.5 ? 0 : (u < 0.8 ? 1 : 2));
    shifted.push_back(u < 0.2 ? 0 : (u < 0.5 ? 1 : 2));
  }
  const auto a = make_sample(truth, true), b = make_sample(shifted, true);
  double ra = 0, rb = 0, qa = 0, qb = 0;
  for (int k = 0; k < 2000; ++k) {
    const double u = rng.uniform(), y = u < 0.5 ? 0 : (u < 0.8 ? 1 : 2);
    ra += rps(a, y);
    rb += rps(b, y);
    qa += qs(a, y);
    qb += qs(b, y);
  }
  EXPECT_LT(ra, rb);
  EXPECT_LT(qa, qb);
}

TEST(KsTest, KnownValues) {
  EXPECT_NEAR(kolmogorov_survival(0.5), 0.9639452436648751, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(1.3581), 0.0499996304316674, 1e-10);
  EXPECT_NEAR(kolmogorov_survival(2.0), 0.0006709252557796953, 1e-12);
  const std::vector<double> u{0.02, 0.05, 0.11, 0.13, 0.2, 0.22, 0.3, 0.35, 0.41, 0.44, 0.5,
                              0.52, 0.6,  0.61, 0.66, 0.7, 0.8,  0.85, 0.91, 0.99, 0.995, 0.3};
  const KsResult r = ks_uniform_test(u);
  EXPECT_NEAR(r.statistic, 0.08090909090909093, 1e-14);
  EXPECT_NEAR(r.p_value, 0.99874225762936, 1e-9);
  EXPECT_THROW(ks_uniform_test(std::vector<double>(5, 0.5)), std::invalid_argument);
}

TEST(Binomial, UpperTail) {
  EXPECT_NEAR(binomial_upper_tail(100, 69), 9.157161244117683e-05, 1e-15);
  EXPECT_NEAR(binomial_upper_tail(10, 7), 0.171875, 1e-14);
  EXPECT_DOUBLE_EQ(binomial_upper_tail(10, 0), 1.0);
  EXPECT_DOUBLE_EQ(binomial_upper_tail(10, 11), 0.0);
}

TEST(Binomial, CompareModelsCountsTiesAsHalf) {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 2, 1, 5};
  const Comparison c = compare_models(a, b);
  EXPECT_EQ(c.n, 4);
  EXPECT_EQ(c.wins, 2);
  EXPECT_EQ(c.ties, 1);
  EXPECT_DOUBLE_EQ(c.fraction, 0.625);
  EXPECT_DOUBLE_EQ(c.p_value, binomial_upper_tail(4, 3));
}

TEST(Validation, TransformIsUniformUnderTheTruth) {
  const JointModel m = experiment_model(poisson_marginal());
  const PanelDataset all = simulate(m, 400, 5, 8);
  const PanelDataset train = all.slice_periods(0, 4), hold = all.slice_periods(4, 1);
  const ValidationResult v = validate_model(m, train, hold, 1000, 3, 0, 2);
  ASSERT_EQ(v.scores.size(), 400u);
  EXPECT_GT(v.ks.p_value, 0.001);
  const ValidationResult again = validate_model(m, train, hold, 1000, 3, 0, 1);
  for (std::size_t k = 0; k < v.scores.size(); ++k) {
    EXPECT_EQ(v.scores[k].u, again.scores[k].u);
    EXPECT_EQ(v.scores[k].rps, again.scores[k].rps);
  }
}

TEST(Validation, RejectsMismatchedHoldout) {
  const JointModel m = experiment_model(poisson_marginal());
  const PanelDataset all = simulate(m, 30, 5, 8);
  EXPECT_THROW(validate_model(m, all.slice_periods(0, 3), all.slice_periods(3, 2), 1000, 1, 0), DataError);
  const PanelDataset other(all.subjects(), all.outcomes(), 1, {"x1", "x3"}, 5);
  EXPECT_THROW(validate_model(m, all.slice_periods(0, 4), other, 1000, 1, 0), DataError);
}

TEST(Validation, SemiContinuousUsesCrps) {
  const JointModel m = experiment_model(semicontinuous_marginal());
  const PanelDataset all = simulate(m, 60, 4, 8);
  const ValidationResult v = validate_model(m, all.slice_periods(0, 3), all.slice_periods(3, 1), 1000, 3, 0);
  for (const auto& s : v.scores) {
    EXPECT_TRUE(std::isnan(s.qs));
    EXPECT_GE(s.rps, -1e-9 * std::max(1.0, s.observed));
  }
}
