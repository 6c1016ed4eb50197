#pragma once

#include "mlvine/joint.hpp"

#include <memory>
#include <string>
#include <vector>

namespace mlv::testing {

inline std::vector<std::string> xterms() { return {kIntercept, "x1", "x2"}; }

inline std::shared_ptr<Marginal> poisson_marginal(double b0 = -1.0, double b1 = 0.5, double b2 = 0.5) {
  return std::make_shared<CountMarginal>(CountBase::Poisson, Inflation::None,
                                         LinearPredictor(xterms(), Eigen::Vector3d(b0, b1, b2)));
}

inline std::shared_ptr<Marginal> zoinb_marginal() {
  return std::make_shared<CountMarginal>(CountBase::NegBin2, Inflation::ZeroAndOne,
                                         LinearPredictor(xterms(), Eigen::Vector3d(-0.3, 0.4, 0.2)), 1.7,
                                         LinearPredictor(xterms(), Eigen::Vector3d(-1.5, 0.3, 0.0)),
                                         LinearPredictor(xterms(), Eigen::Vector3d(-2.0, 0.0, 0.5)));
}

inline std::shared_ptr<Marginal> semicontinuous_marginal(double alpha = 5000.0) {
  return std::make_shared<SemiContinuousMarginal>(LinearPredictor(xterms(), Eigen::Vector3d(2.0, -1.0, -2.0)),
                                                  LinearPredictor(xterms(), Eigen::Vector3d(10.0, 1.0, 0.5)),
                                                  alpha);
}

inline std::shared_ptr<Marginal> gamma_marginal() {
  return std::make_shared<GammaMarginal>(LinearPredictor(xterms(), Eigen::Vector3d(1.0, 0.3, -0.2)), 2.5);
}

inline DVineModel joe_vine(Scale s, std::vector<double> thetas, int truncation = -1) {
  std::vector<BivariateCopula> trees;
  for (double t : thetas) trees.emplace_back(CopulaFamily(Family::Joe, 180), t);
  return DVineModel(s, std::move(trees), truncation);
}

/// Three outcomes of one marginal kind with the experiment's vines and rho.
inline JointModel experiment_model(const std::shared_ptr<Marginal>& marginal, bool with_cross = true) {
  const std::vector<std::vector<double>> zeta{{1.77, 1.44, 1.19}, {3.83, 2.22, 1.44}, {18.74, 3.83, 1.77}};
  std::vector<OutcomeModel> outs;
  for (int j = 0; j < 3; ++j)
    outs.push_back({"y" + std::to_string(j + 1), marginal, joe_vine(marginal->scale(), zeta[j])});
  Eigen::Matrix3d r;
  r << 1, 0.2, 0.5, 0.2, 1, 0.8, 0.5, 0.8, 1;
  return JointModel(std::move(outs), with_cross ? GaussianCrossCopula(CorrelationMatrix(r))
                                                : GaussianCrossCopula::identity(3));
}

inline PanelDataset simulate(const JointModel& m, int n, int periods, std::uint64_t seed, int threads = 1) {
  return simulate_dataset(m, n, periods, {"x1", "x2"}, normal_bernoulli_covariates(), seed, threads);
}

}  // namespace mlv::testing
