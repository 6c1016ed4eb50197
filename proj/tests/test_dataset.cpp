#include "helpers.hpp"

#include "mlvine/errors.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace mlv;
using namespace mlv::testing;

namespace {

PanelDataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_panel_csv(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

const char* kHeader = "subject_id,outcome_id,period,value,x1\n";

}  // namespace

TEST(PanelCsv, ParsesLongFormat) {
  const PanelDataset d = parse(std::string(kHeader) +
                               "a,y1,2,3,0.5\na,y1,3,0,1.5\nb,y1,2,1,-1\nb,y1,3,2,2\n");
  EXPECT_EQ(d.n_subjects(), 2);
  EXPECT_EQ(d.n_outcomes(), 1);
  EXPECT_EQ(d.n_periods(), 2);
  EXPECT_EQ(d.first_period(), 2);
  EXPECT_EQ(d.value(1, 0, 1), 2.0);
  EXPECT_EQ(d.covariates(0, 0, 1)(0), 1.5);
  EXPECT_EQ(d.subject_index("b"), 1);
  EXPECT_THROW(d.subject_index("c"), DataError);
}

TEST(PanelCsv, RejectsContractViolations) {
  EXPECT_NE(error_of("subject,outcome_id,period,value\n1,y,1,0\n").find("header"), std::string::npos);
  EXPECT_NE(error_of(std::string(kHeader) + "1,y,1,0\n").find("line 2: expected 5 fields"), std::string::npos);
  EXPECT_NE(error_of(std::string(kHeader) + "1,y,1.5,0,0\n").find("period must be an integer"), std::string::npos);
  EXPECT_NE(error_of(std::string(kHeader) + "1,y,1,abc,0\n").find("column 'value'"), std::string::npos);
  EXPECT_NE(error_of(std::string(kHeader) + "1,y,1,0,nan\n").find("column 'x1'"), std::string::npos);
  EXPECT_NE(error_of(std::string(kHeader) + "1,y,1,0,0\n1,y,1,2,0\n").find("line 3: duplicate"), std::string::npos);
  EXPECT_NE(error_of(std::string(kHeader) + "1,y,1,0,0\n1,y,2,0,0\n2,y,1,0,0\n").find("unbalanced"),
            std::string::npos);
  EXPECT_NE(error_of(std::string(kHeader)).find("no observations"), std::string::npos);
  EXPECT_NE(error_of(std::string(kHeader) + ",y,1,0,0\n").find("empty subject_id"), std::string::npos);
}

TEST(PanelCsv, ScaleValidation) {
  const PanelDataset d = parse(std::string(kHeader) + "1,y,1,2.5,0\n");
  EXPECT_THROW(validate_scales(d, {Scale::Discrete}), DataError);
  EXPECT_NO_THROW(validate_scales(d, {Scale::SemiContinuous}));
  EXPECT_NO_THROW(validate_scales(d, {Scale::Continuous}));
  const PanelDataset z = parse(std::string(kHeader) + "1,y,1,0,0\n");
  EXPECT_THROW(validate_scales(z, {Scale::Continuous}), DataError);
  const PanelDataset n = parse(std::string(kHeader) + "1,y,1,-1,0\n");
  EXPECT_THROW(validate_scales(n, {Scale::SemiContinuous}), DataError);
  EXPECT_THROW(validate_scales(n, {Scale::Discrete, Scale::Discrete}), DataError);
}

TEST(PanelCsv, SimulatorOutputRoundTrips) {
  for (auto marginal : {poisson_marginal(), semicontinuous_marginal(), gamma_marginal()}) {
    const JointModel m = experiment_model(marginal);
    const PanelDataset d = simulate(m, 40, 5, 3);
    std::ostringstream out;
    write_panel_csv(out, d);
    const PanelDataset back = parse(out.str());
    std::vector<Scale> scales(3, marginal->scale());
    EXPECT_NO_THROW(validate_scales(back, scales));
    ASSERT_EQ(back.n_subjects(), d.n_subjects());
    for (int i = 0; i < d.n_subjects(); ++i)
      for (int j = 0; j < 3; ++j)
        for (int t = 0; t < 5; ++t) {
          EXPECT_EQ(back.value(i, j, t), d.value(i, j, t));
          EXPECT_EQ(back.covariates(i, j, t), d.covariates(i, j, t));
        }
    std::ostringstream again;
    write_panel_csv(again, back);
    EXPECT_EQ(again.str(), out.str());
  }
}

TEST(PanelCsv, SlicePeriodsKeepsLabels) {
  const PanelDataset d = simulate(experiment_model(poisson_marginal()), 5, 5, 1);
  const PanelDataset h = d.slice_periods(4, 1);
  EXPECT_EQ(h.first_period(), 5);
  EXPECT_EQ(h.n_periods(), 1);
  EXPECT_EQ(h.value(2, 1, 0), d.value(2, 1, 4));
}

TEST(FormatReal, ShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(3.0), "3");
  EXPECT_EQ(std::stod(format_real(1.0 / 3.0)), 1.0 / 3.0);
}
