#include "tubescore/errors.hpp"
#include "tubescore/harness.hpp"
#include "tubescore/report.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace tubescore;

namespace {

ExperimentSpec cell(int model, double eta, std::size_t reps) {
  ExperimentSpec s;
  s.model = model;
  s.eta = eta;
  s.reps = reps;
  return s;
}

}  // namespace

TEST(ExperimentSpec, Validation) {
  EXPECT_THROW(cell(4, 0.0, 10).validate(), ValidationError);
  EXPECT_THROW(cell(1, 1.5, 10).validate(), ValidationError);
  EXPECT_THROW(cell(1, 0.0, 0).validate(), ValidationError);
  auto s = cell(1, 0, 10);
  s.theta_lower = 4;
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(ExperimentSpec, ModelsMapToEstimation) {
  EXPECT_EQ(experiment_test_spec(cell(1, 0, 1)).null.estimation(), NullEstimation::None);
  EXPECT_EQ(experiment_test_spec(cell(2, 0, 1)).null.estimation(), NullEstimation::Weights);
  EXPECT_EQ(experiment_test_spec(cell(3, 0, 1)).null.estimation(), NullEstimation::WeightsAndSupports);
  const auto t = experiment_test_spec(cell(3, 0, 1));
  EXPECT_DOUBLE_EQ(t.domain.lower()[0], -4.0);
  EXPECT_DOUBLE_EQ(t.domain.upper()[0], 4.0);
}

TEST(Experiment, DeterministicAndExecutionIndependent) {
  const auto s = cell(2, 0.1, 12);
  const auto a = run_experiment(s, Execution::Serial);
  const auto b = run_experiment(s, Execution::Parallel);
  EXPECT_EQ(a.statistics, b.statistics);
  EXPECT_EQ(a.rejections, b.rejections);
  EXPECT_EQ(a.valid + a.failed.size(), s.reps);
}

TEST(Experiment, OnlyModelOneSharesConstants) {
  const auto a = run_experiment(cell(1, 0.0, 5));
  ASSERT_TRUE(a.constants.has_value());
  EXPECT_FALSE(run_experiment(cell(2, 0.0, 5)).constants.has_value());
}

TEST(Suite, Table1Layout) {
  const auto specs = table1_specs(100, 7);
  ASSERT_EQ(specs.size(), 18u);
  for (const auto& s : specs) {
    EXPECT_EQ(s.reps, 100u);
    EXPECT_EQ(s.seed, 7u);
  }
  EXPECT_EQ(specs[0].n, 200u);
  EXPECT_DOUBLE_EQ(specs[5].eta, 0.1);
  EXPECT_EQ(specs[5].n, 1000u);
}

TEST(Suite, EmptyIsRejected) { EXPECT_THROW(run_suite({}, ""), ValidationError); }

TEST(Suite, WritesReportWithDuplicateRows) {
  const auto path = (std::filesystem::temp_directory_path() / "tubescore_suite_test.json").string();
  const std::vector<ExperimentSpec> specs{cell(1, 0.0, 4), cell(1, 0.0, 4), cell(3, 0.0, 4)};
  const auto suite = run_suite(specs, path);
  ASSERT_EQ(suite.reports.size(), 3u);
  EXPECT_EQ(suite.reports[0].statistics, suite.reports[1].statistics);
  std::ifstream in(path);
  const auto j = Json::parse(in);
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(j["command"], "simulate");
  EXPECT_EQ(j["results"]["reports"].size(), 3u);
  EXPECT_EQ(j["results"]["summary"]["rows"][0]["cells"].size(), 2u);
  std::filesystem::remove(path);
}

TEST(Suite, ReproducibleNullCells) {
  const std::vector<ExperimentSpec> specs{cell(1, 0.0, 6), cell(2, 0.0, 6), cell(3, 0.0, 6)};
  const auto a = run_suite(specs, "");
  const auto b = run_suite(specs, "");
  for (std::size_t i = 0; i < specs.size(); ++i) EXPECT_EQ(a.reports[i].statistics, b.reports[i].statistics);
}

TEST(Experiment, PowerRisesWithEta) {
  // Monotone power over eta in {0, 0.1, 0.2} at n = 200, up to two standard errors.
  for (int model = 1; model <= 3; ++model) {
    double prev = -1, prev_se = 0;
    for (double eta : {0.0, 0.1, 0.2}) {
      const auto r = run_experiment(cell(model, eta, 100));
      if (prev >= 0) {
        EXPECT_GE(r.rate + 2 * std::hypot(r.std_error, prev_se), prev) << model << " " << eta;
      }
      if (eta == 0.0) {
        EXPECT_GE(r.rate, 0.0);
        EXPECT_LE(r.rate, 0.15);
      }
      prev = r.rate;
      prev_se = r.std_error;
    }
  }
}
