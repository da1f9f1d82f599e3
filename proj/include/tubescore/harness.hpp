#pragma once

#include "tubescore/score.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tubescore {

/// One cell of the three-component normal experiment. Data come from
/// 0.5(1-eta) N(-2,1) + eta N(0,1) + 0.5(1-eta) N(2,1).
///   model 1: null 0.5 N(-2,1) + 0.5 N(2,1) fully specified
///   model 2: weights estimated, supports fixed at -2 and 2
///   model 3: weights and supports estimated, EM started at -2 and 2
struct ExperimentSpec {
  int model = 1;
  double eta = 0.0;
  std::size_t n = 200;
  std::size_t reps = 300;
  double alpha = 0.05;
  std::uint64_t seed = 20240601;
  int grid_points = kDefaultGridPoints;
  double theta_lower = -4.0;
  double theta_upper = 4.0;

  void validate() const;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::size_t rejections = 0;
  std::size_t valid = 0;  // replicates that completed
  double rate = 0.0;      // rejections / valid
  double std_error = 0.0;
  std::vector<double> statistics;       // per replicate, NaN when it failed
  std::vector<double> critical_values;  // per replicate, NaN when it failed
  std::vector<std::size_t> failed;
  std::vector<std::string> failure_messages;
  std::optional<TubeConstants> constants;  // model 1 only: shared by every replicate
  double wall_clock_seconds = 0.0;
};

/// Test spec used for a model id (null, domain, alpha, grid).
TestSpec experiment_test_spec(const ExperimentSpec& spec);
/// Data-generating model of a cell.
PerturbationModel experiment_truth(const ExperimentSpec& spec);

/// Replicate r uses the stream derive_seed(seed, r), so cells sharing a seed,
/// eta and n see the same datasets whatever the model.
ExperimentReport run_experiment(const ExperimentSpec& spec, Execution exec = Execution::Parallel);

/// The 18 cells of the published table: three models, n = 200 with eta in
/// {0, 0.1, 0.2} and n = 1000 with eta in {0, 0.05, 0.1}.
std::vector<ExperimentSpec> table1_specs(std::size_t reps, std::uint64_t seed, int grid_points = kDefaultGridPoints);

struct SuiteReport {
  std::vector<ExperimentReport> reports;
  double wall_clock_seconds = 0.0;
};

/// Runs every spec in order (no deduplication) and, when path is not empty,
/// writes the JSON report there.
SuiteReport run_suite(const std::vector<ExperimentSpec>& specs, const std::string& path,
                      Execution exec = Execution::Parallel);

}  // namespace tubescore
