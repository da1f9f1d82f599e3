#pragma once

#include "tubescore/errors.hpp"
#include "tubescore/report.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tubescore {

/// Raised for malformed configuration or data files; maps to exit status 1.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct ConstantsSection {
  int d = 1;
  double kappa0 = 0.0;
  double ell0 = 0.0;
  int euler = 1;
};

struct SimulateSection {
  bool table1 = false;
  std::vector<int> models{1, 2, 3};
  std::vector<double> etas{0.0};
  std::vector<std::size_t> sizes{200};
  std::size_t reps = 300;
};

/// Parsed configuration. Sections: [null], [perturbation], [test], [mc],
/// [output], [constants], [simulate], [tail].
struct RunConfig {
  // [null]
  std::string null_family;
  int dim = 1;
  NullEstimation estimation = NullEstimation::None;
  std::vector<Vec> supports;
  std::vector<double> weights;  // empty: equal weights
  // [perturbation]
  std::string perturbation_family;
  std::optional<ThetaDomain> domain;
  double eta = 0.0;
  // [test]
  double alpha = 0.05;
  int grid = kDefaultGridPoints;
  std::optional<double> flip_exclusion;
  std::optional<double> removable_exclusion;
  int max_components = 5;
  // [mc]
  std::size_t replicates = 100000;
  std::uint64_t seed = 20240601;
  std::size_t n = 500;
  std::string mode = "field";  // field | null | equivalence
  std::vector<double> thresholds;
  std::vector<std::size_t> sizes{200, 500, 2000};
  // [output]
  std::string output_path;
  std::string format = "json";
  // [constants], [simulate], [tail]
  std::optional<ConstantsSection> constants;
  std::optional<SimulateSection> simulate;
  std::vector<double> tail_thresholds;

  std::vector<std::string> warnings;

  bool has_model() const { return !null_family.empty(); }
  DensityFamily family() const;
  NullModel null_model() const;
  TestSpec test_spec() const;
};

/// `key = value` lines under `[section]` headers, `#` comments. Unknown keys,
/// malformed numbers (with line number) and missing required keys are errors;
/// a repeated key keeps its last value and records a warning.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Header `x1[,x2,...]`, one observation per row.
Dataset parse_csv(const std::string& text);
Dataset ingest_csv(const std::string& path);

Json to_json(const RunConfig& config);

/// Entry point of the command-line tool; returns the exit status
/// (0 success, 1 validation error, 2 numerical failure).
int run_cli(int argc, char** argv);

}  // namespace tubescore
