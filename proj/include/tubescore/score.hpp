#pragma once

#include "tubescore/geometry.hpp"
#include "tubescore/kernels.hpp"

#include <memory>
#include <string>
#include <vector>

namespace tubescore {

/// Evaluation points over Theta. Points are sorted lexicographically; flanking
/// points at the exclusion radius on either side of each singularity are
/// inserted and never excluded.
struct Grid {
  std::vector<Vec> points;
  std::vector<std::size_t> excluded;  // regular points closer than the exclusion radius
};

inline constexpr int kDefaultGridPoints = 401;

/// points_per_axis equispaced points per axis over the bounding box (kept
/// when inside the domain), plus the singularity flanks.
Grid make_grid(const ThetaDomain& domain, const std::vector<Singularity>& singularities,
               int points_per_axis = kDefaultGridPoints, const GeometryOptions& opts = {});

struct ProcessEvaluation {
  std::vector<Vec> grid;
  Vec raw;
  Vec diag;        // C(theta, theta) of the active kernel
  Vec normalized;  // NaN at excluded points
  double n = 0.0;
  std::vector<std::size_t> excluded;  // grid exclusions plus points with diag below eps_sing
};

/// S and S* over the grid with the kernel's null. SupportViolation when the
/// null density vanishes at an observation.
ProcessEvaluation evaluate_process(const Dataset& data, const ScoreKernel& kernel, const Grid& grid,
                                   Execution exec = Execution::Parallel,
                                   double eps_sing = kSingularityTolerance);

ProcessEvaluation score_process(const Dataset& data, const NullModel& null, const ThetaDomain& domain,
                                const Grid& grid, Execution exec = Execution::Parallel);
/// Same with the fitted null and C*.
ProcessEvaluation score_process_nuisance(const Dataset& data, const NullModel& fitted, const ThetaDomain& domain,
                                         const Grid& grid, Execution exec = Execution::Parallel);

struct Maximum {
  double value = 0.0;
  Vec location;
  std::size_t index = 0;
};

/// sup of S* over non-excluded points; ties go to the first (smallest) point.
Maximum statistic(const ProcessEvaluation& evaluation);

/// Range of the perturbation size in the profile likelihood. Unit is the
/// mixture range [0, 1]. Positivity lets eta grow while (1 - eta) f + eta psi
/// stays positive at every observation, which is the range the score/LRT
/// equivalence argument profiles over.
enum class EtaRange { Unit, Positivity };

/// Maximizer of the per-theta likelihood in eta.
double eta_hat(const Dataset& data, const NullModel& null, const Vec& theta, EtaRange range = EtaRange::Unit);

/// l*(theta) = l(eta_hat, theta) - l(0) at every grid point.
Vec lrt_profile(const Dataset& data, const NullModel& null, const Grid& grid, EtaRange range = EtaRange::Unit,
                Execution exec = Execution::Parallel);

struct FitResult {
  MixingDistribution mixing;
  std::vector<double> loglik_trace;  // one entry per iteration, starting at the initial value
  int iterations = 0;
  bool converged = false;
  /// Largest |S(theta_j)| and |S'(theta_j)| at the fitted supports (fit_full only).
  double stationarity = 0.0;
  std::vector<std::string> warnings;
};

struct FitOptions {
  double weight_tolerance = 1e-10;
  double loglik_tolerance = 1e-10;
  int max_iterations = 10000;
  double drop_weight = 1e-8;
  double merge_distance = 1e-8;
  double stationarity_tolerance = 1e-6;
};

double mixture_loglik(const Dataset& data, const DensityFamily& family, const MixingDistribution& q);

/// EM over the weights with supports held fixed. Weights below drop_weight are
/// removed together with their supports.
FitResult fit_weights(const Dataset& data, const DensityFamily& family, const std::vector<Vec>& supports,
                      const FitOptions& opts = {});

/// EM over weights and supports from the given starting supports.
FitResult fit_full(const Dataset& data, const DensityFamily& family, const std::vector<Vec>& initial_supports,
                   const FitOptions& opts = {});

/// What to test: the null (its mixing gives the fixed lambda or the starting
/// point of the fit), the search domain and the calibration settings.
struct TestSpec {
  NullModel null;
  ThetaDomain domain;
  double alpha = 0.05;
  int grid_points = kDefaultGridPoints;
  GeometryOptions geometry;
  FitOptions fit;
  KernelStrategy strategy = KernelStrategy::Auto;
};

/// Everything about a test that depends on the (fitted) null but not on the
/// data: kernel, singularities, tube constants, grid and kernel diagonal.
struct Calibration {
  NullModel fitted;
  std::shared_ptr<const ScoreKernel> kernel;
  ManifoldSummary manifold;
  TubeConstants constants;
  double critical_value = 0.0;
  Grid grid;
  Vec diag;
};

/// Kernel kind follows the null: C when nothing is estimated, C* otherwise.
Calibration calibrate(const NullModel& fitted, const TestSpec& spec, Execution exec = Execution::Parallel);

/// Fit of the null requested by spec (returns the null itself when nothing is estimated).
NullModel fit_null(const Dataset& data, const TestSpec& spec, std::vector<std::string>* warnings = nullptr);

ProcessEvaluation evaluate_process(const Dataset& data, const Calibration& calibration,
                                   Execution exec = Execution::Parallel);

struct TestOutcome {
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;  // 1 when T <= 0
  Vec argmax;
  NullModel fitted;
  TubeConstants constants;
  ManifoldSummary manifold;
  bool reject = false;
  std::vector<std::string> warnings;
};

/// Fits the null as requested, then calibrates T with the tube series. A
/// precomputed calibration skips fitting and geometry; only valid for fixed nulls.
TestOutcome run_test(const Dataset& data, const TestSpec& spec, const Calibration* precomputed = nullptr,
                     Execution exec = Execution::Parallel);

struct BuildStep {
  int components = 1;
  MixingDistribution mixing;  // fitted null of this step
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;
  double kappa0 = 0.0;
  double ell0 = 0.0;
  Vec argmax;
  bool reject = false;
};

struct BuildResult {
  MixingDistribution mixing;
  std::vector<BuildStep> steps;
  std::vector<std::string> warnings;
};

/// Adds components at the argmax of the score process while the test rejects.
BuildResult sequential_build(const Dataset& data, const DensityFamily& family, const ThetaDomain& domain,
                             double alpha = 0.05, int max_components = 5, int grid_points = kDefaultGridPoints,
                             NullEstimation estimation = NullEstimation::WeightsAndSupports,
                             Execution exec = Execution::Parallel);

}  // namespace tubescore
