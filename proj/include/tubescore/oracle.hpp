#pragma once

#include "tubescore/score.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tubescore {

/// Empirical P(sup >= c) at each threshold with binomial standard errors.
struct TailCurve {
  std::vector<double> thresholds;
  std::vector<double> exceedance;
  std::vector<double> std_error;
  std::size_t replicates = 0;
  double jitter = 0.0;  // diagonal jitter the factorization needed
};

/// Cholesky factor of a correlation matrix after adding jitter * I, trying
/// initial_jitter, then x100 steps up to 1e-6. IllConditionedKernel beyond that.
struct FieldFactor {
  Mat chol;
  double jitter = 0.0;
};
FieldFactor factor_correlation(const Mat& rho, double initial_jitter = 1e-10);

/// Grid points usable by the field oracle: not excluded, kernel diagonal at
/// least eps_sing.
std::vector<Vec> field_points(const Grid& grid, const CovarianceKernel& kernel,
                              double eps_sing = kSingularityTolerance);

/// Sup over the points of the Gaussian field with the kernel's correlation, R draws.
std::vector<double> mc_sup_samples(const CovarianceKernel& kernel, std::span<const Vec> points,
                                   std::size_t replicates, std::uint64_t seed, Execution exec = Execution::Parallel,
                                   double initial_jitter = 1e-10, double* jitter_used = nullptr);

TailCurve tail_curve(std::span<const double> sups, std::span<const double> thresholds);

TailCurve mc_sup_tail(const CovarianceKernel& kernel, std::span<const Vec> points, std::size_t replicates,
                      std::uint64_t seed, std::span<const double> thresholds,
                      Execution exec = Execution::Parallel, double initial_jitter = 1e-10);

struct NullDistribution {
  std::size_t replicates = 0;
  std::vector<double> statistics;     // successful replicates, in replicate order
  std::vector<std::size_t> failed;    // indices of replicates whose pipeline threw
  std::vector<std::string> failure_messages;
  double reject_rate = 0.0;           // fraction of successful replicates with T >= c(alpha)
  std::vector<double> thresholds;     // extra thresholds supplied by the caller
  std::vector<double> exceedance;
  std::vector<double> std_error;
};

/// Simulates n observations from `truth` per replicate and runs the test of
/// spec on each. Pipeline failures are counted, not fatal.
NullDistribution mc_null_distribution(const TestSpec& spec, const NullModel& truth, std::size_t n,
                                      std::size_t replicates, std::span<const double> thresholds,
                                      std::uint64_t seed, Execution exec = Execution::Parallel);

struct EquivalenceRow {
  std::size_t n = 0;
  double median = 0.0;
  std::vector<double> discrepancies;  // sup over the grid of |l* - max(0, S*)^2 / 2|, per replicate
};

/// Data drawn from the (fixed) null of spec; one row per sample size. The
/// default profiles eta over its positivity range: with eta capped at 1 the
/// profile saturates near a flip point, where eta_hat ~ 1/(sqrt(n)|theta - s|).
std::vector<EquivalenceRow> lrt_equivalence_report(const TestSpec& spec, std::span<const std::size_t> sizes,
                                                   std::size_t replicates, std::uint64_t seed,
                                                   EtaRange range = EtaRange::Positivity,
                                                   Execution exec = Execution::Parallel);

}  // namespace tubescore
