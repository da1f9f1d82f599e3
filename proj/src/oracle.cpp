#include "tubescore/oracle.hpp"

#include "tubescore/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace tubescore {

FieldFactor factor_correlation(const Mat& rho, double initial_jitter) {
  if (rho.rows() != rho.cols() || rho.rows() == 0) throw ValidationError("correlation matrix must be square");
  constexpr double kMaxJitter = 1e-6;
  for (double jitter = initial_jitter; jitter <= kMaxJitter * (1.0 + 1e-9); jitter *= 100.0) {
    Mat a = rho;
    a.diagonal().array() += jitter;
    Eigen::LLT<Mat> llt(a);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
  }
  throw IllConditionedKernel("correlation matrix is not positive definite even with jitter 1e-6");
}

std::vector<Vec> field_points(const Grid& grid, const CovarianceKernel& kernel, double eps_sing) {
  std::vector<char> skip(grid.points.size(), 0);
  for (auto i : grid.excluded) skip[i] = 1;
  std::vector<Vec> out;
  for (std::size_t i = 0; i < grid.points.size(); ++i)
    if (!skip[i] && kernel.variance(grid.points[i]) >= eps_sing) out.push_back(grid.points[i]);
  return out;
}

std::vector<double> mc_sup_samples(const CovarianceKernel& kernel, std::span<const Vec> points,
                                   std::size_t replicates, std::uint64_t seed, Execution exec,
                                   double initial_jitter, double* jitter_used) {
  if (replicates < 1) throw ValidationError("need at least one replicate");
  if (points.empty()) throw ValidationError("field oracle needs at least one grid point");
  const auto factor = factor_correlation(corr_matrix(kernel, points), initial_jitter);
  if (jitter_used) *jitter_used = factor.jitter;
  return simulate_field_sup(factor.chol, replicates, seed, exec);
}

TailCurve tail_curve(std::span<const double> sups, std::span<const double> thresholds) {
  TailCurve t;
  t.replicates = sups.size();
  std::vector<double> sorted(sups.begin(), sups.end());
  std::sort(sorted.begin(), sorted.end());
  const double r = static_cast<double>(sorted.size());
  for (double c : thresholds) {
    const auto above = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), c);
    const double p = static_cast<double>(above) / r;
    t.thresholds.push_back(c);
    t.exceedance.push_back(p);
    t.std_error.push_back(std::sqrt(p * (1.0 - p) / r));
  }
  return t;
}

TailCurve mc_sup_tail(const CovarianceKernel& kernel, std::span<const Vec> points, std::size_t replicates,
                      std::uint64_t seed, std::span<const double> thresholds, Execution exec,
                      double initial_jitter) {
  double jitter = 0.0;
  const auto sups = mc_sup_samples(kernel, points, replicates, seed, exec, initial_jitter, &jitter);
  auto t = tail_curve(sups, thresholds);
  t.jitter = jitter;
  return t;
}

namespace {

PerturbationModel null_generator(const NullModel& truth, const ThetaDomain& domain) {
  return PerturbationModel{truth, truth.family(), domain, 0.0};
}

}  // namespace

NullDistribution mc_null_distribution(const TestSpec& spec, const NullModel& truth, std::size_t n,
                                      std::size_t replicates, std::span<const double> thresholds,
                                      std::uint64_t seed, Execution exec) {
  if (replicates < 1) throw ValidationError("need at least one replicate");
  const auto generator = null_generator(truth, spec.domain);
  const Vec theta0 = truth.mixing().supports().front();

  std::optional<Calibration> shared;
  if (spec.null.estimation() == NullEstimation::None) shared = calibrate(spec.null, spec, exec);

  std::vector<double> stat(replicates, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> reject(replicates, 0);
  std::vector<std::string> errors(replicates);
  for_each_index(replicates, exec, [&](std::size_t r) {
    try {
      const auto data = sample(generator, theta0, n, derive_seed(seed, r));
      const auto out = run_test(data, spec, shared ? &*shared : nullptr, Execution::Serial);
      stat[r] = out.statistic;
      reject[r] = out.reject;
    } catch (const Error& e) {
      errors[r] = e.what();
    }
  });

  NullDistribution d;
  d.replicates = replicates;
  std::size_t rejections = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    if (!errors[r].empty()) {
      d.failed.push_back(r);
      d.failure_messages.push_back(errors[r]);
      continue;
    }
    d.statistics.push_back(stat[r]);
    rejections += reject[r] ? 1 : 0;
  }
  if (!d.statistics.empty()) {
    d.reject_rate = static_cast<double>(rejections) / static_cast<double>(d.statistics.size());
    const auto curve = tail_curve(d.statistics, thresholds);
    d.thresholds = curve.thresholds;
    d.exceedance = curve.exceedance;
    d.std_error = curve.std_error;
  }
  return d;
}

std::vector<EquivalenceRow> lrt_equivalence_report(const TestSpec& spec, std::span<const std::size_t> sizes,
                                                   std::size_t replicates, std::uint64_t seed, EtaRange range,
                                                   Execution exec) {
  if (spec.null.estimation() != NullEstimation::None)
    throw ValidationError("the equivalence report needs a fixed null");
  if (replicates < 1) throw ValidationError("need at least one replicate");
  const auto cal = calibrate(spec.null, spec, exec);
  const auto generator = null_generator(spec.null, spec.domain);
  const Vec theta0 = spec.null.mixing().supports().front();

  std::vector<EquivalenceRow> rows;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    EquivalenceRow row{sizes[k], 0.0, std::vector<double>(replicates)};
    for_each_index(replicates, exec, [&](std::size_t r) {
      const auto data = sample(generator, theta0, sizes[k], derive_seed(derive_seed(seed, k), r));
      const auto ev = evaluate_process(data, cal, Execution::Serial);
      const Vec lstar = lrt_profile(data, cal.fitted, cal.grid, range, Execution::Serial);
      double worst = 0.0;
      for (Eigen::Index i = 0; i < ev.normalized.size(); ++i) {
        const double s = ev.normalized[i];
        if (std::isnan(s)) continue;
        const double half_sq = 0.5 * std::pow(std::max(0.0, s), 2);
        worst = std::max(worst, std::abs(lstar[i] - half_sq));
      }
      row.discrepancies[r] = worst;
    });
    std::vector<double> sorted = row.discrepancies;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    row.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace tubescore
