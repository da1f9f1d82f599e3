#include "tubescore/harness.hpp"

#include "tubescore/errors.hpp"
#include "tubescore/report.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

namespace tubescore {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

MixingDistribution two_point() { return MixingDistribution({Vec::Constant(1, -2.0), Vec::Constant(1, 2.0)}, {0.5, 0.5}); }

}  // namespace

void ExperimentSpec::validate() const {
  if (model < 1 || model > 3) throw ValidationError("model id must be 1, 2 or 3");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("eta must lie in [0, 1]");
  if (reps < 1) throw ValidationError("reps must be at least 1");
  if (n < 1) throw ValidationError("n must be at least 1");
  if (!(alpha > 0.0 && alpha <= 0.5)) throw ValidationError("alpha must lie in (0, 0.5]");
  if (!(theta_lower < theta_upper)) throw ValidationError("theta bounds must satisfy lower < upper");
}

TestSpec experiment_test_spec(const ExperimentSpec& spec) {
  spec.validate();
  static constexpr NullEstimation kEstimation[] = {NullEstimation::None, NullEstimation::Weights,
                                                   NullEstimation::WeightsAndSupports};
  TestSpec t{NullModel::mixture(DensityFamily::normal(), two_point(), kEstimation[spec.model - 1]),
             ThetaDomain::interval(spec.theta_lower, spec.theta_upper),
             spec.alpha,
             spec.grid_points,
             {},
             {},
             KernelStrategy::Auto};
  return t;
}

PerturbationModel experiment_truth(const ExperimentSpec& spec) {
  spec.validate();
  const auto normal = DensityFamily::normal();
  return PerturbationModel{NullModel::mixture(normal, two_point()), normal,
                           ThetaDomain::interval(spec.theta_lower, spec.theta_upper), spec.eta};
}

ExperimentReport run_experiment(const ExperimentSpec& spec, Execution exec) {
  const auto start = std::chrono::steady_clock::now();
  const auto test = experiment_test_spec(spec);
  const auto truth = experiment_truth(spec);
  const Vec theta0 = Vec::Zero(1);

  std::optional<Calibration> shared;
  if (spec.model == 1) shared = calibrate(test.null, test, exec);

  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  ExperimentReport rep;
  rep.spec = spec;
  rep.statistics.assign(spec.reps, kNaN);
  rep.critical_values.assign(spec.reps, kNaN);
  std::vector<char> reject(spec.reps, 0);
  std::vector<std::string> errors(spec.reps);
  for_each_index(spec.reps, exec, [&](std::size_t r) {
    try {
      const auto data = sample(truth, theta0, spec.n, derive_seed(spec.seed, r));
      const auto out = run_test(data, test, shared ? &*shared : nullptr, Execution::Serial);
      rep.statistics[r] = out.statistic;
      rep.critical_values[r] = out.critical_value;
      reject[r] = out.reject;
    } catch (const Error& e) {
      errors[r] = e.what();
    }
  });

  for (std::size_t r = 0; r < spec.reps; ++r) {
    if (!errors[r].empty()) {
      rep.failed.push_back(r);
      rep.failure_messages.push_back(errors[r]);
      continue;
    }
    ++rep.valid;
    rep.rejections += reject[r] ? 1 : 0;
  }
  if (rep.valid > 0) {
    const double v = static_cast<double>(rep.valid);
    rep.rate = static_cast<double>(rep.rejections) / v;
    rep.std_error = std::sqrt(rep.rate * (1.0 - rep.rate) / v);
  }
  if (shared) rep.constants = shared->constants;
  rep.wall_clock_seconds = seconds_since(start);
  return rep;
}

std::vector<ExperimentSpec> table1_specs(std::size_t reps, std::uint64_t seed, int grid_points) {
  std::vector<ExperimentSpec> out;
  const std::pair<std::size_t, std::vector<double>> blocks[] = {{200, {0.0, 0.1, 0.2}}, {1000, {0.0, 0.05, 0.1}}};
  for (int model = 1; model <= 3; ++model)
    for (const auto& [n, etas] : blocks)
      for (double eta : etas) {
        ExperimentSpec s;
        s.model = model;
        s.eta = eta;
        s.n = n;
        s.reps = reps;
        s.seed = seed;
        s.grid_points = grid_points;
        out.push_back(s);
      }
  return out;
}

SuiteReport run_suite(const std::vector<ExperimentSpec>& specs, const std::string& path, Execution exec) {
  if (specs.empty()) throw ValidationError("suite needs at least one experiment");
  const auto start = std::chrono::steady_clock::now();
  SuiteReport suite;
  for (const auto& s : specs) suite.reports.push_back(run_experiment(s, exec));
  suite.wall_clock_seconds = seconds_since(start);
  if (!path.empty()) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open report file " + path);
    Json echo = Json::array();
    for (const auto& sp : specs) echo.push_back(to_json(sp));
    out << report_envelope("simulate", std::move(echo), to_json(suite), {}, suite.wall_clock_seconds).dump(2)
        << '\n';
    if (!out) throw ValidationError("failed writing report file " + path);
  }
  return suite;
}

}  // namespace tubescore
