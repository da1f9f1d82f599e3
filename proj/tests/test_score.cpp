#include "tubescore/errors.hpp"
#include "tubescore/score.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace tubescore;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

Grid points(std::initializer_list<double> xs) {
  Grid g;
  for (double x : xs) g.points.push_back(v1(x));
  return g;
}

NullModel binom(double l, NullEstimation est = NullEstimation::None) {
  return NullModel::fixed(DensityFamily::binomial2(), v1(l), est);
}

TestSpec spec_of(NullModel null, ThetaDomain domain, int grid = kDefaultGridPoints) {
  return TestSpec{std::move(null), std::move(domain), 0.05, grid, {}, {}, KernelStrategy::Auto};
}

}  // namespace

TEST(Grid, SortedWithFlanksAndExclusions) {
  const auto d = ThetaDomain::interval(-3, 3);
  const std::vector<Singularity> s{{v1(0.0), SingularityClass::Flip}};
  const auto g = make_grid(d, s, 401);
  EXPECT_TRUE(std::is_sorted(g.points.begin(), g.points.end(), [](const Vec& a, const Vec& b) { return a[0] < b[0]; }));
  const double r = exclusion_radius(s[0], d);
  EXPECT_TRUE(std::any_of(g.points.begin(), g.points.end(), [&](const Vec& p) { return std::abs(p[0] - r) < 1e-15; }));
  EXPECT_TRUE(std::any_of(g.points.begin(), g.points.end(), [&](const Vec& p) { return std::abs(p[0] + r) < 1e-15; }));
  ASSERT_EQ(g.excluded.size(), 1u);
  EXPECT_NEAR(g.points[g.excluded[0]][0], 0.0, 1e-12);
}

TEST(Grid, DiskKeepsInteriorPoints) {
  const auto g = make_grid(ThetaDomain::disk(1.0), {}, 21);
  for (const auto& p : g.points) EXPECT_LE(p.norm(), 1.0 + 1e-12);
  EXPECT_GT(g.points.size(), 300u);
}

TEST(ScoreProcess, ZeroAtLambda) {
  const auto data = Dataset::scalar({0, 1, 2, 2, 1, 0, 1});
  const auto ev = score_process(data, binom(0.3), ThetaDomain::interval(0, 1), points({0.3}), Execution::Serial);
  EXPECT_NEAR(ev.raw[0], 0.0, 1e-12);
}

TEST(ScoreProcess, ThreeTermSum) {
  const auto data = Dataset::scalar({0, 1, 2, 2});
  const auto ev = score_process(data, binom(0.5), ThetaDomain::interval(0, 1), points({1.0}), Execution::Serial);
  EXPECT_DOUBLE_EQ(ev.raw[0], 4.0);
  EXPECT_DOUBLE_EQ(ev.diag[0], 3.0);
  EXPECT_NEAR(ev.normalized[0], 4.0 / std::sqrt(4.0 * 3.0), 1e-15);
}

TEST(ScoreProcess, SupportViolation) {
  const auto data = Dataset::scalar({0, 1, 2});
  EXPECT_THROW(score_process(data, binom(1.0), ThetaDomain::interval(0, 1), points({0.5})), SupportViolation);
}

TEST(ScoreProcess, SerialMatchesParallelBitwise) {
  const auto n = DensityFamily::normal();
  PerturbationModel m{NullModel::fixed(n, v1(0)), n, ThetaDomain::interval(-3, 3), 0.1};
  const auto data = sample(m, v1(1.5), 3000, 4);
  const auto g = make_grid(m.domain, {{v1(0.0), SingularityClass::Flip}});
  const auto a = score_process(data, m.null, m.domain, g, Execution::Serial);
  const auto b = score_process(data, m.null, m.domain, g, Execution::Parallel);
  for (Eigen::Index i = 0; i < a.raw.size(); ++i) EXPECT_EQ(a.raw[i], b.raw[i]);
}

TEST(Statistic, ConstantProcessPicksFirstPoint) {
  ProcessEvaluation ev;
  ev.grid = {v1(0.1), v1(0.2), v1(0.3)};
  ev.normalized = Vec::Constant(3, 1.7);
  const auto m = statistic(ev);
  EXPECT_DOUBLE_EQ(m.value, 1.7);
  EXPECT_EQ(m.index, 0u);
  EXPECT_DOUBLE_EQ(m.location[0], 0.1);
}

TEST(Statistic, SinglePointAndExclusions) {
  ProcessEvaluation ev;
  ev.grid = {v1(0.4)};
  ev.normalized = Vec::Constant(1, -0.3);
  EXPECT_DOUBLE_EQ(statistic(ev).value, -0.3);

  ProcessEvaluation ex;
  ex.grid = {v1(0.1), v1(0.2)};
  ex.normalized = Vec{{5.0, 1.0}};
  ex.excluded = {0};
  EXPECT_DOUBLE_EQ(statistic(ex).value, 1.0);
  ex.excluded = {0, 1};
  EXPECT_THROW(statistic(ex), ValidationError);
}

TEST(EtaHat, FlatLikelihoodGivesZero) {
  const auto data = Dataset::scalar({0, 1, 2});
  EXPECT_DOUBLE_EQ(eta_hat(data, binom(0.5), v1(0.5)), 0.0);
}

TEST(EtaHat, MassWherePsiDominatesGivesOne) {
  // psi(.;1) = (0,0,1) against f = (1/4,1/2,1/4): l(eta) = 3 log(1/4 + 3 eta / 4).
  const auto data = Dataset::scalar({2, 2, 2});
  EXPECT_DOUBLE_EQ(eta_hat(data, binom(0.5), v1(1.0)), 1.0);
}

TEST(EtaHat, InteriorMaximumSolvesScoreEquation) {
  const auto data = Dataset::scalar({0, 1, 1, 2, 2, 2, 1, 0, 2, 2});
  const auto null = binom(0.5);
  const double e = eta_hat(data, null, v1(0.8));
  ASSERT_GT(e, 0.0);
  ASSERT_LT(e, 1.0);
  const auto fam = null.family();
  double d = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double f = null.density(data.row(i)), p = fam.density(v1(0.8), data.row(i));
    d += (p - f) / ((1 - e) * f + e * p);
  }
  EXPECT_NEAR(d, 0.0, 1e-9);
}

TEST(LrtProfile, ZeroWhereEtaHatIsZero) {
  const auto data = Dataset::scalar({0, 1, 1, 1, 0, 2, 1});
  const auto g = points({0.1, 0.5, 0.9});
  const auto l = lrt_profile(data, binom(0.5), g);
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    EXPECT_GE(l[i], 0.0);
    if (eta_hat(data, binom(0.5), g.points[i]) == 0.0) {
      EXPECT_EQ(l[i], 0.0);
    }
  }
}

TEST(LrtProfile, TracksHalfSquaredScoreAtLargeN) {
  const auto null = binom(0.5);
  const auto d = ThetaDomain::interval(0, 1);
  PerturbationModel m{null, null.family(), d, 0.0};
  const auto data = sample(m, v1(0.5), 2000, 12);
  const auto g = make_grid(d, {{v1(0.5), SingularityClass::Flip}}, 101);
  const auto ev = score_process(data, null, d, g);
  const Vec l = lrt_profile(data, null, g, EtaRange::Positivity);
  std::vector<double> a, b;
  for (Eigen::Index i = 0; i < l.size(); ++i)
    if (!std::isnan(ev.normalized[i])) {
      a.push_back(l[i]);
      b.push_back(0.5 * std::pow(std::max(0.0, ev.normalized[i]), 2));
    }
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  ASSERT_GT(sbb, 0.0);
  EXPECT_GT(sab / std::sqrt(saa * sbb), 0.99);
}

TEST(FitWeights, SingleComponent) {
  const auto r = fit_weights(Dataset::scalar({0.3, -1, 2}), DensityFamily::normal(), {v1(0.0)});
  ASSERT_EQ(r.mixing.size(), 1u);
  EXPECT_DOUBLE_EQ(r.mixing.weights()[0], 1.0);
}

TEST(FitWeights, MatchesGridSearch) {
  const auto data = Dataset::scalar({-2, -2, 2});
  const auto n = DensityFamily::normal();
  double best = -1e300, arg = 0;
  for (int i = 0; i <= 100000; ++i) {
    const double b = i / 100000.0;
    const double l = mixture_loglik(data, n, MixingDistribution({v1(-2), v1(2)}, {b, 1 - b}));
    if (l > best) best = l, arg = b;
  }
  const auto r = fit_weights(data, n, {v1(-2), v1(2)});
  EXPECT_NEAR(r.mixing.weights()[0], arg, 1e-3);
  EXPECT_NEAR(r.mixing.weights()[0], 0.666779, 1e-6);
  EXPECT_TRUE(r.converged);
}

TEST(FitWeights, UnusedSupportIsDropped) {
  const auto data = Dataset::scalar({-2.1, -1.7, -2.4, -1.9, 2.2, 1.8, 2.05});
  const auto r = fit_weights(data, DensityFamily::normal(), {v1(-2), v1(2), v1(30)});
  EXPECT_EQ(r.mixing.size(), 2u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(FitWeights, LoglikNeverDecreases) {
  const auto n = DensityFamily::normal();
  PerturbationModel m{NullModel::mixture(n, MixingDistribution({v1(-2), v1(2)}, {0.3, 0.7})), n,
                      ThetaDomain::interval(-4, 4), 0.2};
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto data = sample(m, v1(0.5), 300, seed);
    const auto r = fit_weights(data, n, {v1(-2), v1(0), v1(0.5), v1(2)});
    ASSERT_GE(r.loglik_trace.size(), 2u);
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
      EXPECT_GE(r.loglik_trace[i], r.loglik_trace[i - 1] - 1e-12 * std::abs(r.loglik_trace[i - 1]));
  }
}

TEST(FitFull, SingleNormalIsSampleMean) {
  const auto data = Dataset::scalar({0.3, -1.2, 2.5, 0.9, 1.1});
  const auto r = fit_full(data, DensityFamily::normal(), {v1(0.0)});
  EXPECT_NEAR(r.mixing.supports()[0][0], (0.3 - 1.2 + 2.5 + 0.9 + 1.1) / 5, 1e-10);
}

TEST(FitFull, SymmetricDataGiveSymmetricFit) {
  std::vector<double> x;
  for (double v : {0.4, 1.1, 1.7, 2.0, 2.3, 2.6, 2.9, 3.3, 1.5, 2.2}) {
    x.push_back(v);
    x.push_back(-v);
  }
  const auto r = fit_full(Dataset::scalar(x), DensityFamily::normal(), {v1(-1.5), v1(2.5)});
  ASSERT_EQ(r.mixing.size(), 2u);
  EXPECT_NEAR(r.mixing.supports()[0][0], -r.mixing.supports()[1][0], 1e-6);
  EXPECT_NEAR(r.mixing.weights()[0], r.mixing.weights()[1], 1e-6);
  EXPECT_LT(r.stationarity, 1e-6);
  for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
    EXPECT_GE(r.loglik_trace[i], r.loglik_trace[i - 1] - 1e-12 * std::abs(r.loglik_trace[i - 1]));
}

TEST(FlipProperty, AntisymmetryImprovesTowardSingularity) {
  const auto n = DensityFamily::normal();
  const auto null = NullModel::fixed(n, v1(0));
  const auto d = ThetaDomain::interval(-3, 3);
  PerturbationModel m{null, n, d, 0.0};
  ScoreKernel k(null, d, KernelKind::Fixed);
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const auto data = sample(m, v1(0), 1000, seed);
    double prev = 1e300;
    for (double delta : {0.3, 0.1, 0.03, 0.01}) {
      const auto ev = evaluate_process(data, k, points({-delta, delta}), Execution::Serial);
      const double gap = std::abs(ev.normalized[0] + ev.normalized[1]);
      EXPECT_LT(gap, prev) << delta;
      prev = gap;
    }
    EXPECT_LT(prev, 0.05);
  }
}

TEST(ScoreMean, CentredUnderNull) {
  const auto null = binom(0.5);
  const auto d = ThetaDomain::interval(0, 1);
  PerturbationModel m{null, null.family(), d, 0.0};
  ScoreKernel k(null, d, KernelKind::Fixed);
  const auto g = points({0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9, 1.0});
  const std::size_t reps = 10000, n = 200;
  Vec sum = Vec::Zero(g.points.size());
  for (std::size_t r = 0; r < reps; ++r)
    sum += evaluate_process(sample(m, v1(0.5), n, derive_seed(9, r)), k, g, Execution::Serial).raw;
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    const double se = std::sqrt(n * k(g.points[i], g.points[i]) / reps);
    EXPECT_LT(std::abs(sum[i] / reps), 4 * se) << g.points[i][0];
  }
}

TEST(ScoreMean, PeaksAtTruthUnderAlternative) {
  const auto null = binom(0.5);
  const auto d = ThetaDomain::interval(0, 1);
  PerturbationModel m{null, null.family(), d, 0.2};
  ScoreKernel k(null, d, KernelKind::Fixed);
  const auto g = points({0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9, 1.0});
  const std::size_t reps = 2000;
  Vec sum = Vec::Zero(g.points.size());
  for (std::size_t r = 0; r < reps; ++r)
    sum += evaluate_process(sample(m, v1(0.8), 500, derive_seed(10, r)), k, g, Execution::Serial).normalized;
  Eigen::Index arg;
  sum.maxCoeff(&arg);
  EXPECT_DOUBLE_EQ(g.points[arg][0], 0.8);
}

TEST(RunTest, Deterministic) {
  const auto n = DensityFamily::normal();
  const auto spec = spec_of(NullModel::mixture(n, MixingDistribution({v1(-2), v1(2)}, {0.5, 0.5}),
                                               NullEstimation::WeightsAndSupports),
                            ThetaDomain::interval(-4, 4));
  PerturbationModel m{spec.null.with_estimation(NullEstimation::None), n, spec.domain, 0.1};
  const auto data = sample(m, v1(0), 200, 5);
  const auto a = run_test(data, spec);
  const auto b = run_test(data, spec, nullptr, Execution::Serial);
  EXPECT_EQ(a.statistic, b.statistic);
  EXPECT_EQ(a.critical_value, b.critical_value);
  EXPECT_EQ(a.argmax, b.argmax);
  EXPECT_EQ(a.reject, b.reject);
  EXPECT_EQ(a.fitted.mixing().supports(), b.fitted.mixing().supports());
}

TEST(RunTest, PrecomputedCalibrationOnlyForFixedNull) {
  const auto spec = spec_of(binom(0.4, NullEstimation::WeightsAndSupports), ThetaDomain::interval(0, 1));
  const auto cal = calibrate(binom(0.4), spec_of(binom(0.4), ThetaDomain::interval(0, 1)));
  EXPECT_THROW(run_test(Dataset::scalar({0, 1, 2}), spec, &cal), ValidationError);
}

TEST(RunTest, PValueIsOneForNonpositiveStatistic) {
  const auto spec = spec_of(binom(0.5), ThetaDomain::interval(0, 1));
  // Balanced counts put S on the negative side away from lambda.
  const auto out = run_test(Dataset::scalar({1, 1, 1, 1, 1, 1}), spec);
  EXPECT_LE(out.statistic, 0.0);
  EXPECT_DOUBLE_EQ(out.p_value, 1.0);
  EXPECT_FALSE(out.reject);
}

TEST(RunTest, FiveFiveRegimeDoesNotReject) {
  // Three-component data tested against a two-component null whose supports
  // are estimated: the statistic stays below the critical value most of the time.
  const auto n = DensityFamily::normal();
  const auto q = MixingDistribution({v1(-2), v1(2)}, {0.5, 0.5});
  const auto spec = spec_of(NullModel::mixture(n, q, NullEstimation::WeightsAndSupports), ThetaDomain::interval(-4, 4));
  PerturbationModel m{NullModel::mixture(n, q), n, spec.domain, 0.0};
  int rejections = 0;
  for (std::uint64_t r = 0; r < 40; ++r) rejections += run_test(sample(m, v1(0), 200, derive_seed(17, r)), spec).reject;
  EXPECT_LE(rejections, 8);
}

TEST(SequentialBuild, SeparatedTwoComponentData) {
  const auto n = DensityFamily::normal();
  PerturbationModel m{NullModel::mixture(n, MixingDistribution({v1(-2), v1(2)}, {0.5, 0.5})), n,
                      ThetaDomain::interval(-4, 4), 0.0};
  int two = 0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    const auto b = sequential_build(sample(m, v1(0), 100, derive_seed(21, r)), n, m.domain, 0.05, 5, 201);
    ASSERT_FALSE(b.steps.empty());
    EXPECT_FALSE(b.steps.back().reject || b.mixing.size() >= 5);
    two += b.mixing.size() == 2;
  }
  EXPECT_GE(two, static_cast<int>(0.85 * reps));
}

TEST(SequentialBuild, SingleComponentDataStopAtOne) {
  const auto n = DensityFamily::normal();
  PerturbationModel m{NullModel::fixed(n, v1(0.5)), n, ThetaDomain::interval(-4, 4), 0.0};
  int one = 0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r)
    one += sequential_build(sample(m, v1(0), 100, derive_seed(22, r)), n, m.domain, 0.05, 5, 201).mixing.size() == 1;
  EXPECT_GE(one, static_cast<int>(0.8 * reps));
}
