// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria.

#include "tubescore/harness.hpp"
#include "tubescore/oracle.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

using namespace tubescore;

namespace {

constexpr std::uint64_t kSeed = 20240601;
constexpr double pi = std::numbers::pi;

Vec v1(double x) { return Vec::Constant(1, x); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, double budget_seconds, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = s < budget_seconds;
  const bool pass = v.pass && in_time;
  failures += pass ? 0 : 1;
  std::printf("criterion %d: %s  %s [%.1f s of %.0f s]\n", id, pass ? "PASS" : "FAIL", v.detail.c_str(), s,
              budget_seconds);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

TubeConstants constants_of(const ScoreKernel& k) {
  return tube_constants(k, summarize_manifold(k.domain(), detect_singularities(k)));
}

Verdict closed_form_arcs() {
  Verdict v{true, ""};
  for (double l : {0.3, 0.5, 0.7}) {
    ScoreKernel k(NullModel::fixed(DensityFamily::binomial2(), v1(l)), ThetaDomain::interval(0, 1),
                  KernelKind::Fixed);
    const double exact = std::acos(std::sqrt(2 * l / (1 + l))) + std::acos(std::sqrt(2 * (1 - l) / (2 - l)));
    const double err = std::abs(constants_of(k).kappa0 - exact);
    v.pass = v.pass && err <= 1e-6;
    v.detail += fmt("lambda=%.1f |err|=%.1e ", l, err);
  }
  return v;
}

Verdict disk_geometry() {
  Verdict v{true, ""};
  for (double r1 : {1.0, 2.0}) {
    auto integrand = [](double r) {
      const double u = r * r;
      return std::sqrt(u * std::exp(2 * u) * (std::expm1(u) - u) / std::pow(std::expm1(u), 3));
    };
    const double k0 =
        2 * pi * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0, r1, 15, 1e-13);
    const double l0 = 2 * pi * (1 + std::sqrt(r1 * r1 * std::exp(r1 * r1) / std::expm1(r1 * r1)));
    ScoreKernel k(NullModel::fixed(DensityFamily::normal(2), Vec::Zero(2)), ThetaDomain::disk(r1), KernelKind::Fixed);
    const auto c = constants_of(k);
    const double ek = std::abs(c.kappa0 - k0), el = std::abs(c.ell0 - l0);
    v.pass = v.pass && ek <= 1e-4 && el <= 1e-4;
    v.detail += fmt("rho1=%.0f kappa0=%.6f (|err| %.1e) ell0=%.6f (|err| %.1e) ", r1, c.kappa0, ek, c.ell0, el);
  }
  return v;
}

Verdict tube_vs_field() {
  struct Case {
    const char* name;
    NullModel null;
    ThetaDomain domain;
    int grid;
  };
  // The disk uses a coarser grid per axis than the 1-D default; see README.
  const Case cases[] = {
      {"binomial", NullModel::fixed(DensityFamily::binomial2(), v1(0.5)), ThetaDomain::interval(0, 1), 401},
      {"normal", NullModel::fixed(DensityFamily::normal(), v1(0)), ThetaDomain::interval(-3, 3), 401},
      {"disk", NullModel::fixed(DensityFamily::normal(2), Vec::Zero(2)), ThetaDomain::disk(2), 51},
  };
  Verdict v{true, ""};
  for (const auto& c : cases) {
    const TestSpec spec{c.null, c.domain, 0.05, c.grid, {}, {}, KernelStrategy::Auto};
    const auto cal = calibrate(c.null, spec);
    const auto pts = field_points(cal.grid, *cal.kernel);
    const std::vector<double> th{cal.critical_value};
    const auto t = mc_sup_tail(*cal.kernel, pts, 100000, kSeed, th);
    const double gap = std::abs(t.exceedance[0] - 0.05);
    const double tol = std::max(0.01, 4 * t.std_error[0]);
    v.pass = v.pass && gap <= tol;
    v.detail += fmt("%s c=%.4f mc=%.4f ", c.name, cal.critical_value, t.exceedance[0]);
  }
  return v;
}

Verdict chi_bar_null() {
  const auto b = DensityFamily::binomial2();
  const TestSpec spec{NullModel::fixed(b, v1(0.4), NullEstimation::WeightsAndSupports), ThetaDomain::interval(0, 1),
                      0.05, kDefaultGridPoints, {}, {}, KernelStrategy::Auto};
  const std::vector<double> th{1.6449};
  const auto d = mc_null_distribution(spec, NullModel::fixed(b, v1(0.4)), 500, 2000, th, kSeed);
  const double p = d.exceedance[0];
  return {std::abs(p - 0.05) <= 0.02 && d.failed.empty(),
          fmt("P(T >= 1.6449) = %.4f (se %.4f), failed %zu", p, d.std_error[0], d.failed.size())};
}

Verdict table_one() {
  auto cell = [](int model, double eta) {
    ExperimentSpec s;
    s.model = model;
    s.eta = eta;
    s.n = 200;
    s.reps = 300;
    s.seed = kSeed;
    return run_experiment(s);
  };
  const auto m1_null = cell(1, 0.0), m1_alt = cell(1, 0.2), m3_alt = cell(3, 0.2);
  const bool pass = m1_null.rate >= 0.03 && m1_null.rate <= 0.13 && m1_alt.rate >= 0.90 && m3_alt.rate < m1_alt.rate;
  return {pass, fmt("model1 eta=0: %.4f, model1 eta=0.2: %.4f, model3 eta=0.2: %.4f (excluded %zu/%zu/%zu)",
                    m1_null.rate, m1_alt.rate, m3_alt.rate, m1_null.failed.size(), m1_alt.failed.size(),
                    m3_alt.failed.size())};
}

Verdict lrt_equivalence() {
  const TestSpec spec{NullModel::fixed(DensityFamily::binomial2(), v1(0.5)), ThetaDomain::interval(0, 1), 0.05,
                      kDefaultGridPoints, {}, {}, KernelStrategy::Auto};
  const std::vector<std::size_t> sizes{200, 500, 2000};
  const auto rows = lrt_equivalence_report(spec, sizes, 50, kSeed);
  bool pass = true;
  std::string detail = "medians";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += fmt(" n=%zu:%.5f", rows[i].n, rows[i].median);
    if (i > 0) pass = pass && rows[i].median < rows[i - 1].median;
  }
  return {pass, detail};
}

// Compact versions of the property suites, so the acceptance run stands alone.
Verdict properties() {
  int checks = 0, failed = 0;
  std::string first_failure;
  auto check = [&](bool ok, const char* what) {
    ++checks;
    if (!ok && failed++ == 0) first_failure = what;
  };
  std::mt19937_64 rng(kSeed);

  // Kernel symmetry, Cauchy-Schwarz and positive semidefinite Gram matrices.
  const ScoreKernel kernels[] = {
      ScoreKernel(NullModel::fixed(DensityFamily::binomial2(), v1(0.5)), ThetaDomain::interval(0, 1),
                  KernelKind::Fixed),
      ScoreKernel(NullModel::fixed(DensityFamily::normal(), v1(0)), ThetaDomain::interval(-3, 3), KernelKind::Fixed),
      ScoreKernel(NullModel::fixed(DensityFamily::normal(), v1(0), NullEstimation::WeightsAndSupports),
                  ThetaDomain::interval(-3, 3), KernelKind::NuisanceAdjusted),
      ScoreKernel(NullModel::mixture(DensityFamily::normal(), MixingDistribution({v1(-2), v1(2)}, {0.5, 0.5}),
                                     NullEstimation::Weights),
                  ThetaDomain::interval(-4, 4), KernelKind::NuisanceAdjusted),
  };
  for (const auto& k : kernels) {
    const double lo = k.domain().lower()[0], hi = k.domain().upper()[0];
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Vec> pts;
    for (int i = 0; i < 30; ++i) {
      const Vec a = v1(u(rng)), b = v1(u(rng));
      pts.push_back(a);
      const double ab = k(a, b);
      check(std::abs(ab - k(b, a)) <= 1e-12 * std::max(1.0, std::abs(ab)), "kernel symmetry");
      check(ab * ab <= k(a, a) * k(b, b) + 1e-10, "Cauchy-Schwarz");
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(k.gram(pts));
    check(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff(), "Gram PSD");

    // Gradient of the diagonal jet against central differences.
    const double h = 1e-5 * (hi - lo);
    for (double f : {0.2, 0.7}) {
      const Vec t = v1(lo + f * (hi - lo));
      const auto jet = k.analytic_jet(t);
      const double fd = (k(v1(t[0] + h), t) - k(v1(t[0] - h), t)) / (2 * h);
      check(jet && std::abs(jet->grad[0] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)), "kernel gradient vs FD");
    }
  }

  // log density gradient against central differences.
  {
    const auto b = DensityFamily::binomial2();
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int i = 0; i < 20; ++i) {
      const double t = u(rng), h = 1e-6;
      const std::array<double, 1> x{static_cast<double>(i % 3)};
      const double fd = (std::log(b.density(v1(t + h), x)) - std::log(b.density(v1(t - h), x))) / (2 * h);
      const double g = b.log_density_grad(v1(t), x)[0];
      check(std::abs(g - fd) <= 1e-6 * std::max(1.0, std::abs(g)), "log density gradient vs FD");
    }
  }

  // EM monotonicity.
  {
    const auto n = DensityFamily::normal();
    PerturbationModel m{NullModel::mixture(n, MixingDistribution({v1(-2), v1(2)}, {0.5, 0.5})), n,
                        ThetaDomain::interval(-4, 4), 0.2};
    const auto data = sample(m, v1(0), 300, kSeed);
    for (const auto& r : {fit_weights(data, n, {v1(-2), v1(0), v1(2)}), fit_full(data, n, {v1(-2), v1(2)})})
      for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
        check(r.loglik_trace[i] >= r.loglik_trace[i - 1] - 1e-12 * std::abs(r.loglik_trace[i - 1]), "EM monotone");
  }

  // Flip antisymmetry around a fixed-lambda singularity.
  {
    const auto n = DensityFamily::normal();
    const auto null = NullModel::fixed(n, v1(0));
    PerturbationModel m{null, n, ThetaDomain::interval(-3, 3), 0.0};
    ScoreKernel k(null, m.domain, KernelKind::Fixed);
    const auto data = sample(m, v1(0), 1000, kSeed);
    double prev = 1e300;
    for (double d : {0.3, 0.1, 0.03, 0.01}) {
      Grid g;
      g.points = {v1(-d), v1(d)};
      const auto ev = evaluate_process(data, k, g);
      const double gap = std::abs(ev.normalized[0] + ev.normalized[1]);
      check(gap < prev, "flip antisymmetry improves");
      prev = gap;
    }
  }

  // Tail monotonicity and critical-value round trip.
  for (const auto& c : {make_constants(1, 1.23, 4), make_constants(1, 0, 2), make_constants(2, 14.23, 18.97, 0)}) {
    double prev = tail_probability(0.5, c);
    for (double x = 0.6; x <= 10.0; x += 0.1) {
      const double p = tail_probability(x, c);
      check(prev == 0.0 || prev >= 1.0 || p < prev, "tail strictly decreasing");
      prev = p;
    }
    for (double a : {0.01, 0.05, 0.1}) check(std::abs(tail_probability(critical_value(a, c), c) - a) < 1e-10, "critical round trip");
  }

  // Seed determinism.
  {
    const auto b = DensityFamily::binomial2();
    PerturbationModel m{NullModel::fixed(b, v1(0.5)), b, ThetaDomain::interval(0, 1), 0.1};
    check(sample(m, v1(0.9), 500, kSeed).values() == sample(m, v1(0.9), 500, kSeed).values(), "sample determinism");
    const auto& k = kernels[0];
    const auto pts = field_points(make_grid(k.domain(), {{v1(0.5), SingularityClass::Flip}}, 101), k);
    check(mc_sup_samples(k, pts, 2000, kSeed, Execution::Serial) == mc_sup_samples(k, pts, 2000, kSeed),
          "field determinism");
    ExperimentSpec s;
    s.model = 2;
    s.reps = 10;
    check(run_experiment(s, Execution::Serial).statistics == run_experiment(s).statistics, "harness determinism");
  }

  return {failed == 0, failed == 0 ? fmt("%d checks", checks) : fmt("%d of %d checks failed, first: %s", failed, checks,
                                                                    first_failure.c_str())};
}

}  // namespace

int main() {
  criterion(1, 5, closed_form_arcs);
  criterion(2, 60, disk_geometry);
  criterion(3, 600, tube_vs_field);
  criterion(4, 300, chi_bar_null);
  criterion(5, 1800, table_one);
  criterion(6, 300, lrt_equivalence);
  criterion(7, 600, properties);
  return failures;
}
