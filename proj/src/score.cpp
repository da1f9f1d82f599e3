#include "tubescore/score.hpp"

#include "tubescore/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>

namespace tubescore {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool lex_less(const Vec& a, const Vec& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Data collapsed to distinct values (discrete families) with 1/f at each.
struct Prepared {
  WeightedData data;
  Vec inv_f;
};

Prepared prepare(const Dataset& data, const NullModel& null) {
  if (data.empty()) throw ValidationError("dataset is empty");
  if (data.dim() != null.family().data_dim())
    throw ValidationError("data dimension " + std::to_string(data.dim()) + " does not match the family");
  Prepared p{compress(data, null.family().discrete()), {}};
  p.inv_f.resize(static_cast<Eigen::Index>(p.data.size()));
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const double f = null.density(p.data.row(i));
    if (!(f > 0.0)) throw SupportViolation("null density vanishes at observation " + fmt(p.data.row(i)[0]));
    p.inv_f[static_cast<Eigen::Index>(i)] = 1.0 / f;
  }
  return p;
}

// r_i = psi(x_i; theta)/f(x_i) - 1
Vec ratios(const Prepared& p, const DensityFamily& family, const Vec& theta) {
  Vec r(static_cast<Eigen::Index>(p.data.size()));
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    r[k] = family.density(theta, p.data.row(i)) * p.inv_f[k] - 1.0;
  }
  return r;
}

double eta_derivative(const Vec& r, const std::vector<double>& c, double eta) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += c[static_cast<std::size_t>(i)] * r[i] / (1.0 + eta * r[i]);
  return s;
}

// Largest eta keeping 1 + eta r_i > 0 (capped when no ratio is negative).
double eta_ceiling(const Vec& r, EtaRange range) {
  if (range == EtaRange::Unit) return 1.0;
  constexpr double kCap = 1e8;
  double hi = kCap;
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (r[i] < 0.0) hi = std::min(hi, -1.0 / r[i]);
  return hi;
}

double eta_from_ratios(const Vec& r, const std::vector<double>& c, EtaRange range) {
  if (eta_derivative(r, c, 0.0) <= 0.0) return 0.0;
  const double top = eta_ceiling(r, range);
  if (range == EtaRange::Unit && eta_derivative(r, c, 1.0) >= 0.0) return 1.0;
  double lo = 0.0, hi = top;
  const double tol = 1e-12 * std::max(1.0, top);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (eta_derivative(r, c, mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double profile_from_ratios(const Vec& r, const std::vector<double>& c, EtaRange range) {
  const double eta = eta_from_ratios(r, c, range);
  if (eta == 0.0) return 0.0;
  double l = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) l += c[static_cast<std::size_t>(i)] * std::log1p(eta * r[i]);
  return std::max(l, 0.0);
}

ProcessEvaluation assemble(const Prepared& p, const DensityFamily& family, const Grid& grid, Vec diag,
                           Execution exec, double eps_sing) {
  ProcessEvaluation ev;
  ev.grid = grid.points;
  ev.n = p.data.total();
  ev.raw = raw_score(family, grid.points, p.data, p.inv_f, exec);
  ev.diag = std::move(diag);
  const auto g = static_cast<Eigen::Index>(grid.points.size());
  ev.normalized = Vec::Constant(g, kNaN);
  std::vector<char> skip(grid.points.size(), 0);
  for (auto i : grid.excluded) skip[i] = 1;
  for (Eigen::Index i = 0; i < g; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!skip[k] && !(ev.diag[i] >= eps_sing)) skip[k] = 1;
    if (skip[k])
      ev.excluded.push_back(k);
    else
      ev.normalized[i] = ev.raw[i] / std::sqrt(ev.n * ev.diag[i]);
  }
  return ev;
}

Vec kernel_diagonal(const CovarianceKernel& kernel, const std::vector<Vec>& points, Execution exec) {
  Vec diag(static_cast<Eigen::Index>(points.size()));
  for_each_index(points.size(), exec,
                 [&](std::size_t i) { diag[static_cast<Eigen::Index>(i)] = kernel.variance(points[i]); });
  return diag;
}

Vec sample_mean(const Dataset& data) {
  Vec m = Vec::Zero(data.dim());
  for (std::size_t i = 0; i < data.size(); ++i)
    for (int k = 0; k < data.dim(); ++k) m[k] += data.row(i)[static_cast<std::size_t>(k)];
  return m / static_cast<double>(data.size());
}

}  // namespace

Grid make_grid(const ThetaDomain& domain, const std::vector<Singularity>& singularities, int points_per_axis,
               const GeometryOptions& opts) {
  if (points_per_axis < 1) throw ValidationError("grid needs at least one point per axis");
  const int d = domain.dim();
  if (d > 2) throw UnsupportedDimension("grids are built for d = 1 and d = 2");

  std::vector<double> axis0(static_cast<std::size_t>(points_per_axis));
  std::vector<double> axis1(d == 2 ? static_cast<std::size_t>(points_per_axis) : 1, 0.0);
  auto fill_axis = [&](std::vector<double>& axis, int k) {
    const double lo = domain.lower()[k];
    const double hi = domain.upper()[k];
    if (axis.size() == 1) {
      axis[0] = 0.5 * (lo + hi);
      return;
    }
    const double step = (hi - lo) / static_cast<double>(axis.size() - 1);
    for (std::size_t i = 0; i < axis.size(); ++i) axis[i] = lo + static_cast<double>(i) * step;
    axis.back() = hi;
  };
  fill_axis(axis0, 0);
  if (d == 2) fill_axis(axis1, 1);

  std::vector<std::pair<Vec, bool>> pts;  // point, excluded
  auto near_singularity = [&](const Vec& p) {
    return std::any_of(singularities.begin(), singularities.end(), [&](const Singularity& s) {
      return (p - s.location).norm() < exclusion_radius(s, domain, opts);
    });
  };
  for (double a : axis0)
    for (double b : axis1) {
      Vec p = d == 1 ? Vec::Constant(1, a) : Vec{{a, b}};
      if (!domain.contains(p, 1e-12 * domain.max_width())) continue;
      const bool excl = near_singularity(p);
      pts.emplace_back(std::move(p), excl);
    }

  const double same = 1e-12 * domain.max_width();
  for (const auto& s : singularities) {
    const double r = exclusion_radius(s, domain, opts);
    for (int k = 0; k < d; ++k)
      for (double sign : {-1.0, 1.0}) {
        Vec p = s.location;
        p[k] += sign * r;
        if (!domain.contains(p)) continue;
        auto dup = std::find_if(pts.begin(), pts.end(), [&](const auto& q) { return (q.first - p).norm() < same; });
        if (dup != pts.end()) {
          dup->second = false;
          continue;
        }
        pts.emplace_back(std::move(p), false);
      }
  }
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return lex_less(a.first, b.first); });

  Grid grid;
  grid.points.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    grid.points.push_back(std::move(pts[i].first));
    if (pts[i].second) grid.excluded.push_back(i);
  }
  return grid;
}

ProcessEvaluation evaluate_process(const Dataset& data, const ScoreKernel& kernel, const Grid& grid, Execution exec,
                                   double eps_sing) {
  const auto p = prepare(data, kernel.null());
  return assemble(p, kernel.null().family(), grid, kernel_diagonal(kernel, grid.points, exec), exec, eps_sing);
}

ProcessEvaluation evaluate_process(const Dataset& data, const Calibration& calibration, Execution exec) {
  const auto p = prepare(data, calibration.fitted);
  return assemble(p, calibration.fitted.family(), calibration.grid, calibration.diag, exec,
                  kSingularityTolerance);
}

ProcessEvaluation score_process(const Dataset& data, const NullModel& null, const ThetaDomain& domain,
                                const Grid& grid, Execution exec) {
  const ScoreKernel kernel(null.with_estimation(NullEstimation::None), domain, KernelKind::Fixed);
  return evaluate_process(data, kernel, grid, exec);
}

ProcessEvaluation score_process_nuisance(const Dataset& data, const NullModel& fitted, const ThetaDomain& domain,
                                         const Grid& grid, Execution exec) {
  if (fitted.estimation() == NullEstimation::None)
    throw ValidationError("nuisance-adjusted process needs a null with estimated parameters");
  const ScoreKernel kernel(fitted, domain, KernelKind::NuisanceAdjusted);
  return evaluate_process(data, kernel, grid, exec);
}

Maximum statistic(const ProcessEvaluation& evaluation) {
  Maximum best;
  best.value = -std::numeric_limits<double>::infinity();
  bool found = false;
  std::vector<char> skip(static_cast<std::size_t>(evaluation.normalized.size()), 0);
  for (auto k : evaluation.excluded)
    if (k < skip.size()) skip[k] = 1;
  for (Eigen::Index i = 0; i < evaluation.normalized.size(); ++i) {
    const double v = evaluation.normalized[i];
    const auto k = static_cast<std::size_t>(i);
    if (std::isnan(v) || skip[k]) continue;
    if (!found || v > best.value || (v == best.value && lex_less(evaluation.grid[k], best.location))) {
      best.value = v;
      best.location = evaluation.grid[k];
      best.index = k;
      found = true;
    }
  }
  if (!found) throw ValidationError("no grid point left after excluding singular neighbourhoods");
  return best;
}

double eta_hat(const Dataset& data, const NullModel& null, const Vec& theta, EtaRange range) {
  null.family().require_parameter(theta);
  const auto p = prepare(data, null);
  return eta_from_ratios(ratios(p, null.family(), theta), p.data.counts, range);
}

Vec lrt_profile(const Dataset& data, const NullModel& null, const Grid& grid, EtaRange range, Execution exec) {
  const auto p = prepare(data, null);
  Vec out(static_cast<Eigen::Index>(grid.points.size()));
  for_each_index(grid.points.size(), exec, [&](std::size_t j) {
    out[static_cast<Eigen::Index>(j)] = profile_from_ratios(ratios(p, null.family(), grid.points[j]), p.data.counts, range);
  });
  return out;
}

double mixture_loglik(const Dataset& data, const DensityFamily& family, const MixingDistribution& q) {
  double l = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) l += std::log(mixture_density(q, family, data.row(i)));
  return l;
}

namespace {

// psi(x_i; theta_j) for the compressed data.
Mat component_densities(const WeightedData& data, const DensityFamily& family, const std::vector<Vec>& supports) {
  Mat psi(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(supports.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < supports.size(); ++j)
      psi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = family.density(supports[j], data.row(i));
  return psi;
}

Vec mixture_values(const Mat& psi, const Vec& w) {
  Vec g = psi * w;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (!(g[i] > 0.0)) throw DegenerateFit("every component has zero density at an observation");
  return g;
}

double weighted_loglik(const Vec& g, const Vec& c) { return c.dot(g.array().log().matrix()); }

// Drops light components and merges coincident ones; supports and weights are
// kept aligned.
void prune(std::vector<Vec>& supports, std::vector<double>& weights, const FitOptions& opts,
           std::vector<std::string>& warnings) {
  std::vector<Vec> s;
  std::vector<double> w;
  for (std::size_t j = 0; j < supports.size(); ++j) {
    if (weights[j] < opts.drop_weight) {
      warnings.push_back("component at " + fmt(supports[j][0]) + " dropped (weight " + fmt(weights[j]) + ")");
      continue;
    }
    auto twin = std::find_if(s.begin(), s.end(),
                             [&](const Vec& t) { return (t - supports[j]).norm() < opts.merge_distance; });
    if (twin != s.end()) {
      warnings.push_back("components at " + fmt(supports[j][0]) + " collapsed and were merged");
      w[static_cast<std::size_t>(twin - s.begin())] += weights[j];
      continue;
    }
    s.push_back(supports[j]);
    w.push_back(weights[j]);
  }
  if (s.empty()) throw DegenerateFit("all mixture components were dropped");
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  supports = std::move(s);
  weights = std::move(w);
}

Vec counts_vector(const WeightedData& data) {
  return Eigen::Map<const Vec>(data.counts.data(), static_cast<Eigen::Index>(data.counts.size()));
}

}  // namespace

FitResult fit_weights(const Dataset& data, const DensityFamily& family, const std::vector<Vec>& supports,
                      const FitOptions& opts) {
  if (supports.empty()) throw ValidationError("fit needs at least one support point");
  if (data.empty()) throw ValidationError("dataset is empty");
  for (const auto& s : supports) family.require_parameter(s);
  const auto wd = compress(data, family.discrete());
  const Vec c = counts_vector(wd);
  const double n = c.sum();
  const Mat psi = component_densities(wd, family, supports);
  const auto m = static_cast<Eigen::Index>(supports.size());

  Vec w = Vec::Constant(m, 1.0 / static_cast<double>(m));
  Vec g = mixture_values(psi, w);
  FitResult out{MixingDistribution::single(supports.front()), {weighted_loglik(g, c)}, 0, false, 0.0, {}};
  while (out.iterations < opts.max_iterations) {
    const Vec resp = psi.transpose() * c.cwiseQuotient(g);
    const Vec next = w.cwiseProduct(resp) / n;
    const double change = (next - w).cwiseAbs().maxCoeff();
    w = next / next.sum();
    g = mixture_values(psi, w);
    out.loglik_trace.push_back(weighted_loglik(g, c));
    ++out.iterations;
    if (change < opts.weight_tolerance) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) out.warnings.push_back("weight EM stopped at the iteration cap");

  std::vector<Vec> s = supports;
  std::vector<double> wv(w.data(), w.data() + w.size());
  prune(s, wv, opts, out.warnings);
  out.mixing = MixingDistribution::sorted(std::move(s), std::move(wv));
  return out;
}

namespace {

// max_j max(|S(theta_j)|, |S'(theta_j)|) with S the score process of the fitted mixture.
double stationarity_residual(const WeightedData& data, const DensityFamily& family, const std::vector<Vec>& supports,
                             const Vec& g) {
  double worst = 0.0;
  for (const auto& t : supports) {
    double s = 0.0;
    Vec ds = Vec::Zero(t.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double c = data.counts[i];
      const double gi = g[static_cast<Eigen::Index>(i)];
      s += c * (family.density(t, data.row(i)) / gi - 1.0);
      ds += c * family.density_grad(t, data.row(i)) / gi;
    }
    worst = std::max({worst, std::abs(s), ds.cwiseAbs().maxCoeff()});
  }
  return worst;
}

}  // namespace

FitResult fit_full(const Dataset& data, const DensityFamily& family, const std::vector<Vec>& initial_supports,
                   const FitOptions& opts) {
  if (initial_supports.empty()) throw ValidationError("fit needs at least one support point");
  if (data.empty()) throw ValidationError("dataset is empty");
  for (std::size_t i = 0; i < initial_supports.size(); ++i) {
    family.require_parameter(initial_supports[i]);
    for (std::size_t j = 0; j < i; ++j)
      if (initial_supports[i] == initial_supports[j]) throw ValidationError("initial supports must be distinct");
  }
  const auto wd = compress(data, family.discrete());
  const Vec c = counts_vector(wd);
  const double n = c.sum();
  const int d = family.param_dim();
  const auto k = static_cast<Eigen::Index>(wd.size());
  const Mat x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      wd.values.data(), k, d);

  std::vector<Vec> supports = initial_supports;
  const auto m = static_cast<Eigen::Index>(supports.size());
  Vec w = Vec::Constant(m, 1.0 / static_cast<double>(m));
  Mat psi = component_densities(wd, family, supports);
  Vec g = mixture_values(psi, w);
  double loglik = weighted_loglik(g, c);
  FitResult out{MixingDistribution::single(supports.front()), {loglik}, 0, false, 0.0, {}};

  while (out.iterations < opts.max_iterations) {
    // E-step: tau_ij = w_j psi_ij / g_i, scaled by the counts.
    const Vec cg = c.cwiseQuotient(g);
    const Mat tau = (psi.array().colwise() * cg.array()).rowwise() * w.transpose().array();
    const Vec mass = tau.colwise().sum().transpose();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!(mass[j] > 0.0)) continue;  // keeps its support; weight goes to zero below
      const Vec mean = (x.transpose() * tau.col(j)) / mass[j];
      supports[static_cast<std::size_t>(j)] = family.parameter_from_mean(mean);
    }
    w = mass / n;
    w /= w.sum();
    psi = component_densities(wd, family, supports);
    g = mixture_values(psi, w);
    const double next = weighted_loglik(g, c);
    out.loglik_trace.push_back(next);
    ++out.iterations;
    const double change = std::abs(next - loglik);
    loglik = next;
    if (change < opts.loglik_tolerance) {
      out.stationarity = stationarity_residual(wd, family, supports, g);
      if (out.stationarity < opts.stationarity_tolerance) {
        out.converged = true;
        break;
      }
    }
  }
  if (!out.converged) {
    out.stationarity = stationarity_residual(wd, family, supports, g);
    out.warnings.push_back("EM stopped at the iteration cap with stationarity residual " + fmt(out.stationarity));
  }

  std::vector<double> wv(w.data(), w.data() + w.size());
  prune(supports, wv, opts, out.warnings);
  out.mixing = MixingDistribution::sorted(std::move(supports), std::move(wv));
  return out;
}

NullModel fit_null(const Dataset& data, const TestSpec& spec, std::vector<std::string>* warnings) {
  const auto& null = spec.null;
  const auto& family = null.family();
  FitResult fit = [&] {
    switch (null.estimation()) {
      case NullEstimation::Weights:
        return fit_weights(data, family, null.mixing().supports(), spec.fit);
      case NullEstimation::WeightsAndSupports:
        return fit_full(data, family, null.mixing().supports(), spec.fit);
      case NullEstimation::None:
        break;
    }
    return FitResult{null.mixing(), {}, 0, true, 0.0, {}};
  }();
  if (null.estimation() == NullEstimation::None) return null;
  if (warnings) warnings->insert(warnings->end(), fit.warnings.begin(), fit.warnings.end());
  return null.with_mixing(fit.mixing);
}

Calibration calibrate(const NullModel& fitted, const TestSpec& spec, Execution exec) {
  const auto kind = fitted.estimation() == NullEstimation::None ? KernelKind::Fixed : KernelKind::NuisanceAdjusted;
  auto kernel = std::make_shared<const ScoreKernel>(fitted, spec.domain, kind, spec.strategy);
  auto manifold = summarize_manifold(spec.domain, detect_singularities(*kernel, spec.geometry));
  auto constants = tube_constants(*kernel, manifold, spec.geometry);
  const double c = critical_value(spec.alpha, constants);
  Grid grid = make_grid(spec.domain, manifold.singularities, spec.grid_points, spec.geometry);
  Vec diag = kernel_diagonal(*kernel, grid.points, exec);
  return Calibration{fitted, std::move(kernel), std::move(manifold), std::move(constants), c, std::move(grid),
                     std::move(diag)};
}

TestOutcome run_test(const Dataset& data, const TestSpec& spec, const Calibration* precomputed, Execution exec) {
  if (!(spec.alpha > 0.0 && spec.alpha <= 0.5)) throw DomainError("alpha must lie in (0, 0.5]");
  std::vector<std::string> warnings;
  std::optional<Calibration> own;
  if (precomputed) {
    if (spec.null.estimation() != NullEstimation::None)
      throw ValidationError("a precomputed calibration only applies to a fixed null");
  } else {
    own = calibrate(fit_null(data, spec, &warnings), spec, exec);
  }
  const Calibration& cal = precomputed ? *precomputed : *own;

  const auto ev = evaluate_process(data, cal, exec);
  const auto best = statistic(ev);
  const double p = best.value > 0.0 ? tail_probability(best.value, cal.constants) : 1.0;
  return TestOutcome{best.value, cal.critical_value, p, best.location, cal.fitted, cal.constants,
                     cal.manifold, best.value >= cal.critical_value, std::move(warnings)};
}

BuildResult sequential_build(const Dataset& data, const DensityFamily& family, const ThetaDomain& domain, double alpha,
                             int max_components, int grid_points, NullEstimation estimation, Execution exec) {
  if (max_components < 1) throw ValidationError("component cap must be at least 1");
  if (estimation == NullEstimation::None) throw ValidationError("model building needs an estimated null");
  if (data.empty()) throw ValidationError("dataset is empty");

  std::vector<Vec> supports{family.parameter_from_mean(sample_mean(data))};
  BuildResult result{MixingDistribution::single(supports.front()), {}, {}};
  for (int round = 0;; ++round) {
    std::vector<double> w(supports.size(), 1.0 / static_cast<double>(supports.size()));
    TestSpec spec{NullModel::mixture(family, MixingDistribution::sorted(supports, w), estimation), domain, alpha,
                  grid_points, {}, {}, KernelStrategy::Auto};
    auto outcome = run_test(data, spec, nullptr, exec);
    const auto& fitted = outcome.fitted.mixing();
    result.steps.push_back(BuildStep{static_cast<int>(fitted.size()), fitted, outcome.statistic,
                                     outcome.critical_value, outcome.p_value, outcome.constants.kappa0,
                                     outcome.constants.ell0, outcome.argmax, outcome.reject});
    result.warnings.insert(result.warnings.end(), outcome.warnings.begin(), outcome.warnings.end());
    result.mixing = fitted;
    if (!outcome.reject) break;
    if (static_cast<int>(fitted.size()) >= max_components) {
      result.warnings.push_back("component cap of " + std::to_string(max_components) +
                                " reached while the test still rejects");
      break;
    }
    if (round >= 2 * max_components) {
      result.warnings.push_back("model building stopped: added components keep collapsing");
      break;
    }
    supports = fitted.supports();
    supports.push_back(outcome.argmax);
  }
  return result;
}

}  // namespace tubescore
