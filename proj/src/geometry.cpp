#include "tubescore/geometry.hpp"

#include "tubescore/errors.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>

namespace tubescore {

namespace {

constexpr double kTwoPi = boost::math::constants::two_pi<double>();

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Adaptive Gauss-Kronrod over [a, b]. The integrand is mapped onto [0, 1] first:
// Boost mixes scaled and unscaled error estimates, which stalls the recursion
// on very short intervals.
template <class F>
double integrate(F&& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double w = b - a;
  auto mapped = [&](double s) { return f(a + s * w); };
  double err = 0.0;
  double l1 = 0.0;
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  // Absolute floor: integrands that are zero up to rounding (point manifolds)
  // never meet a relative tolerance.
  double value = w * GK::integrate(mapped, 0.0, 1.0, 0, tol, &err, &l1);
  if (0.5 * w * err > 1e2 * tol) value = w * GK::integrate(mapped, 0.0, 1.0, 12, tol, &err, &l1);
  if (!std::isfinite(value)) throw QuadratureError("adaptive quadrature produced a non-finite value");
  err *= 0.5 * w;
  if (err > std::max(1e-9, std::max(1e-7, 1e2 * tol) * l1 * w))
    throw QuadratureError("adaptive quadrature did not converge on [" + fmt_g(a) + ", " + fmt_g(b) +
                          "] (error estimate " + fmt_g(err) + ")");
  return value;
}

// Value at 0 of the interpolating polynomial through (x_k, y_k).
double neville_at_zero(std::vector<double> x, std::vector<double> y) {
  const auto n = y.size();
  for (std::size_t level = 1; level < n; ++level)
    for (std::size_t i = 0; i + level < n; ++i)
      y[i] = (x[i + level] * y[i] - x[i] * y[i + 1]) / (x[i + level] - x[i]);
  return y[0];
}

// Integral of g over (a, b) where either end may be singular: the integral is
// cut at distance eps from a singular end and the cut is extrapolated to 0
// from eps, eps/2, eps/4, ...
double integrate_piece(const std::function<double(double)>& g, double a, double b, double eps_a, double eps_b,
                       const GeometryOptions& opts) {
  const double lo = a + eps_a;
  const double hi = b - eps_b;
  if (!(hi > lo)) throw ValidationError("segment shorter than its singularity exclusion radii");
  double total = integrate(g, lo, hi, opts.quad_tolerance);

  auto strip_limit = [&](double eps, int side) {
    std::vector<double> xs{eps};
    std::vector<double> ys{0.0};
    double cut = eps;
    double acc = 0.0;
    for (int k = 1; k < opts.extrapolation_levels; ++k) {
      const double next = 0.5 * cut;
      acc += side < 0 ? integrate(g, a + next, a + cut, opts.quad_tolerance)
                      : integrate(g, b - cut, b - next, opts.quad_tolerance);
      cut = next;
      xs.push_back(cut);
      ys.push_back(acc);
    }
    return neville_at_zero(xs, ys);
  };
  if (eps_a > 0.0) total += strip_limit(eps_a, -1);
  if (eps_b > 0.0) total += strip_limit(eps_b, +1);
  return total;
}

double det_small(const Mat& m) {
  if (m.rows() == 1) return m(0, 0);
  if (m.rows() == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return m.determinant();
}

// Boundary curve piece gamma(v), v in [v0, v1].
struct Curve {
  std::function<Vec(double)> point;
  std::function<Vec(double)> tangent;
  double v0 = 0.0;
  double v1 = 1.0;
};

std::vector<Curve> boundary_curves(const ThetaDomain& domain) {
  std::vector<Curve> curves;
  if (domain.shape() == ThetaDomain::Shape::Disk) {
    const double r = domain.radius();
    curves.push_back(Curve{[r](double v) { return Vec{{r * std::cos(v), r * std::sin(v)}}; },
                           [r](double v) { return Vec{{-r * std::sin(v), r * std::cos(v)}}; }, 0.0, kTwoPi});
    return curves;
  }
  const Vec& lo = domain.lower();
  const Vec& hi = domain.upper();
  const std::vector<Vec> corners{Vec{{lo[0], lo[1]}}, Vec{{hi[0], lo[1]}}, Vec{{hi[0], hi[1]}}, Vec{{lo[0], hi[1]}}};
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec p = corners[i];
    const Vec q = corners[(i + 1) % 4];
    curves.push_back(Curve{[p, q](double v) -> Vec { return p + v * (q - p); }, [p, q](double) -> Vec { return q - p; },
                           0.0, 1.0});
  }
  return curves;
}

Vec domain_center(const ThetaDomain& domain) {
  if (domain.shape() == ThetaDomain::Shape::Disk) return Vec::Zero(2);
  return 0.5 * (domain.lower() + domain.upper());
}

double kappa0_1d(const CovarianceKernel& kernel, const ManifoldSummary& manifold, const GeometryOptions& opts) {
  const auto& domain = manifold.domain;
  const double lo = domain.lower()[0];
  const double hi = domain.upper()[0];
  const double width = domain.max_width();
  const double tol = 1e-12 * width;

  // Breakpoints with the exclusion radius on each side (0 = regular point).
  std::vector<std::pair<double, double>> cuts{{lo, 0.0}};
  std::vector<Singularity> sorted = manifold.singularities;
  std::sort(sorted.begin(), sorted.end(),
            [](const Singularity& a, const Singularity& b) { return a.location[0] < b.location[0]; });
  double end_eps = 0.0;
  for (const auto& s : sorted) {
    const double x = s.location[0];
    const double eps = exclusion_radius(s, domain, opts);
    if (std::abs(x - lo) <= tol)
      cuts.front().second = eps;
    else if (std::abs(x - hi) <= tol)
      end_eps = eps;
    else
      cuts.emplace_back(x, eps);
  }
  cuts.emplace_back(hi, end_eps);

  auto density = [&](double t) { return kappa_density(kernel, Vec::Constant(1, t), opts, width); };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    total += integrate_piece(density, cuts[i].first, cuts[i + 1].first, cuts[i].second, cuts[i + 1].second, opts);
  return total;
}

double kappa0_2d(const CovarianceKernel& kernel, const ManifoldSummary& manifold, const GeometryOptions& opts) {
  const auto& domain = manifold.domain;
  const double width = domain.max_width();
  const bool singular_center = !manifold.singularities.empty();
  const Vec center = singular_center ? manifold.singularities.front().location : domain_center(domain);
  const double eps = singular_center ? exclusion_radius(manifold.singularities.front(), domain, opts) : 0.0;

  // Star parametrization theta = c + u (gamma(v) - c), Jacobian u |det(gamma - c, gamma')|.
  double total = 0.0;
  for (const auto& curve : boundary_curves(domain)) {
    auto outer = [&](double v) {
      const Vec ray = curve.point(v) - center;
      const Vec tangent = curve.tangent(v);
      const double jac = std::abs(ray[0] * tangent[1] - ray[1] * tangent[0]);
      auto inner = [&](double u) { return u * jac * kappa_density(kernel, center + u * ray, opts, width); };
      return integrate_piece(inner, 0.0, 1.0, eps / ray.norm(), 0.0, opts);
    };
    total += integrate(outer, curve.v0, curve.v1, 1e3 * opts.quad_tolerance);
  }
  return total;
}

}  // namespace

DiagJet diagonal_jet(const CovarianceKernel& kernel, const Vec& t, const GeometryOptions& opts, double width) {
  if (auto jet = kernel.analytic_jet(t)) return *jet;
  const auto d = t.size();
  const double h = opts.fd_step * width;
  DiagJet jet;
  jet.value = kernel.variance(t);
  jet.grad.resize(d);
  jet.mixed.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Vec tp = t;
    Vec tm = t;
    tp[i] += h;
    tm[i] -= h;
    jet.grad[i] = (kernel(tp, t) - kernel(tm, t)) / (2.0 * h);
    for (Eigen::Index j = 0; j <= i; ++j) {
      Vec sp = t;
      Vec sm = t;
      sp[j] += h;
      sm[j] -= h;
      jet.mixed(i, j) = jet.mixed(j, i) =
          (kernel(tp, sp) - kernel(tp, sm) - kernel(tm, sp) + kernel(tm, sm)) / (4.0 * h * h);
    }
  }
  return jet;
}

double kappa_density(const CovarianceKernel& kernel, const Vec& t, const GeometryOptions& opts, double width) {
  const DiagJet jet = diagonal_jet(kernel, t, opts, width);
  if (!(jet.value > 0.0)) throw SingularityError("curvature integrand evaluated at a zero of the kernel diagonal");
  const Mat schur = jet.schur.size() ? jet.schur : Mat(jet.mixed - jet.grad * jet.grad.transpose() / jet.value);
  const auto d = static_cast<double>(t.size());
  double det = std::isnan(jet.schur_det) ? det_small(schur) : jet.schur_det;
  const double scale = std::pow(std::max(jet.mixed.norm(), 1e-300), d);
  if (det < -1e-8 * scale) throw CurvatureError("negative determinant in the curvature integrand");
  det = std::max(det, 0.0);
  return std::sqrt(det) / std::pow(jet.value, 0.5 * d);
}

std::vector<Singularity> declared_singularities(const ScoreKernel& kernel, const GeometryOptions& opts) {
  std::vector<Singularity> out;
  const auto& null = kernel.null();
  const bool removable =
      kernel.nuisance_dim() > 0 && null.estimation() == NullEstimation::WeightsAndSupports;
  for (const auto& s : null.mixing().supports()) {
    if (!kernel.domain().contains(s, 1e-12)) continue;
    if (!(kernel.variance(s) < opts.eps_sing)) continue;
    out.push_back({s, removable ? SingularityClass::Removable : SingularityClass::Flip});
  }
  return out;
}

SingularityClass classify_singularity(const CovarianceKernel& kernel, const ThetaDomain& domain, const Vec& s,
                                      const GeometryOptions&) {
  const double tau = 1e-2 * domain.max_width();
  Vec dir = Vec::Zero(s.size());
  dir[0] = 1.0;
  if (!domain.contains(s + tau * dir)) dir[0] = -1.0;
  auto ratio = [&](double t) { return kernel.variance(s + t * dir) / (t * t); };
  const double q = ratio(0.5 * tau) / ratio(tau);
  return q > 0.625 ? SingularityClass::Flip : SingularityClass::Removable;
}

std::vector<Singularity> detect_singularities(const CovarianceKernel& kernel, const ThetaDomain& domain,
                                              const std::vector<Singularity>& declared,
                                              const GeometryOptions& opts) {
  std::vector<Singularity> found;
  for (const auto& s : declared) {
    if (!domain.contains(s.location, 1e-12)) continue;
    if (!(kernel.variance(s.location) < opts.eps_sing)) continue;
    if (classify_singularity(kernel, domain, s.location, opts) != s.cls)
      throw ClassificationConflict("numerical order of the kernel zero contradicts the declared singularity class");
    found.push_back(s);
  }

  if (domain.dim() == 1) {
    const double lo = domain.lower()[0];
    const double hi = domain.upper()[0];
    const int n = std::max(opts.scan_points, 3);
    const double step = (hi - lo) / (n - 1);
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = kernel.variance(Vec::Constant(1, lo + i * step));
    auto log_var = [&](double t) { return std::log(std::max(kernel.variance(Vec::Constant(1, t)), 1e-300)); };
    for (int i = 0; i < n; ++i) {
      const bool left_ok = i == 0 || v[i] <= v[i - 1];
      const bool right_ok = i == n - 1 || v[i] <= v[i + 1];
      if (!left_ok || !right_ok) continue;
      const double a = lo + std::max(i - 1, 0) * step;
      const double b = lo + std::min(i + 1, n - 1) * step;
      const auto [tmin, fmin] = boost::math::tools::brent_find_minima(log_var, a, b, 52);
      if (!(std::exp(fmin) < opts.eps_sing)) continue;
      const bool known = std::any_of(found.begin(), found.end(), [&](const Singularity& s) {
        return std::abs(s.location[0] - tmin) < 1e-6 * (hi - lo);
      });
      if (known) continue;
      const Vec loc = Vec::Constant(1, tmin);
      found.push_back({loc, classify_singularity(kernel, domain, loc, opts)});
    }
    std::sort(found.begin(), found.end(),
              [](const Singularity& a, const Singularity& b) { return a.location[0] < b.location[0]; });
  }
  return found;
}

std::vector<Singularity> detect_singularities(const ScoreKernel& kernel, const GeometryOptions& opts) {
  return detect_singularities(kernel, kernel.domain(), declared_singularities(kernel, opts), opts);
}

ManifoldSummary summarize_manifold(const ThetaDomain& domain, std::vector<Singularity> singularities) {
  ManifoldSummary m;
  m.d = domain.dim();
  m.domain = domain;
  if (m.d == 1) {
    const double tol = 1e-12 * domain.max_width();
    m.segments = 1;
    for (const auto& s : singularities)
      if (s.cls == SingularityClass::Flip && s.location[0] > domain.lower()[0] + tol &&
          s.location[0] < domain.upper()[0] - tol)
        ++m.segments;
    m.holes = 0;
    m.euler = m.segments;
  } else if (m.d == 2) {
    if (singularities.size() > 1)
      throw UnsupportedDimension("two-parameter manifolds with more than one singular point are not supported");
    for (const auto& s : singularities) {
      const double margin = 1e-6 * domain.max_width();
      if (!domain.contains(s.location) || !domain.contains(s.location + Vec::Constant(2, margin)) ||
          !domain.contains(s.location - Vec::Constant(2, margin)))
        throw ValidationError("two-parameter singular points must lie in the interior of the domain");
      if (s.cls == SingularityClass::Flip) ++m.holes;
    }
    m.segments = 1;
    m.euler = 1 - m.holes;
  } else {
    throw UnsupportedDimension("manifold summaries exist for d = 1 and d = 2 only");
  }
  m.singularities = std::move(singularities);
  return m;
}

double exclusion_radius(const Singularity& s, const ThetaDomain& domain, const GeometryOptions& opts) {
  return (s.cls == SingularityClass::Flip ? opts.flip_exclusion : opts.removable_exclusion) * domain.max_width();
}

double kappa0(const CovarianceKernel& kernel, const ManifoldSummary& manifold, const GeometryOptions& opts) {
  if (kernel.dim() != manifold.d) throw ValidationError("kernel and manifold dimensions differ");
  // Finite-difference jets carry rounding noise of order eps / fd_step^2 that
  // no quadrature refinement removes; ask only for what they can deliver.
  GeometryOptions local = opts;
  if (!kernel.analytic_jet(domain_center(manifold.domain)))
    local.quad_tolerance = std::max(opts.quad_tolerance, opts.fd_quad_tolerance);
  if (manifold.d == 1) return kappa0_1d(kernel, manifold, local);
  if (manifold.d == 2) return kappa0_2d(kernel, manifold, local);
  throw UnsupportedDimension("kappa0 is implemented for d = 1 and d = 2");
}

double ell0(const CovarianceKernel& kernel, const ManifoldSummary& manifold, const GeometryOptions& opts) {
  if (manifold.d == 1) return 2.0 * manifold.segments;
  if (manifold.d != 2) throw UnsupportedDimension("ell0 is implemented for d = 1 and d = 2");
  const double width = manifold.domain.max_width();
  double total = 0.0;
  for (const auto& curve : boundary_curves(manifold.domain)) {
    auto speed = [&](double v) {
      const Vec t = curve.point(v);
      const Vec tangent = curve.tangent(v);
      const DiagJet jet = diagonal_jet(kernel, t, opts, width);
      if (!(jet.value > 0.0)) throw SingularityError("kernel diagonal vanishes on the domain boundary");
      const Mat schur = jet.schur.size() ? jet.schur : Mat(jet.mixed - jet.grad * jet.grad.transpose() / jet.value);
      return std::sqrt(std::max(tangent.dot(schur * tangent), 0.0) / jet.value);
    };
    total += integrate(speed, curve.v0, curve.v1, opts.quad_tolerance);
  }
  return total + kTwoPi * manifold.holes;
}

TubeConstants make_constants(int d, double kappa0, double ell0, int euler) {
  if (!(kappa0 >= 0.0) || !(ell0 >= 0.0)) throw ValidationError("tube constants must be nonnegative");
  TubeConstants c;
  c.d = d;
  c.kappa0 = kappa0;
  c.ell0 = ell0;
  c.euler = euler;
  if (d == 1) {
    c.zeta = Vec{{kappa0, ell0 / 2.0}};
  } else if (d == 2) {
    c.euler_composite = kTwoPi * euler - kappa0;
    c.zeta = Vec{{kappa0, ell0 / 2.0, c.euler_composite / kTwoPi}};
  } else {
    throw UnsupportedDimension("tube constants exist for d = 1 and d = 2 only");
  }
  return c;
}

TubeConstants tube_constants(const CovarianceKernel& kernel, const ManifoldSummary& manifold,
                             const GeometryOptions& opts) {
  if (manifold.d != 1 && manifold.d != 2) throw UnsupportedDimension("tube constants exist for d = 1 and d = 2 only");
  return make_constants(manifold.d, kappa0(kernel, manifold, opts), ell0(kernel, manifold, opts), manifold.euler);
}

double tail_probability(double c, const TubeConstants& constants) {
  if (!(c > 0.0)) throw DomainError("tail probability needs a positive threshold");
  const auto d = static_cast<int>(constants.zeta.size()) - 1;
  const double x = 0.5 * c * c;
  double p = 0.0;
  for (int t = 0; t <= d; ++t) {
    const int k = d + 1 - t;
    const double area = 2.0 * std::pow(boost::math::constants::pi<double>(), 0.5 * k) / std::tgamma(0.5 * k);
    p += constants.zeta[t] / area * boost::math::gamma_q(0.5 * k, x);
  }
  return std::clamp(p, 0.0, 1.0);
}

double critical_value(double alpha, const TubeConstants& constants) {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw DomainError("alpha must lie in (0, 0.5]");
  constexpr double lo = 0.5;
  constexpr double hi = 10.0;
  auto f = [&](double c) { return tail_probability(c, constants) - alpha; };
  if (f(lo) < 0.0 || f(hi) > 0.0) throw BracketError("no critical value in [0.5, 10] for these constants");
  const auto [a, b] = boost::math::tools::bisect(f, lo, hi, boost::math::tools::eps_tolerance<double>(52));
  return 0.5 * (a + b);
}

}  // namespace tubescore
