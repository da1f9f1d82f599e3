#include "tubescore/covariance.hpp"

#include "tubescore/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>

namespace tubescore {

namespace {

// Envelope half-width (in standard deviations) kept around every peak of the
// normal-family integrands; exp(-L^2/2) ~ 2.6e-18.
constexpr double kNormalEnvelope = 9.0;

// expm1(u) - u without cancellation for small |u|.
double expm1_minus_linear(double u) {
  if (std::abs(u) >= 0.5) return std::expm1(u) - u;
  double term = 0.5 * u * u;
  double sum = term;
  for (int k = 3; k < 40; ++k) {
    term *= u / k;
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

// (m/u + e^u - m^2/k) with m = expm1(u), k = m - u; the leading terms cancel.
double nuisance_radial(double u) {
  if (std::abs(u) < 0.01)
    return u / 6.0 + u * u / 9.0 + 41.0 * u * u * u / 1080.0 + 7.0 * std::pow(u, 4) / 810.0 +
           199.0 * std::pow(u, 5) / 136080.0;
  const double m = std::expm1(u);
  const double k = expm1_minus_linear(u);
  return m / u + std::exp(u) - m * m / k;
}

// I - delta delta^T / |delta|^2 formed without subtraction for d <= 2.
Mat orthogonal_projector(const Vec& delta) {
  const auto d = delta.size();
  const double n2 = delta.squaredNorm();
  if (d == 1) return Mat::Zero(1, 1);
  if (d == 2) {
    Mat p(2, 2);
    p << delta[1] * delta[1], -delta[0] * delta[1], -delta[0] * delta[1], delta[0] * delta[0];
    return p / n2;
  }
  return Mat::Identity(d, d) - delta * delta.transpose() / n2;
}

// Gram matrix of the columns of dr after projecting out r, inner product weighted by w.
Mat projected_gram(const Mat& dr, const Vec& r, const Vec& w) {
  const double rr = w.cwiseProduct(r).dot(r);
  const Vec coef = dr.transpose() * w.cwiseProduct(r) / rr;
  const Mat q = dr - r * coef.transpose();
  return q.transpose() * w.asDiagonal() * q;
}

// Same determinant through a QR factorization of the projected columns, which
// avoids the cancellation of expanding a nearly singular Gram matrix.
double projected_gram_det(const Mat& dr, const Vec& r, const Vec& w) {
  const Vec sw = w.cwiseSqrt();
  const Vec rs = sw.cwiseProduct(r);
  const Vec coef = (sw.asDiagonal() * dr).transpose() * rs / rs.squaredNorm();
  const Mat q = sw.asDiagonal() * dr - rs * coef.transpose();
  const Eigen::HouseholderQR<Mat> qr(q);
  const Mat rr = qr.matrixQR().topRows(q.cols()).triangularView<Eigen::Upper>();
  double det = 1.0;
  for (Eigen::Index i = 0; i < rr.rows(); ++i) det *= rr(i, i) * rr(i, i);
  return det;
}

template <std::size_t N>
void append_gauss_panel(double a, double b, std::vector<double>& x, std::vector<double>& w) {
  using rule = boost::math::quadrature::gauss<double, N>;
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const auto& abscissa = rule::abscissa();
  const auto& weights = rule::weights();
  for (std::size_t i = 0; i < abscissa.size(); ++i) {
    if (abscissa[i] == 0.0) {
      x.push_back(mid);
      w.push_back(half * weights[i]);
    } else {
      x.push_back(mid - half * abscissa[i]);
      w.push_back(half * weights[i]);
      x.push_back(mid + half * abscissa[i]);
      w.push_back(half * weights[i]);
    }
  }
}

// Composite Gauss-Legendre on [lo, hi] with panels no wider than max_panel.
template <std::size_t N>
void composite_gauss(double lo, double hi, double max_panel, std::vector<double>& x, std::vector<double>& w) {
  const auto panels = static_cast<int>(std::ceil((hi - lo) / max_panel));
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) append_gauss_panel<N>(lo + p * h, lo + (p + 1) * h, x, w);
}

// Polynomial pieces of Binomial(2, theta), extended to all real theta.
struct BinomialPoly {
  static double p(int x, double t) {
    switch (x) {
      case 0:
        return (1.0 - t) * (1.0 - t);
      case 1:
        return 2.0 * t * (1.0 - t);
      default:
        return t * t;
    }
  }
  // p(x, t) - p(x, l), factored so it keeps relative accuracy as t -> l.
  static double diff(int x, double t, double l) {
    switch (x) {
      case 0:
        return (l - t) * (2.0 - t - l);
      case 1:
        return 2.0 * (t - l) * (1.0 - t - l);
      default:
        return (t - l) * (t + l);
    }
  }
  static double dp(int x, double t) {
    switch (x) {
      case 0:
        return -2.0 * (1.0 - t);
      case 1:
        return 2.0 - 4.0 * t;
      default:
        return 2.0 * t;
    }
  }
};

bool analytic_available(const NullModel& null) { return null.components() == 1; }

// psi(x;theta) - psi(x;anchor), accurate when theta is close to anchor.
double density_diff(const DensityFamily& family, const Vec& theta, const Vec& anchor, std::span<const double> x) {
  if (family.kind() == FamilyKind::Binomial2) return BinomialPoly::diff(static_cast<int>(x[0]), theta[0], anchor[0]);
  const double base = family.density(anchor, x);
  if (base == 0.0) return family.density(theta, x);
  double e = 0.0;
  if (family.kind() == FamilyKind::Normal) {
    for (Eigen::Index i = 0; i < theta.size(); ++i) e += (theta[i] - anchor[i]) * (x[i] - 0.5 * (theta[i] + anchor[i]));
  } else {
    e = (theta[0] - anchor[0]) * x[0] - (family.cumulant(theta) - family.cumulant(anchor));
  }
  return base * std::expm1(e);
}

// phi(theta) - phi(anchor) - (theta - anchor) phi'(anchor) for scalar families.
double cumulant_remainder(const DensityFamily& family, const Vec& theta, const Vec& anchor) {
  const double delta = theta[0] - anchor[0];
  if (family.name() == "poisson") return std::exp(anchor[0]) * expm1_minus_linear(delta);
  return family.cumulant(theta) - family.cumulant(anchor) - delta * family.cumulant_grad(anchor)[0];
}

// psi(x;theta) - psi(x;anchor) - (theta - anchor) . grad psi(x;anchor).
double density_diff2(const DensityFamily& family, const Vec& theta, const Vec& anchor, std::span<const double> x) {
  if (family.kind() == FamilyKind::Binomial2) {
    static constexpr double c[3] = {1.0, -2.0, 1.0};
    const double delta = theta[0] - anchor[0];
    return c[static_cast<int>(x[0])] * delta * delta;
  }
  const double base = family.density(anchor, x);
  if (base == 0.0) return family.density(theta, x);
  if (family.kind() == FamilyKind::Normal) {
    double e = 0.0;
    double d2 = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double delta = theta[i] - anchor[i];
      e += delta * (x[i] - 0.5 * (theta[i] + anchor[i]));
      d2 += delta * delta;
    }
    return base * (expm1_minus_linear(e) - 0.5 * d2);
  }
  const double e = (theta[0] - anchor[0]) * x[0] - (family.cumulant(theta) - family.cumulant(anchor));
  return base * (expm1_minus_linear(e) - cumulant_remainder(family, theta, anchor));
}

// grad psi(x;theta) - grad psi(x;anchor).
Vec density_grad_diff(const DensityFamily& family, const Vec& theta, const Vec& anchor, std::span<const double> x) {
  if (family.kind() == FamilyKind::Binomial2) {
    static constexpr double c[3] = {2.0, -4.0, 2.0};
    return Vec::Constant(1, c[static_cast<int>(x[0])] * (theta[0] - anchor[0]));
  }
  const double diff = density_diff(family, theta, anchor, x);
  const double at_theta = family.density(theta, x);
  const auto d = theta.size();
  Vec out(d);
  if (family.kind() == FamilyKind::Normal) {
    for (Eigen::Index i = 0; i < d; ++i) out[i] = diff * (x[i] - anchor[i]) - at_theta * (theta[i] - anchor[i]);
    return out;
  }
  const double mean_anchor = family.cumulant_grad(anchor)[0];
  const double mean_shift = family.cumulant_grad(theta)[0] - mean_anchor;
  out[0] = diff * (x[0] - mean_anchor) - at_theta * mean_shift;
  return out;
}

// psi(x;theta)/psi(x;lambda) - 1 written in theta - lambda, accurate near lambda.
double single_ratio_minus_one(const DensityFamily& family, const Vec& lambda, const Vec& theta,
                              std::span<const double> x) {
  switch (family.kind()) {
    case FamilyKind::Binomial2: {
      const int xi = static_cast<int>(x[0]);
      return BinomialPoly::diff(xi, theta[0], lambda[0]) / BinomialPoly::p(xi, lambda[0]);
    }
    case FamilyKind::Normal: {
      double e = 0.0;
      for (Eigen::Index i = 0; i < theta.size(); ++i)
        e += (theta[i] - lambda[i]) * (x[i] - 0.5 * (theta[i] + lambda[i]));
      return std::expm1(e);
    }
    default:
      return std::expm1((theta[0] - lambda[0]) * x[0] - (family.cumulant(theta) - family.cumulant(lambda)));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Mat CovarianceKernel::gram(std::span<const Vec> points) const {
  const auto n = static_cast<Eigen::Index>(points.size());
  Mat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) out(i, j) = out(j, i) = (*this)(points[i], points[j]);
  return out;
}

SupportRule make_support_rule(const NullModel& null, const ThetaDomain& domain) {
  const auto& family = null.family();
  SupportRule rule;
  rule.dim = family.data_dim();

  if (family.kind() == FamilyKind::Binomial2) {
    rule.nodes = family.finite_support();
    rule.weights.assign(rule.nodes.size(), 1.0);
    return rule;
  }

  if (family.kind() == FamilyKind::Exponential) {
    if (!family.discrete())
      throw ValidationError(family.name() + ": quadrature needs a discrete or normal family; use the analytic kernel");
    // The integrands behave like psi(.; 2 theta - lambda); cover its mean plus a wide tail.
    double smin = std::numeric_limits<double>::infinity();
    double smax = -smin;
    for (const auto& s : null.mixing().supports()) {
      smin = std::min(smin, s[0]);
      smax = std::max(smax, s[0]);
    }
    const double t_env = std::min(std::max({2.0 * domain.upper()[0] - smin, domain.upper()[0], smax}),
                                  family.theta_hi());
    const double mean_env = family.mean(Vec::Constant(1, t_env))[0];
    const double upper = std::ceil(mean_env + 15.0 * std::sqrt(mean_env) + 40.0);
    if (!(upper < 2e6)) throw NonfiniteVariance(family.name() + ": support truncation too large for quadrature");
    for (double x = 0.0; x <= upper; x += 1.0) {
      rule.nodes.push_back(x);
      rule.weights.push_back(1.0);
    }
    rule.truncation_bound = family.density(Vec::Constant(1, t_env), std::span<const double>(&rule.nodes.back(), 1));
    return rule;
  }

  // Normal family: tensor-product composite Gauss-Legendre.
  const int s = family.data_dim();
  if (s > 2) throw UnsupportedDimension("quadrature kernels support normal families of dimension 1 or 2");
  std::vector<std::vector<double>> axis_x(s), axis_w(s);
  for (int i = 0; i < s; ++i) {
    double smin = std::numeric_limits<double>::infinity();
    double smax = -smin;
    for (const auto& sp : null.mixing().supports()) {
      smin = std::min(smin, sp[i]);
      smax = std::max(smax, sp[i]);
    }
    const double tlo = domain.lower()[i];
    const double thi = domain.upper()[i];
    const double lo = std::min({2.0 * tlo - smax, smin, tlo}) - kNormalEnvelope;
    const double hi = std::max({2.0 * thi - smin, smax, thi}) + kNormalEnvelope;
    if (s == 1)
      composite_gauss<20>(lo, hi, 1.0, axis_x[i], axis_w[i]);
    else
      composite_gauss<10>(lo, hi, 0.5, axis_x[i], axis_w[i]);
  }
  if (s == 1) {
    rule.nodes = std::move(axis_x[0]);
    rule.weights = std::move(axis_w[0]);
  } else {
    for (std::size_t a = 0; a < axis_x[0].size(); ++a)
      for (std::size_t b = 0; b < axis_x[1].size(); ++b) {
        rule.nodes.push_back(axis_x[0][a]);
        rule.nodes.push_back(axis_x[1][b]);
        rule.weights.push_back(axis_w[0][a] * axis_w[1][b]);
      }
  }
  rule.truncation_bound = std::erfc(kNormalEnvelope / std::sqrt(2.0));
  return rule;
}

// ---------------------------------------------------------------------------
// ScoreKernel

ScoreKernel::ScoreKernel(NullModel null, ThetaDomain domain, KernelKind kind, KernelStrategy strategy)
    : null_(std::move(null)), domain_(std::move(domain)), kind_(kind), strategy_(strategy) {
  const auto& family = null_.family();
  if (domain_.dim() != family.param_dim())
    throw ValidationError("kernel: parameter domain dimension differs from the family's");

  if (strategy_ == KernelStrategy::Auto)
    strategy_ = analytic_available(null_) ? KernelStrategy::Analytic : KernelStrategy::Quadrature;
  if (strategy_ == KernelStrategy::Analytic && !analytic_available(null_))
    throw ValidationError("kernel: closed forms exist only for single-density nulls");

  nuisance_dim_ = kind_ == KernelKind::NuisanceAdjusted ? null_.free_parameter_count() : 0;

  if (strategy_ == KernelStrategy::Quadrature) {
    build_quadrature();
    return;
  }

  const Vec& lambda = null_.mixing().supports().front();
  if (family.kind() == FamilyKind::Binomial2) {
    const double l = lambda[0];
    if (!(l > 0.0 && l < 1.0))
      throw SupportViolation("binomial2 null with lambda on the boundary does not cover the perturbation support");
  }
  const int p = null_.free_parameter_count();
  if (p > 0) {
    if (family.kind() == FamilyKind::Binomial2) {
      const double l = lambda[0];
      fisher_.matrix = Mat::Constant(1, 1, 2.0 / (l * (1.0 - l)));
    } else {
      fisher_.matrix = family.cumulant_hessian(lambda);
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(fisher_.matrix);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) throw DegenerateModel("kernel: singular Fisher information");
  }
}

void ScoreKernel::build_quadrature() {
  const auto& family = null_.family();
  rule_ = make_support_rule(null_, domain_);
  const auto k_nodes = rule_.size();

  std::vector<double> kept_nodes;
  std::vector<double> kept_weights;
  std::vector<double> kept_f;
  for (std::size_t k = 0; k < k_nodes; ++k) {
    const auto x = rule_.node(k);
    const double f = null_.density(x);
    if (!(f > 1e-300)) {
      if (family.discrete()) {
        // A support value the null cannot produce: acceptable only when no
        // perturbation in the domain puts mass there.
        bool reachable = false;
        for (const auto& corner : {domain_.lower(), domain_.upper()})
          if (family.density(corner, x) > 0.0) reachable = true;
        if (reachable)
          throw SupportViolation("null density vanishes where the perturbation density is positive");
      }
      continue;
    }
    kept_nodes.insert(kept_nodes.end(), x.begin(), x.end());
    kept_weights.push_back(rule_.weights[k]);
    kept_f.push_back(f);
  }
  rule_.nodes = std::move(kept_nodes);
  rule_.weights = std::move(kept_weights);

  const auto k = static_cast<Eigen::Index>(rule_.size());
  null_density_ = Eigen::Map<const Vec>(kept_f.data(), k);
  weighted_density_ = null_density_.cwiseProduct(Eigen::Map<const Vec>(rule_.weights.data(), k));
  sqrt_weight_ = weighted_density_.cwiseSqrt();

  const int p = null_.free_parameter_count();
  if (p > 0) {
    scores_.resize(k, p);
    for (Eigen::Index i = 0; i < k; ++i) scores_.row(i) = null_.log_density_grad(rule_.node(i)).transpose();
    fisher_.matrix = scores_.transpose() * weighted_density_.asDiagonal() * scores_;
    fisher_.matrix = 0.5 * (fisher_.matrix + fisher_.matrix.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(fisher_.matrix);
    const double top = std::max(1.0, eig.eigenvalues().maxCoeff());
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * top))
      throw DegenerateModel("kernel: singular Fisher information (duplicate or vanishing components?)");
  }
  if (nuisance_dim_ == 0) return;

  // Projecting the residual off the null scores equals projecting psi(.;theta)/f
  // off span{psi_j/f, grad psi_j/f}, since the constant 1 lies in that span and
  // is orthogonal to every score. The basis is orthonormalized in the
  // sqrt(w f) weighted coordinates.
  const bool supports = null_.estimation() == NullEstimation::WeightsAndSupports;
  const auto& comps = null_.mixing().supports();
  const auto m = static_cast<Eigen::Index>(comps.size());
  const Eigen::Index cols = m * (supports ? 1 + dim() : 1);
  Mat basis(k, cols);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto x = rule_.node(i);
    const double scale = sqrt_weight_[i] / null_density_[i];
    for (Eigen::Index j = 0; j < m; ++j) {
      basis(i, j) = scale * family.density(comps[j], x);
      if (supports) basis.row(i).segment(m + j * dim(), dim()) = scale * family.density_grad(comps[j], x).transpose();
    }
  }
  const Eigen::HouseholderQR<Mat> qr(basis);
  const Vec diag = qr.matrixQR().diagonal().head(cols).cwiseAbs();
  if (!(diag.minCoeff() > 1e-10 * diag.maxCoeff()))
    throw DegenerateModel("kernel: null scores are linearly dependent");
  basis_ = qr.householderQ() * Mat::Identity(k, cols);
}

std::size_t ScoreKernel::nearest_component(const Vec& theta) const {
  const auto& comps = null_.mixing().supports();
  std::size_t best = 0;
  for (std::size_t j = 1; j < comps.size(); ++j)
    if ((comps[j] - theta).squaredNorm() < (comps[best] - theta).squaredNorm()) best = j;
  return best;
}

Vec ScoreKernel::residual(const Vec& theta) const {
  const auto& family = null_.family();
  family.require_parameter(theta);
  const auto k = static_cast<Eigen::Index>(rule_.size());
  Vec r(k);
  if (nuisance_dim_ == 0) {
    if (null_.components() == 1) {
      const Vec& lambda = null_.mixing().supports().front();
      for (Eigen::Index i = 0; i < k; ++i) r[i] = single_ratio_minus_one(family, lambda, theta, rule_.node(i));
    } else {
      for (Eigen::Index i = 0; i < k; ++i) r[i] = family.density(theta, rule_.node(i)) / null_density_[i] - 1.0;
    }
    return sqrt_weight_.cwiseProduct(r);
  }
  // Subtracting the nearest component's (first-order) expansion changes nothing
  // after projection but keeps the small residual accurate near that component.
  const Vec& anchor = null_.mixing().supports()[nearest_component(theta)];
  const bool second_order = null_.estimation() == NullEstimation::WeightsAndSupports;
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto x = rule_.node(i);
    const double diff = second_order ? density_diff2(family, theta, anchor, x) : density_diff(family, theta, anchor, x);
    r[i] = diff / null_density_[i];
  }
  r = sqrt_weight_.cwiseProduct(r);
  r.noalias() -= basis_ * (basis_.transpose() * r);
  return r;
}

Mat ScoreKernel::residual_grad(const Vec& theta) const {
  const auto& family = null_.family();
  const auto k = static_cast<Eigen::Index>(rule_.size());
  Mat dr(k, dim());
  const bool second_order = nuisance_dim_ > 0 && null_.estimation() == NullEstimation::WeightsAndSupports;
  const Vec& anchor = null_.mixing().supports()[nearest_component(theta)];
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto x = rule_.node(i);
    const Vec g = second_order ? density_grad_diff(family, theta, anchor, x) : family.density_grad(theta, x);
    dr.row(i) = (sqrt_weight_[i] / null_density_[i]) * g.transpose();
  }
  if (nuisance_dim_ > 0) dr.noalias() -= basis_ * (basis_.transpose() * dr);
  return dr;
}

double ScoreKernel::operator()(const Vec& a, const Vec& b) const {
  if (a.size() != dim() || b.size() != dim()) throw DomainError("kernel: argument of wrong dimension");
  if (strategy_ == KernelStrategy::Analytic) return analytic_value(a, b);
  const Vec ra = residual(a);
  if (a == b) return ra.squaredNorm();
  return ra.dot(residual(b));
}

double ScoreKernel::variance(const Vec& a) const {
  if (strategy_ == KernelStrategy::Analytic) return analytic_value(a, a);
  return residual(a).squaredNorm();
}

Mat ScoreKernel::gram(std::span<const Vec> points) const {
  if (strategy_ == KernelStrategy::Analytic) return CovarianceKernel::gram(points);
  const auto n = static_cast<Eigen::Index>(points.size());
  Mat r(static_cast<Eigen::Index>(rule_.size()), n);
  for (Eigen::Index j = 0; j < n; ++j) r.col(j) = residual(points[j]);
  Mat out = r.transpose() * r;
  return 0.5 * (out + out.transpose());
}

std::optional<DiagJet> ScoreKernel::analytic_jet(const Vec& t) const {
  if (t.size() != dim()) throw DomainError("kernel: argument of wrong dimension");
  if (strategy_ == KernelStrategy::Analytic) return analytic_diag(t);
  const Vec r = residual(t);
  const Mat dr = residual_grad(t);
  const Vec ones = Vec::Ones(r.size());
  DiagJet jet;
  jet.value = r.squaredNorm();
  jet.grad = dr.transpose() * r;
  jet.mixed = dr.transpose() * dr;
  if (jet.value > 0.0) {
    jet.schur = projected_gram(dr, r, ones);
    jet.schur_det = projected_gram_det(dr, r, ones);
  }
  return jet;
}

Vec ScoreKernel::cov_vector(const Vec& theta) const {
  const auto& family = null_.family();
  const int p = null_.free_parameter_count();
  if (p == 0) return Vec(0);
  if (strategy_ == KernelStrategy::Analytic) {
    const Vec& lambda = null_.mixing().supports().front();
    if (family.kind() == FamilyKind::Binomial2) {
      const double l = lambda[0];
      double v = 0.0;
      for (int x = 0; x < 3; ++x) v += BinomialPoly::p(x, theta[0]) * BinomialPoly::dp(x, l) / BinomialPoly::p(x, l);
      return Vec::Constant(1, v);
    }
    return family.cumulant_grad(theta) - family.cumulant_grad(lambda);
  }
  Vec v = Vec::Zero(p);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rule_.size()); ++i)
    v += rule_.weights[i] * family.density(theta, rule_.node(i)) * scores_.row(i).transpose();
  return v;
}

double ScoreKernel::analytic_value(const Vec& a, const Vec& b) const {
  const auto& family = null_.family();
  const Vec& lambda = null_.mixing().supports().front();

  if (family.kind() == FamilyKind::Binomial2) {
    const double l = lambda[0];
    double f[3], g[3];
    for (int x = 0; x < 3; ++x) {
      f[x] = BinomialPoly::p(x, l);
      g[x] = BinomialPoly::dp(x, l) / f[x];
    }
    double ra[3], rb[3];
    for (int x = 0; x < 3; ++x) {
      ra[x] = BinomialPoly::diff(x, a[0], l) / f[x];
      rb[x] = BinomialPoly::diff(x, b[0], l) / f[x];
    }
    if (nuisance_dim_ > 0) {
      double info = 0.0, va = 0.0, vb = 0.0;
      for (int x = 0; x < 3; ++x) {
        info += f[x] * g[x] * g[x];
        va += f[x] * ra[x] * g[x];
        vb += f[x] * rb[x] * g[x];
      }
      for (int x = 0; x < 3; ++x) {
        ra[x] -= va / info * g[x];
        rb[x] -= vb / info * g[x];
      }
    }
    double c = 0.0;
    for (int x = 0; x < 3; ++x) c += f[x] * ra[x] * rb[x];
    return c;
  }

  if (family.kind() == FamilyKind::Normal) {
    const double u = (a - lambda).dot(b - lambda);
    return nuisance_dim_ > 0 ? expm1_minus_linear(u) : std::expm1(u);
  }

  // Scalar natural exponential family.
  const double sum = a[0] + b[0] - lambda[0];
  if (sum < family.theta_lo() || sum > family.theta_hi())
    throw NonfiniteVariance(family.name() + ": kernel integral diverges (a + b - lambda outside the parameter space)");
  const double exponent = family.cumulant(Vec::Constant(1, sum)) + family.cumulant(lambda) - family.cumulant(a) -
                          family.cumulant(b);
  double c = std::expm1(exponent);
  if (!std::isfinite(c)) throw NonfiniteVariance(family.name() + ": kernel value overflows");
  if (nuisance_dim_ > 0) {
    const double dl = family.cumulant_grad(lambda)[0];
    const double h = family.cumulant_hessian(lambda)(0, 0);
    c -= (family.cumulant_grad(a)[0] - dl) * (family.cumulant_grad(b)[0] - dl) / h;
  }
  return c;
}

DiagJet ScoreKernel::analytic_diag(const Vec& t) const {
  const auto& family = null_.family();
  const Vec& lambda = null_.mixing().supports().front();
  const int d = dim();
  DiagJet jet;

  if (family.kind() == FamilyKind::Binomial2) {
    const double l = lambda[0];
    double f[3], g[3], r[3], dr[3];
    for (int x = 0; x < 3; ++x) {
      f[x] = BinomialPoly::p(x, l);
      g[x] = BinomialPoly::dp(x, l) / f[x];
      r[x] = BinomialPoly::diff(x, t[0], l) / f[x];
      dr[x] = BinomialPoly::dp(x, t[0]) / f[x];
    }
    if (nuisance_dim_ > 0) {
      double info = 0.0, v = 0.0, dv = 0.0;
      for (int x = 0; x < 3; ++x) {
        info += f[x] * g[x] * g[x];
        v += f[x] * r[x] * g[x];
        dv += f[x] * dr[x] * g[x];
      }
      for (int x = 0; x < 3; ++x) {
        r[x] -= v / info * g[x];
        dr[x] -= dv / info * g[x];
      }
    }
    double c = 0.0, c1 = 0.0, c12 = 0.0;
    for (int x = 0; x < 3; ++x) {
      c += f[x] * r[x] * r[x];
      c1 += f[x] * dr[x] * r[x];
      c12 += f[x] * dr[x] * dr[x];
    }
    jet.value = c;
    jet.grad = Vec::Constant(1, c1);
    jet.mixed = Mat::Constant(1, 1, c12);
    if (c > 0.0) {
      Vec rv(3), drv(3), fv(3);
      for (int x = 0; x < 3; ++x) {
        rv[x] = r[x];
        drv[x] = dr[x];
        fv[x] = f[x];
      }
      jet.schur = projected_gram(drv, rv, fv);
    }
    return jet;
  }

  if (family.kind() == FamilyKind::Normal) {
    const Vec delta = t - lambda;
    const double u = delta.squaredNorm();
    const double eu = std::exp(u);
    const double em1 = std::expm1(u);
    if (nuisance_dim_ > 0) {
      jet.value = expm1_minus_linear(u);
      jet.grad = delta * em1;
      jet.mixed = em1 * Mat::Identity(d, d) + eu * delta * delta.transpose();
      if (u > 0.0) {
        const double radial = nuisance_radial(u);
        jet.schur = em1 * orthogonal_projector(delta) + radial * delta * delta.transpose();
        jet.schur_det = std::pow(em1, d - 1) * radial * u;
      }
    } else {
      jet.value = em1;
      jet.grad = eu * delta;
      jet.mixed = eu * (delta * delta.transpose() + Mat::Identity(d, d));
      if (u > 0.0) {
        const double radial = expm1_minus_linear(u) / (u * em1);
        jet.schur = eu * (orthogonal_projector(delta) + radial * delta * delta.transpose());
        jet.schur_det = std::pow(eu, d) * radial * u;
      }
    }
    return jet;
  }

  const double s = 2.0 * t[0] - lambda[0];
  if (s < family.theta_lo() || s > family.theta_hi())
    throw NonfiniteVariance(family.name() + ": kernel integral diverges (2 theta - lambda outside the parameter space)");
  const Vec sv = Vec::Constant(1, s);
  const double exponent = family.cumulant(sv) + family.cumulant(lambda) - 2.0 * family.cumulant(t);
  const double e = std::exp(exponent);
  const double dd = family.cumulant_grad(sv)[0] - family.cumulant_grad(t)[0];
  double c = std::expm1(exponent);
  double c1 = e * dd;
  double c12 = e * (dd * dd + family.cumulant_hessian(sv)(0, 0));
  if (nuisance_dim_ > 0) {
    const double h = family.cumulant_hessian(lambda)(0, 0);
    const double dl = family.cumulant_grad(t)[0] - family.cumulant_grad(lambda)[0];
    const double ht = family.cumulant_hessian(t)(0, 0);
    c -= dl * dl / h;
    c1 -= ht * dl / h;
    c12 -= ht * ht / h;
  }
  jet.value = c;
  jet.grad = Vec::Constant(1, c1);
  jet.mixed = Mat::Constant(1, 1, c12);
  if (nuisance_dim_ == 0 && c > 0.0)
    jet.schur = Mat::Constant(1, 1, e * (family.cumulant_hessian(sv)(0, 0) - dd * dd / c));
  return jet;
}

// ---------------------------------------------------------------------------
// Free functions

namespace {

NullModel with_full_estimation(const NullModel& null) {
  return null.estimation() == NullEstimation::None ? null.with_estimation(NullEstimation::WeightsAndSupports) : null;
}

ThetaDomain domain_around_supports(const NullModel& null) {
  const auto& supports = null.mixing().supports();
  const auto d = supports.front().size();
  Vec lo = supports.front();
  Vec hi = supports.front();
  for (const auto& s : supports) {
    lo = lo.cwiseMin(s);
    hi = hi.cwiseMax(s);
  }
  const auto& family = null.family();
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d); ++i) {
    lo[i] = std::max(lo[i] - 1.0, family.theta_lo());
    hi[i] = std::min(hi[i] + 1.0, family.theta_hi());
    if (!(lo[i] < hi[i])) hi[i] = lo[i] + 1.0;
  }
  return ThetaDomain::box(lo, hi);
}

}  // namespace

double cov_fixed(const NullModel& null, const ThetaDomain& domain, const Vec& a, const Vec& b,
                 KernelStrategy strategy) {
  return ScoreKernel(null, domain, KernelKind::Fixed, strategy)(a, b);
}

Vec cov_vector(const NullModel& null, const ThetaDomain& domain, const Vec& theta, KernelStrategy strategy) {
  return ScoreKernel(with_full_estimation(null), domain, KernelKind::Fixed, strategy).cov_vector(theta);
}

FisherInformation fisher_info(const NullModel& null, KernelStrategy strategy) {
  const NullModel full = with_full_estimation(null);
  ScoreKernel kernel(full, domain_around_supports(full), KernelKind::NuisanceAdjusted, strategy);
  return kernel.fisher();
}

double cov_nuisance(const NullModel& fitted, const ThetaDomain& domain, const Vec& a, const Vec& b,
                    KernelStrategy strategy) {
  return ScoreKernel(with_full_estimation(fitted), domain, KernelKind::NuisanceAdjusted, strategy)(a, b);
}

double corr(const CovarianceKernel& kernel, const Vec& a, const Vec& b, double eps_sing) {
  const double va = kernel.variance(a);
  const double vb = kernel.variance(b);
  if (!(va >= eps_sing) || !(vb >= eps_sing))
    throw SingularityError("correlation requested at a singular point of the kernel");
  return std::clamp(kernel(a, b) / std::sqrt(va * vb), -1.0, 1.0);
}

Mat corr_matrix(const CovarianceKernel& kernel, std::span<const Vec> points, double eps_sing) {
  Mat c = kernel.gram(points);
  const Vec diag = c.diagonal();
  if (!(diag.minCoeff() >= eps_sing)) throw SingularityError("correlation matrix includes a singular point");
  const Vec inv = diag.cwiseSqrt().cwiseInverse();
  c = inv.asDiagonal() * c * inv.asDiagonal();
  c = c.cwiseMax(-1.0).cwiseMin(1.0);
  c.diagonal().setOnes();
  return c;
}

}  // namespace tubescore
