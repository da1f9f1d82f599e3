#include "tubescore/model.hpp"

#include "tubescore/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace tubescore {

namespace {

bool is_nonneg_integer(double x) { return x >= 0.0 && std::floor(x) == x && std::isfinite(x); }

double scalar(const Vec& v) { return v[0]; }

Vec vec1(double v) {
  Vec out(1);
  out[0] = v;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(int dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
  if (dim_ < 1) throw ValidationError("dataset dimension must be positive");
  if (values_.size() % static_cast<std::size_t>(dim_) != 0)
    throw ValidationError("dataset size is not a multiple of its dimension");
}

Dataset Dataset::scalar(std::vector<double> values) { return Dataset(1, std::move(values)); }

// ---------------------------------------------------------------------------
// DensityFamily

DensityFamily DensityFamily::binomial2() { return DensityFamily(FamilyKind::Binomial2, 1, nullptr); }

DensityFamily DensityFamily::normal(int dim) {
  if (dim < 1) throw ValidationError("normal family dimension must be positive");
  return DensityFamily(FamilyKind::Normal, dim, nullptr);
}

DensityFamily DensityFamily::exponential(ExponentialFamilySpec spec) {
  if (!spec.cumulant || !spec.cumulant_d1 || !spec.cumulant_d2 || !spec.log_base || !spec.sampler)
    throw ValidationError("exponential family needs cumulant, derivatives, base measure and sampler");
  if (!(spec.theta_lo < spec.theta_hi))
    throw ValidationError("exponential family parameter box is empty");
  return DensityFamily(FamilyKind::Exponential, 1,
                       std::make_shared<const ExponentialFamilySpec>(std::move(spec)));
}

DensityFamily DensityFamily::poisson() {
  ExponentialFamilySpec spec;
  spec.name = "poisson";
  spec.cumulant = [](double t) { return std::exp(t); };
  spec.cumulant_d1 = [](double t) { return std::exp(t); };
  spec.cumulant_d2 = [](double t) { return std::exp(t); };
  spec.log_base = [](double x) {
    return is_nonneg_integer(x) ? -std::lgamma(x + 1.0) : -std::numeric_limits<double>::infinity();
  };
  spec.sampler = [](std::mt19937_64& rng, double t) {
    return static_cast<double>(std::poisson_distribution<long>(std::exp(t))(rng));
  };
  spec.theta_from_mean = [](double m) { return std::log(m); };
  spec.discrete = true;
  spec.theta_lo = -30.0;
  spec.theta_hi = 30.0;
  return exponential(std::move(spec));
}

std::string DensityFamily::name() const {
  switch (kind_) {
    case FamilyKind::Binomial2:
      return "binomial2";
    case FamilyKind::Normal:
      return dim_ == 1 ? "normal" : "normal" + std::to_string(dim_);
    case FamilyKind::Exponential:
      return ef_->name;
  }
  return {};
}

bool DensityFamily::discrete() const {
  switch (kind_) {
    case FamilyKind::Binomial2:
      return true;
    case FamilyKind::Normal:
      return false;
    case FamilyKind::Exponential:
      return ef_->discrete;
  }
  return false;
}

double DensityFamily::theta_lo() const {
  switch (kind_) {
    case FamilyKind::Binomial2:
      return 0.0;
    case FamilyKind::Normal:
      return -std::numeric_limits<double>::infinity();
    case FamilyKind::Exponential:
      return ef_->theta_lo;
  }
  return 0.0;
}

double DensityFamily::theta_hi() const {
  switch (kind_) {
    case FamilyKind::Binomial2:
      return 1.0;
    case FamilyKind::Normal:
      return std::numeric_limits<double>::infinity();
    case FamilyKind::Exponential:
      return ef_->theta_hi;
  }
  return 0.0;
}

bool DensityFamily::in_parameter_box(const Vec& theta) const {
  if (theta.size() != dim_) return false;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta[i])) return false;
    if (theta[i] < theta_lo() || theta[i] > theta_hi()) return false;
  }
  return true;
}

void DensityFamily::require_parameter(const Vec& theta) const {
  if (in_parameter_box(theta)) return;
  std::ostringstream msg;
  msg << name() << ": parameter (";
  for (Eigen::Index i = 0; i < theta.size(); ++i) msg << (i ? ", " : "") << theta[i];
  msg << ") outside [" << theta_lo() << ", " << theta_hi() << "]";
  if (theta.size() != dim_) msg << " or of wrong dimension (expected " << dim_ << ")";
  throw DomainError(msg.str());
}

bool DensityFamily::in_support(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) return false;
  switch (kind_) {
    case FamilyKind::Binomial2:
      return x[0] == 0.0 || x[0] == 1.0 || x[0] == 2.0;
    case FamilyKind::Normal:
      return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
    case FamilyKind::Exponential:
      if (ef_->discrete) return is_nonneg_integer(x[0]);
      return std::isfinite(ef_->log_base(x[0]));
  }
  return false;
}

double DensityFamily::density(const Vec& theta, std::span<const double> x) const {
  require_parameter(theta);
  switch (kind_) {
    case FamilyKind::Binomial2: {
      const double t = scalar(theta);
      if (x[0] == 0.0) return (1.0 - t) * (1.0 - t);
      if (x[0] == 1.0) return 2.0 * t * (1.0 - t);
      if (x[0] == 2.0) return t * t;
      return 0.0;
    }
    case FamilyKind::Normal: {
      if (static_cast<int>(x.size()) != dim_) throw DomainError("normal: observation of wrong dimension");
      double q = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double r = x[i] - theta[i];
        q += r * r;
      }
      return std::exp(-0.5 * q - 0.5 * dim_ * std::log(2.0 * std::numbers::pi));
    }
    case FamilyKind::Exponential: {
      const double xv = x[0];
      if (ef_->discrete && !is_nonneg_integer(xv)) return 0.0;
      const double lb = ef_->log_base(xv);
      if (!std::isfinite(lb)) {
        if (ef_->discrete) return 0.0;
        throw DomainError(ef_->name + ": observation outside the support");
      }
      const double t = scalar(theta);
      return std::exp(t * xv - ef_->cumulant(t) + lb);
    }
  }
  return 0.0;
}

Vec DensityFamily::density_grad(const Vec& theta, std::span<const double> x) const {
  switch (kind_) {
    case FamilyKind::Binomial2: {
      require_parameter(theta);
      const double t = scalar(theta);
      if (x[0] == 0.0) return vec1(-2.0 * (1.0 - t));
      if (x[0] == 1.0) return vec1(2.0 - 4.0 * t);
      if (x[0] == 2.0) return vec1(2.0 * t);
      return vec1(0.0);
    }
    case FamilyKind::Normal: {
      const double p = density(theta, x);
      Vec g(dim_);
      for (int i = 0; i < dim_; ++i) g[i] = (x[i] - theta[i]) * p;
      return g;
    }
    case FamilyKind::Exponential: {
      const double p = density(theta, x);
      return vec1((x[0] - ef_->cumulant_d1(scalar(theta))) * p);
    }
  }
  return {};
}

Vec DensityFamily::log_density_grad(const Vec& theta, std::span<const double> x) const {
  const double p = density(theta, x);
  if (!(p > 0.0)) throw EvaluationError(name() + ": zero density in log-density gradient");
  return density_grad(theta, x) / p;
}

double DensityFamily::cumulant(const Vec& theta) const {
  switch (kind_) {
    case FamilyKind::Normal:
      return 0.5 * theta.squaredNorm();
    case FamilyKind::Exponential:
      return ef_->cumulant(scalar(theta));
    case FamilyKind::Binomial2:
      break;
  }
  throw ValidationError("binomial2 is not parameterized naturally; no cumulant");
}

Vec DensityFamily::cumulant_grad(const Vec& theta) const {
  switch (kind_) {
    case FamilyKind::Normal:
      return theta;
    case FamilyKind::Exponential:
      return vec1(ef_->cumulant_d1(scalar(theta)));
    case FamilyKind::Binomial2:
      break;
  }
  throw ValidationError("binomial2 is not parameterized naturally; no cumulant");
}

Mat DensityFamily::cumulant_hessian(const Vec& theta) const {
  switch (kind_) {
    case FamilyKind::Normal:
      return Mat::Identity(dim_, dim_);
    case FamilyKind::Exponential: {
      Mat h(1, 1);
      h(0, 0) = ef_->cumulant_d2(scalar(theta));
      return h;
    }
    case FamilyKind::Binomial2:
      break;
  }
  throw ValidationError("binomial2 is not parameterized naturally; no cumulant");
}

Vec DensityFamily::mean(const Vec& theta) const {
  switch (kind_) {
    case FamilyKind::Binomial2:
      return vec1(2.0 * scalar(theta));
    case FamilyKind::Normal:
      return theta;
    case FamilyKind::Exponential:
      return vec1(ef_->cumulant_d1(scalar(theta)));
  }
  return {};
}

Vec DensityFamily::parameter_from_mean(const Vec& m) const {
  switch (kind_) {
    case FamilyKind::Binomial2:
      return vec1(std::clamp(0.5 * m[0], 0.0, 1.0));
    case FamilyKind::Normal:
      return m;
    case FamilyKind::Exponential: {
      double t;
      if (ef_->theta_from_mean) {
        t = ef_->theta_from_mean(m[0]);
      } else {
        // phi' is increasing; safeguarded Newton from 0 (clipped into the box).
        t = std::clamp(0.0, ef_->theta_lo, ef_->theta_hi);
        for (int it = 0; it < 200; ++it) {
          const double step = (ef_->cumulant_d1(t) - m[0]) / ef_->cumulant_d2(t);
          const double next = std::clamp(t - step, ef_->theta_lo, ef_->theta_hi);
          if (std::abs(next - t) < 1e-14 * (1.0 + std::abs(t))) {
            t = next;
            break;
          }
          t = next;
        }
      }
      return vec1(std::clamp(t, ef_->theta_lo, ef_->theta_hi));
    }
  }
  return {};
}

void DensityFamily::draw(std::mt19937_64& rng, const Vec& theta, std::span<double> out) const {
  switch (kind_) {
    case FamilyKind::Binomial2:
      out[0] = static_cast<double>(std::binomial_distribution<int>(2, scalar(theta))(rng));
      return;
    case FamilyKind::Normal: {
      std::normal_distribution<double> z;
      for (int i = 0; i < dim_; ++i) out[i] = theta[i] + z(rng);
      return;
    }
    case FamilyKind::Exponential:
      out[0] = ef_->sampler(rng, scalar(theta));
      return;
  }
}

std::vector<double> DensityFamily::finite_support() const {
  if (kind_ == FamilyKind::Binomial2) return {0.0, 1.0, 2.0};
  return {};
}

bool DensityFamily::same_as(const DensityFamily& other) const {
  return kind_ == other.kind_ && dim_ == other.dim_ && ef_ == other.ef_;
}

Vec log_density_grad(const DensityFamily& family, const Vec& lambda, std::span<const double> x) {
  return family.log_density_grad(lambda, x);
}

// ---------------------------------------------------------------------------
// MixingDistribution

MixingDistribution::MixingDistribution(std::vector<Vec> supports, std::vector<double> weights)
    : supports_(std::move(supports)), weights_(std::move(weights)) {
  if (supports_.empty()) throw ValidationError("mixing distribution needs at least one support point");
  if (supports_.size() != weights_.size())
    throw ValidationError("mixing distribution: supports and weights differ in length");
  const auto d = supports_.front().size();
  for (const auto& s : supports_)
    if (s.size() != d || d == 0) throw ValidationError("mixing distribution: inconsistent support dimension");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw ValidationError("mixing distribution: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("mixing distribution: weights do not sum to 1");
  for (std::size_t i = 0; i < supports_.size(); ++i)
    for (std::size_t j = i + 1; j < supports_.size(); ++j)
      if (supports_[i] == supports_[j]) throw ValidationError("mixing distribution: duplicate support point");
  if (d == 1)
    for (std::size_t i = 1; i < supports_.size(); ++i)
      if (!(supports_[i][0] > supports_[i - 1][0]))
        throw ValidationError("mixing distribution: scalar supports must be strictly increasing");
}

MixingDistribution MixingDistribution::single(Vec support) {
  return MixingDistribution({std::move(support)}, {1.0});
}

MixingDistribution MixingDistribution::sorted(std::vector<Vec> supports, std::vector<double> weights) {
  if (supports.size() != weights.size())
    throw ValidationError("mixing distribution: supports and weights differ in length");
  if (!supports.empty() && supports.front().size() == 1) {
    std::vector<std::size_t> order(supports.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return supports[a][0] < supports[b][0]; });
    std::vector<Vec> s;
    std::vector<double> w;
    for (auto i : order) {
      s.push_back(supports[i]);
      w.push_back(weights[i]);
    }
    return MixingDistribution(std::move(s), std::move(w));
  }
  return MixingDistribution(std::move(supports), std::move(weights));
}

double mixture_density(const MixingDistribution& q, const DensityFamily& family, std::span<const double> x) {
  double total = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) total += q.weights()[j] * family.density(q.supports()[j], x);
  return total;
}

// ---------------------------------------------------------------------------
// NullModel

NullModel::NullModel(DensityFamily family, MixingDistribution mixing, NullEstimation estimation)
    : family_(std::move(family)), mixing_(std::move(mixing)), estimation_(estimation) {
  for (const auto& s : mixing_.supports()) family_.require_parameter(s);
}

NullModel NullModel::fixed(DensityFamily family, Vec lambda, NullEstimation estimation) {
  return NullModel(std::move(family), MixingDistribution::single(std::move(lambda)), estimation);
}

NullModel NullModel::mixture(DensityFamily family, MixingDistribution mixing, NullEstimation estimation) {
  return NullModel(std::move(family), std::move(mixing), estimation);
}

double NullModel::density(std::span<const double> x) const { return mixture_density(mixing_, family_, x); }

int NullModel::free_parameter_count() const {
  const int m = static_cast<int>(mixing_.size());
  switch (estimation_) {
    case NullEstimation::None:
      return 0;
    case NullEstimation::Weights:
      return m - 1;
    case NullEstimation::WeightsAndSupports:
      return (m - 1) + m * family_.param_dim();
  }
  return 0;
}

Vec NullModel::log_density_grad(std::span<const double> x) const {
  const int m = static_cast<int>(mixing_.size());
  const int d = family_.param_dim();
  Vec g(free_parameter_count());
  if (g.size() == 0) return g;
  const double f = density(x);
  if (!(f > 0.0)) throw EvaluationError("null model: zero density in log-density gradient");
  const double last = family_.density(mixing_.supports()[m - 1], x);
  for (int j = 0; j + 1 < m; ++j) g[j] = (family_.density(mixing_.supports()[j], x) - last) / f;
  if (estimation_ == NullEstimation::WeightsAndSupports) {
    for (int j = 0; j < m; ++j)
      g.segment(m - 1 + j * d, d) = mixing_.weights()[j] * family_.density_grad(mixing_.supports()[j], x) / f;
  }
  return g;
}

NullModel NullModel::with_mixing(MixingDistribution mixing) const {
  return NullModel(family_, std::move(mixing), estimation_);
}

NullModel NullModel::with_estimation(NullEstimation estimation) const {
  return NullModel(family_, mixing_, estimation);
}

// ---------------------------------------------------------------------------
// ThetaDomain

ThetaDomain::ThetaDomain(Shape shape, Vec lower, Vec upper, double radius)
    : shape_(shape), lower_(std::move(lower)), upper_(std::move(upper)), radius_(radius) {}

ThetaDomain ThetaDomain::box(Vec lower, Vec upper) {
  if (lower.size() == 0 || lower.size() != upper.size())
    throw ValidationError("parameter box: bounds must be nonempty and of equal dimension");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw ValidationError("parameter box: bounds must be finite");
    if (!(lower[i] < upper[i])) throw ValidationError("parameter box: lower bound must be below upper bound");
  }
  return ThetaDomain(Shape::Box, std::move(lower), std::move(upper), 0.0);
}

ThetaDomain ThetaDomain::interval(double lower, double upper) { return box(vec1(lower), vec1(upper)); }

ThetaDomain ThetaDomain::disk(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ValidationError("disk domain: radius must be positive");
  return ThetaDomain(Shape::Disk, Vec::Constant(2, -radius), Vec::Constant(2, radius), radius);
}

bool ThetaDomain::contains(const Vec& theta, double tol) const {
  if (theta.size() != lower_.size()) return false;
  if (shape_ == Shape::Disk) return theta.norm() <= radius_ + tol;
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    if (theta[i] < lower_[i] - tol || theta[i] > upper_[i] + tol) return false;
  return true;
}

// ---------------------------------------------------------------------------
// PerturbationModel and sampling

void PerturbationModel::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("perturbation size eta must lie in [0,1]");
  if (!perturbation.same_as(null.family()))
    throw ValidationError("null and perturbation densities must come from the same family");
  if (domain.dim() != perturbation.param_dim())
    throw ValidationError("parameter domain dimension differs from the family's parameter dimension");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over a combination of both words.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Dataset sample(const PerturbationModel& model, const Vec& theta0, std::size_t n, std::uint64_t seed) {
  model.validate();
  if (n < 1) throw ValidationError("sample size must be at least 1");
  const auto& family = model.perturbation;
  family.require_parameter(theta0);
  const int s = family.data_dim();
  const auto& q = model.null.mixing();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> cumulative(q.size());
  std::partial_sum(q.weights().begin(), q.weights().end(), cumulative.begin());

  std::vector<double> values(n * static_cast<std::size_t>(s));
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> out(values.data() + i * s, static_cast<std::size_t>(s));
    if (unif(rng) < model.eta) {
      family.draw(rng, theta0, out);
      continue;
    }
    const double u = unif(rng) * cumulative.back();
    auto j = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    j = std::min(j, q.size() - 1);
    family.draw(rng, q.supports()[j], out);
  }
  return Dataset(s, std::move(values));
}

}  // namespace tubescore
