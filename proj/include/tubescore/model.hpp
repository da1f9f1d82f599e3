#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tubescore {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// n observations of dimension s, stored row-major.
class Dataset {
 public:
  Dataset() = default;
  Dataset(int dim, std::vector<double> values);

  static Dataset scalar(std::vector<double> values);

  int dim() const { return dim_; }
  std::size_t size() const { return values_.size() / static_cast<std::size_t>(dim_); }
  bool empty() const { return values_.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  const std::vector<double>& values() const { return values_; }

 private:
  int dim_ = 1;
  std::vector<double> values_;
};

/// Scalar natural exponential family psi(x;theta) = exp(theta*x - phi(theta)) b(x).
struct ExponentialFamilySpec {
  std::string name;
  std::function<double(double)> cumulant;
  std::function<double(double)> cumulant_d1;
  std::function<double(double)> cumulant_d2;
  /// log b(x); -inf off the support.
  std::function<double(double)> log_base;
  /// Draws one observation from psi(.;theta).
  std::function<double(std::mt19937_64&, double)> sampler;
  /// Optional closed-form inverse of the mean map phi'. Newton is used otherwise.
  std::function<double(double)> theta_from_mean;
  /// Nonnegative-integer support when true, the real line otherwise.
  bool discrete = false;
  double theta_lo = -std::numeric_limits<double>::infinity();
  double theta_hi = std::numeric_limits<double>::infinity();
};

enum class FamilyKind { Binomial2, Normal, Exponential };

/// A parametric density family psi(x;theta). Immutable; cheap to copy.
class DensityFamily {
 public:
  static DensityFamily binomial2();
  /// Normal with mean theta in R^dim and identity covariance.
  static DensityFamily normal(int dim = 1);
  static DensityFamily poisson();
  static DensityFamily exponential(ExponentialFamilySpec spec);

  FamilyKind kind() const { return kind_; }
  std::string name() const;
  int param_dim() const { return dim_; }
  int data_dim() const { return dim_; }
  bool discrete() const;
  /// True when the kernel has the closed form exp[phi(a+b-l)+phi(l)-phi(a)-phi(b)]-1.
  bool has_natural_cumulant() const { return kind_ != FamilyKind::Binomial2; }

  bool in_parameter_box(const Vec& theta) const;
  /// Throws DomainError when theta has the wrong size or lies outside the box.
  void require_parameter(const Vec& theta) const;
  double theta_lo() const;
  double theta_hi() const;

  double density(const Vec& theta, std::span<const double> x) const;
  /// Gradient of psi(x;theta) with respect to theta.
  Vec density_grad(const Vec& theta, std::span<const double> x) const;
  /// Gradient of log psi(x;theta); EvaluationError where the density is zero.
  Vec log_density_grad(const Vec& theta, std::span<const double> x) const;

  double cumulant(const Vec& theta) const;
  Vec cumulant_grad(const Vec& theta) const;
  Mat cumulant_hessian(const Vec& theta) const;

  Vec mean(const Vec& theta) const;
  Vec parameter_from_mean(const Vec& mean) const;

  void draw(std::mt19937_64& rng, const Vec& theta, std::span<double> out) const;

  /// The support values when the support is finite ({0,1,2} for Binomial2), empty otherwise.
  std::vector<double> finite_support() const;
  /// Checks whether x belongs to the support (continuous families: finite coordinates).
  bool in_support(std::span<const double> x) const;

  bool same_as(const DensityFamily& other) const;

 private:
  DensityFamily(FamilyKind kind, int dim, std::shared_ptr<const ExponentialFamilySpec> ef)
      : kind_(kind), dim_(dim), ef_(std::move(ef)) {}

  FamilyKind kind_;
  int dim_ = 1;
  std::shared_ptr<const ExponentialFamilySpec> ef_;
};

/// Discrete mixing distribution Q_m: support points and weights.
class MixingDistribution {
 public:
  /// Validates: weights nonnegative summing to 1 (1e-12), supports distinct and,
  /// for scalar supports, strictly increasing.
  MixingDistribution(std::vector<Vec> supports, std::vector<double> weights);

  static MixingDistribution single(Vec support);
  /// Sorts scalar supports ascending (carrying weights) before validating.
  static MixingDistribution sorted(std::vector<Vec> supports, std::vector<double> weights);

  std::size_t size() const { return supports_.size(); }
  int dim() const { return static_cast<int>(supports_.front().size()); }
  const std::vector<Vec>& supports() const { return supports_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<Vec> supports_;
  std::vector<double> weights_;
};

double mixture_density(const MixingDistribution& q, const DensityFamily& family,
                       std::span<const double> x);

enum class NullEstimation { None, Weights, WeightsAndSupports };

/// Null density f(.;lambda): a fixed density or a finite mixture of one family,
/// with a flag saying which parts of lambda are estimated from data.
class NullModel {
 public:
  static NullModel fixed(DensityFamily family, Vec lambda,
                         NullEstimation estimation = NullEstimation::None);
  static NullModel mixture(DensityFamily family, MixingDistribution mixing,
                           NullEstimation estimation = NullEstimation::None);

  const DensityFamily& family() const { return family_; }
  const MixingDistribution& mixing() const { return mixing_; }
  NullEstimation estimation() const { return estimation_; }
  std::size_t components() const { return mixing_.size(); }

  double density(std::span<const double> x) const;

  /// Number of estimated coordinates: (m-1) free weights, plus m*d supports when
  /// supports are estimated.
  int free_parameter_count() const;
  /// Gradient of log f(x;lambda) over the free coordinates. The last weight is
  /// 1 - sum(others), so weight coordinates read (psi_j - psi_m)/f.
  Vec log_density_grad(std::span<const double> x) const;

  NullModel with_mixing(MixingDistribution mixing) const;
  NullModel with_estimation(NullEstimation estimation) const;

 private:
  NullModel(DensityFamily family, MixingDistribution mixing, NullEstimation estimation);

  DensityFamily family_;
  MixingDistribution mixing_;
  NullEstimation estimation_;
};

/// Log density gradient of a single family member.
Vec log_density_grad(const DensityFamily& family, const Vec& lambda, std::span<const double> x);

/// Compact parameter region Theta: an axis-aligned box or an origin-centred disk (d = 2).
class ThetaDomain {
 public:
  enum class Shape { Box, Disk };

  static ThetaDomain box(Vec lower, Vec upper);
  static ThetaDomain interval(double lower, double upper);
  static ThetaDomain disk(double radius);

  Shape shape() const { return shape_; }
  int dim() const { return static_cast<int>(lower_.size()); }
  /// Bounding box (the disk's enclosing square for disks).
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  double radius() const { return radius_; }
  double width(int axis) const { return upper_[axis] - lower_[axis]; }
  double max_width() const { return (upper_ - lower_).maxCoeff(); }
  bool contains(const Vec& theta, double tol = 0.0) const;

 private:
  ThetaDomain(Shape shape, Vec lower, Vec upper, double radius);

  Shape shape_;
  Vec lower_;
  Vec upper_;
  double radius_ = 0.0;
};

/// (1 - eta) f(.;lambda) + eta psi(.;theta) over a search domain Theta.
struct PerturbationModel {
  NullModel null;
  DensityFamily perturbation;
  ThetaDomain domain;
  double eta = 0.0;

  /// Throws ValidationError on eta outside [0,1] or family mismatch.
  void validate() const;
};

/// n i.i.d. draws from (1-eta) f + eta psi(.;theta0). Deterministic given seed.
Dataset sample(const PerturbationModel& model, const Vec& theta0, std::size_t n, std::uint64_t seed);

/// Derives an independent stream seed from (seed, index); used for per-replicate RNGs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace tubescore
