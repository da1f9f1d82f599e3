#pragma once

#include "tubescore/model.hpp"

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace tubescore {

/// Diagonal of the kernel below which C(theta,theta) is treated as an exact zero.
inline constexpr double kSingularityTolerance = 1e-8;

enum class KernelKind { Fixed, NuisanceAdjusted };
enum class KernelStrategy { Auto, Analytic, Quadrature };

/// Kernel value and derivatives on the diagonal theta' = theta:
/// value = C, grad = grad_1 C, mixed = grad_1 grad_2^T C.
/// schur = mixed - grad grad^T / value when the kernel can form it without
/// cancellation (empty otherwise); it drives the curvature integrands.
/// schur_det is its determinant when that is available more accurately than
/// by expanding the matrix (NaN otherwise).
struct DiagJet {
  double value = 0.0;
  Vec grad;
  Mat mixed;
  Mat schur;
  double schur_det = std::numeric_limits<double>::quiet_NaN();
};

/// A covariance function C(theta, theta') on R^d.
class CovarianceKernel {
 public:
  virtual ~CovarianceKernel() = default;

  virtual int dim() const = 0;
  virtual KernelKind kind() const = 0;
  virtual double operator()(const Vec& a, const Vec& b) const = 0;
  virtual double variance(const Vec& a) const { return (*this)(a, a); }
  /// Derivatives on the diagonal from closed forms or quadrature of the
  /// differentiated integrand. Kernels without them return nullopt and callers
  /// fall back to finite differences.
  virtual std::optional<DiagJet> analytic_jet(const Vec&) const { return std::nullopt; }
  /// Matrix of C over a point set.
  virtual Mat gram(std::span<const Vec> points) const;
};

/// Kernel given by a plain function; no analytic derivatives.
class FunctionKernel final : public CovarianceKernel {
 public:
  using Fn = std::function<double(const Vec&, const Vec&)>;
  FunctionKernel(int dim, Fn fn, KernelKind kind = KernelKind::Fixed)
      : dim_(dim), fn_(std::move(fn)), kind_(kind) {}

  int dim() const override { return dim_; }
  KernelKind kind() const override { return kind_; }
  double operator()(const Vec& a, const Vec& b) const override { return fn_(a, b); }

 private:
  int dim_;
  Fn fn_;
  KernelKind kind_;
};

/// Fisher information I(lambda) over the estimated null coordinates.
struct FisherInformation {
  Mat matrix;
};

/// Discrete integration rule over the observation space: sum_k w_k h(x_k).
/// Exact summation for finite or truncated discrete supports, composite
/// Gauss-Legendre over a truncated range for normal families.
struct SupportRule {
  int dim = 1;
  std::vector<double> nodes;    // row-major, dim coordinates per node
  std::vector<double> weights;
  double truncation_bound = 0.0;  // bound on the neglected envelope mass

  std::size_t size() const { return weights.size(); }
  std::span<const double> node(std::size_t k) const {
    return {nodes.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

/// Builds a rule adequate for integrands psi(x;a) psi(x;b) / f(x) with a, b in
/// the domain and f the null density.
SupportRule make_support_rule(const NullModel& null, const ThetaDomain& domain);

/// Score covariance kernel C (fixed lambda) or C* (lambda estimated).
///
/// Analytic strategy: closed forms for single-density nulls (exponential
/// families, Binomial2). Quadrature strategy: any null, evaluated as the Gram
/// form sum_k w_k f_k r_a(x_k) r_b(x_k) where r is the score residual
/// psi/f - 1 projected off the span of the null scores. The Gram form keeps
/// C* nonnegative and free of cancellation near the support points.
class ScoreKernel final : public CovarianceKernel {
 public:
  ScoreKernel(NullModel null, ThetaDomain domain, KernelKind kind,
              KernelStrategy strategy = KernelStrategy::Auto);

  int dim() const override { return null_.family().param_dim(); }
  KernelKind kind() const override { return kind_; }
  double operator()(const Vec& a, const Vec& b) const override;
  double variance(const Vec& a) const override;
  std::optional<DiagJet> analytic_jet(const Vec& t) const override;
  Mat gram(std::span<const Vec> points) const override;

  const NullModel& null() const { return null_; }
  const ThetaDomain& domain() const { return domain_; }
  KernelStrategy strategy() const { return strategy_; }
  /// Number of estimated null coordinates projected out (0 for fixed kernels).
  int nuisance_dim() const { return nuisance_dim_; }

  /// C(theta|lambda) = integral of psi(x;theta) grad l(lambda|x).
  Vec cov_vector(const Vec& theta) const;
  const FisherInformation& fisher() const { return fisher_; }

 private:
  void build_quadrature();
  /// Residual r*(x_k) sqrt(w_k f_k) at every node, so kernel values are dot products.
  Vec residual(const Vec& theta) const;
  /// Derivative of the weighted residual with respect to theta (nodes x d).
  Mat residual_grad(const Vec& theta) const;
  std::size_t nearest_component(const Vec& theta) const;

  double analytic_value(const Vec& a, const Vec& b) const;
  DiagJet analytic_diag(const Vec& t) const;

  NullModel null_;
  ThetaDomain domain_;
  KernelKind kind_;
  KernelStrategy strategy_;
  int nuisance_dim_ = 0;
  FisherInformation fisher_;

  // Quadrature state.
  SupportRule rule_;
  Vec null_density_;        // f(x_k)
  Vec weighted_density_;    // w_k f(x_k)
  Vec sqrt_weight_;         // sqrt(w_k f(x_k))
  Mat scores_;              // grad l(lambda|x_k), nodes x p
  Mat basis_;               // orthonormal weighted basis of span{psi_j/f, grad psi_j/f}
};

/// C(theta, theta') with lambda fixed.
double cov_fixed(const NullModel& null, const ThetaDomain& domain, const Vec& a, const Vec& b,
                 KernelStrategy strategy = KernelStrategy::Auto);

/// C(theta|lambda0).
Vec cov_vector(const NullModel& null, const ThetaDomain& domain, const Vec& theta,
               KernelStrategy strategy = KernelStrategy::Auto);

/// I(lambda) over the null's estimated coordinates. DegenerateModel when singular.
FisherInformation fisher_info(const NullModel& null, KernelStrategy strategy = KernelStrategy::Auto);

/// C*(theta, theta') with lambda replaced by the fitted null.
double cov_nuisance(const NullModel& fitted, const ThetaDomain& domain, const Vec& a, const Vec& b,
                    KernelStrategy strategy = KernelStrategy::Auto);

/// rho(a,b) = C(a,b)/sqrt(C(a,a) C(b,b)), clamped to [-1,1]. SingularityError
/// when either diagonal is below eps_sing.
double corr(const CovarianceKernel& kernel, const Vec& a, const Vec& b,
            double eps_sing = kSingularityTolerance);

/// Correlation matrix over a point set; same contract as corr().
Mat corr_matrix(const CovarianceKernel& kernel, std::span<const Vec> points,
                double eps_sing = kSingularityTolerance);

}  // namespace tubescore
