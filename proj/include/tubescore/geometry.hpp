#pragma once

#include "tubescore/covariance.hpp"

#include <vector>

namespace tubescore {

enum class SingularityClass { Flip, Removable };

struct Singularity {
  Vec location;
  SingularityClass cls = SingularityClass::Flip;
};

/// Topology of the normalized manifold over Theta.
struct ManifoldSummary {
  int d = 1;
  ThetaDomain domain = ThetaDomain::interval(0.0, 1.0);
  std::vector<Singularity> singularities;
  int segments = 1;  // d = 1
  int holes = 0;     // d = 2
  int euler = 1;
};

/// zeta_0..zeta_d of the tube series plus the pieces they are built from.
struct TubeConstants {
  int d = 1;
  Vec zeta;
  double kappa0 = 0.0;
  double ell0 = 0.0;
  int euler = 1;
  double euler_composite = 0.0;  // 2*pi*zeta_2, d = 2 only
};

struct GeometryOptions {
  double eps_sing = kSingularityTolerance;
  /// Central-difference step for kernels without analytic jets, relative to the box width.
  double fd_step = 1e-4;
  /// Exclusion radii around singular points, relative to the box width.
  double flip_exclusion = 1e-4;
  double removable_exclusion = 1e-3;
  /// Number of halvings of the exclusion radius fed to the extrapolation.
  int extrapolation_levels = 4;
  /// Relative tolerance handed to the adaptive quadrature.
  double quad_tolerance = 1e-12;
  /// Floor on that tolerance when the jets come from finite differences.
  double fd_quad_tolerance = 1e-8;
  /// Points of the diagonal scan looking for undeclared singularities (d = 1).
  int scan_points = 401;
};

/// Kernel value, gradient and Schur complement on the diagonal; falls back to
/// central differences when the kernel has no analytic jet.
DiagJet diagonal_jet(const CovarianceKernel& kernel, const Vec& t, const GeometryOptions& opts,
                     double width);

/// sqrt(det(C12 - g g^T / C)) / C^{d/2}, the volume density of the normalized manifold.
double kappa_density(const CovarianceKernel& kernel, const Vec& t, const GeometryOptions& opts, double width);

/// Singular points implied by the model: null supports inside Theta where the
/// kernel diagonal vanishes. Flip for fixed lambda or weights-only estimation,
/// Removable when supports are estimated too.
std::vector<Singularity> declared_singularities(const ScoreKernel& kernel, const GeometryOptions& opts = {});

/// Verifies declared singularities numerically and (d = 1) scans for undeclared
/// ones. ClassificationConflict when the leading order disagrees with a
/// declared class.
std::vector<Singularity> detect_singularities(const CovarianceKernel& kernel, const ThetaDomain& domain,
                                              const std::vector<Singularity>& declared,
                                              const GeometryOptions& opts = {});
std::vector<Singularity> detect_singularities(const ScoreKernel& kernel, const GeometryOptions& opts = {});

/// Numerical order check: Flip when C ~ t^2, Removable when C ~ t^4.
SingularityClass classify_singularity(const CovarianceKernel& kernel, const ThetaDomain& domain, const Vec& s,
                                      const GeometryOptions& opts = {});

ManifoldSummary summarize_manifold(const ThetaDomain& domain, std::vector<Singularity> singularities);

double exclusion_radius(const Singularity& s, const ThetaDomain& domain, const GeometryOptions& opts = {});

double kappa0(const CovarianceKernel& kernel, const ManifoldSummary& manifold, const GeometryOptions& opts = {});
double ell0(const CovarianceKernel& kernel, const ManifoldSummary& manifold, const GeometryOptions& opts = {});

TubeConstants tube_constants(const CovarianceKernel& kernel, const ManifoldSummary& manifold,
                             const GeometryOptions& opts = {});
/// Assembles constants from known pieces (d in {1, 2}).
TubeConstants make_constants(int d, double kappa0, double ell0, int euler = 1);

/// sum_t zeta_t / A_{d+1-t} P(chi2_{d+1-t} >= c^2), clamped to [0, 1].
double tail_probability(double c, const TubeConstants& constants);

/// Solves tail_probability(c) = alpha on [0.5, 10].
double critical_value(double alpha, const TubeConstants& constants);

}  // namespace tubescore
