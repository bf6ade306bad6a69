// Analytic base metrics, Christoffel symbols, normal-coordinate charts and
// the scaled transport coefficients f^{ij}_k entering the localized model
// operator.

#pragma once

#include "gkfp/basis.hpp"

#include <functional>
#include <optional>
#include <stdexcept>

namespace gkfp {

/// d x d x d array of first metric derivatives, dg[k](i,j) = d g_ij / d q^k.
using MetricDeriv = std::vector<RealMatrix>;

struct MetricField {
  int dim = 1;  // 1 or 2
  std::function<RealMatrix(const RealVector&)> g;
  std::function<MetricDeriv(const RealVector&)> dg;
  // d2g[k][l](i,j) = d^2 g_ij / dq^k dq^l
  std::function<std::vector<MetricDeriv>(const RealVector&)> d2g;
  std::optional<double> flat_outside;

  RealMatrix ginv(const RealVector& q) const;
  double p_norm_sq(const RealVector& q, const RealVector& p) const;  // |p|_q^2

  static MetricField flat(int dim);
  static MetricField sin1d(double eps);      // g = 1 + eps*sin(q)
  static MetricField expphi1d(double eps);   // g = exp(2*eps*sin(q))
  static MetricField torus2d(double eps);    // diag(1+eps*sin q1, 1+eps*cos q2)
  /// Presets: "flat", "flat2d", "sin1d:<eps>", "expphi1d:<eps>", "torus2d:<eps>".
  static MetricField from_preset(const std::string& name);
};

/// Extends a chart metric to all of R^d by blending smoothly to the identity
/// between |q - q0| = r0 and 2 r0; the blend radius is recorded in
/// flat_outside. Derivatives of the blended metric are supplied by high-order
/// finite differences of the blended g.
MetricField with_flat_outside(const MetricField& metric, const RealVector& q0, double r0);

/// Christoffel symbols Gamma^l_{jk} = (1/2) g^{la} (d_j g_ak + d_k g_aj - d_a g_jk).
/// Returned as gamma[l](j,k), symmetric in (j,k). Throws on singular g(q).
std::vector<RealMatrix> christoffel(const MetricField& metric, const RealVector& q);

/// Chart centered at q0 with pulled-back metric data. Invariants (certified
/// on construction): gt(0) = identity, dgt(0) = 0, both to 1e-8.
struct NormalChart {
  int dim = 1;
  RealVector center;
  double radius = 1.0;  // validity radius in chart coordinates
  std::function<RealVector(const RealVector&)> to_manifold;    // qt -> q
  std::function<RealVector(const RealVector&)> from_manifold;  // q -> qt
  std::function<RealMatrix(const RealVector&)> g;              // gt(qt)
  std::function<MetricDeriv(const RealVector&)> dg;

  RealMatrix ginv(const RealVector& qt) const;
  std::vector<RealMatrix> christoffel(const RealVector& qt) const;
};

struct ChartCertificate {
  double metric_error_constant = 0;      // C with |gt - I| <= C |qt|^2 on samples
  double christoffel_constant = 0;       // C' with |Gamma| <= C' |qt|
  double origin_metric_defect = 0;       // |gt(0) - I|
  double origin_dmetric_defect = 0;      // |dgt(0)|
};

/// Normal chart: d=1 by arclength reparameterization (adaptive quadrature,
/// tol 1e-10); d=2 by geodesic shooting (RK4, step control tol 1e-10).
/// Throws when the radius exceeds chart validity or a geodesic solve fails.
NormalChart normal_chart(const MetricField& metric, const RealVector& q0, double radius);

/// Linear rescaling chart qt = sqrt(g(q0)) (q - q0). Satisfies the
/// normal-coordinate estimates gt(0)=I, dgt(0)=0 iff dg(q0) = 0; throws
/// otherwise. Unlike the 1D arclength chart it keeps the quadratic metric
/// variation, so the scaled transport coefficients do not vanish.
NormalChart linear_chart(const MetricField& metric, const RealVector& q0, double radius);

ChartCertificate certify_chart(const NormalChart& chart, int samples_per_axis = 33);

/// Scaled transport coefficients f^{ij}_k(q, ell) of the localized model:
///   f_k^{ij}(q,ell) = 2^ell sum_{n'} g_{n'j}(2^-ell q)
///        [ d g^{kn'}/dq^i (2^-ell q) + sum_n Gamma^{n'}_{in}(2^-ell q) g^{nk}(2^-ell q) ].
struct ScaledCoeffs {
  int ell = 0;
  double A = 1.0;
  int dim = 1;
  double chat = 1.0;  // ball radius factor: certified over B(0, chat*A)
  std::function<double(const RealVector&, int, int, int)> f;  // (q; i,j,k)
  double sup_bound = 0;  // certified sup of |f| over the sampled ball
  double c1 = 0;         // reported constant with sup_bound <= c1 * A

  /// Freeze all components at one chart point (constant-coefficient model).
  std::vector<double> freeze(const RealVector& q) const;  // flat (i,j,k) array
  double freeze1(const RealVector& q) const;              // d=1 convenience
};

/// pre: 2^-ell * A within chart validity. Throws "chart too small" otherwise.
ScaledCoeffs scaled_coeffs(const NormalChart& chart, int ell, double A,
                           double chat = 1.0, int samples_per_axis = 65);

}  // namespace gkfp
