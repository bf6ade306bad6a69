// The phase-space weight Psi, the Hormander metric g_Psi with its slowness
// and temperance constants, and the anisotropic Sobolev norms with their
// equivalences (flat metric, per-fiber diagonal calculus).

#pragma once

#include "gkfp/basis.hpp"
#include "gkfp/partitions.hpp"

namespace gkfp {

struct PhasePoint {
  RealVector q, p, xi, eta;  // equal length d
  static PhasePoint zero(int d);
};

/// Psi(X) = sqrt(1 + |xi|^2 + |p|^4 + |eta|^4); Psi >= 1 everywhere.
double psi_weight(const PhasePoint& X);

/// g_{Psi,X}(T) = |t_q|^2 + |t_xi|^2/Psi^2 + (|t_p|^2 + |t_eta|^2)/Psi.
double gpsi_form(const PhasePoint& X, const PhasePoint& T);

struct SlownessResult {
  bool premise = false;  // g_{Psi,X}(X'-X) <= 1/R^2
  bool pass = true;      // (Psi(X)/Psi(X'))^{+-1} <= R whenever premise holds
  double ratio = 1;      // max of the two ratios
};
/// pre: R >= 2^12.
SlownessResult slowness_check(const PhasePoint& X, const PhasePoint& Xp, double R);

struct TemperanceResult {
  bool pass = true;
  double lhs = 1;  // max (Psi/Psi')^{+-2}
  double rhs = 1;  // 64 (1+|X-X'|^2)^3
};
TemperanceResult temperance_check(const PhasePoint& X, const PhasePoint& Xp);

/// Per-fiber W^2 matrix at flat metric: C_g + |xi|^2 + C_g O^2 (diagonal in
/// the Hermite basis; commutes with O exactly).
FiberOperator w2_fiber(const RealVector& xi, double C_g, const HermiteBasis& basis);

/// Flat-metric field on (Fourier q-modes) x (Hermite p-modes): column k of
/// coef holds the Hermite coefficients of the fiber at xi(k).
struct FiberField {
  Matrix coef;       // (hermite mode, fiber)
  RealVector xi;     // fiber Fourier parameters
  int p_dims = 1;
  int cutoff = 0;

  double norm() const;
};

/// Squared-norm characterization (ii):
///   ||((-Delta_p + |p|^2)/2)^s u||^2 + || |D_q|^s u ||^2,
/// by diagonal functional calculus per fiber. pre: s >= 0.
double norm_ws(const FiberField& u, double s);

/// || O^{s1/2} (W^2)^{s2/2} u || via simultaneous diagonalization.
double norm_ws1s2(const FiberField& u, double s1, double s2, double C_g);

/// Monomial characterization (iv) for integer s = k:
///   sum_{|a| + (|b|+|c|)/2 <= k} || d_q^a p^b d_p^c u ||^2.
double norm_monomial(const FiberField& u, int k, const HermiteBasis& basis);

/// Weighted characterization (v) for integer s = k:
///   sum_{|a| + (N3+|c|)/2 <= k} || <p>^{N3} d_q^a d_p^c u ||^2.
double norm_weighted(const FiberField& u, int k, const HermiteBasis& basis);

/// Smallest power of 2 making w2_fiber >= 1 on the sampled xi grid.
double default_cg(const RealVector& xi_samples, const HermiteBasis& basis);

struct DyadicNormReport {
  double ratio = 1;   // ||u||^2_{Ws} / sum_l ||theta_l u||^2_{Ws}
  double c_lower = 1; // two-sided constant over the tested states
  double c_upper = 1;
};

/// Ratio of ||u||^2_{W^s} to sum_ell ||theta_ell(|p|^2) u||^2_{W^s} for
/// integer s in {0, 1, 2}. Both sides are evaluated by adaptive quadrature
/// with analytic member derivatives: truncated Galerkin multiplication by the
/// bump members converges too slowly in the Hermite cutoff, and their
/// derivative spikes defeat uniform grids.
DyadicNormReport dyadic_norm_equivalence(const std::vector<FiberField>& states, double s,
                                         const DyadicPartition& dyadic,
                                         const HermiteBasis& basis);

}  // namespace gkfp
