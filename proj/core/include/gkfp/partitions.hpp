// Quadratic dyadic partition {theta_ell} in |p|_q and translation-invariant
// grid partition {psi_{m,ell,A}} in q, with certified identities and
// derivative bounds, plus the abstract localization inequalities.

#pragma once

#include "gkfp/operators.hpp"

#include <functional>

namespace gkfp {

/// Smooth bump exp(-1/((t-a)(b-t))) on (a,b), zero outside; derivatives up to
/// order 4 are analytic.
struct Bump {
  double a = 0.25, b = 4.0;
  double operator()(double t) const;
  double d1(double t) const;
  double d2(double t) const;
  /// value and derivatives 0..4 at once
  void derivs(double t, double out[5]) const;
};

/// Dyadic family theta_ell(x) = theta(2^{-2 ell} |p|_q^2) for ell >= 0 and
/// theta_tilde(4 |p|_q^2) for ell = -1, with
///   theta_tilde^2(4 t^2) + sum_{ell>=0} theta^2(2^{-2 ell} t^2) = 1.
struct DyadicPartition {
  int ell_max = 12;
  double t_max = 2048;  // 2^{ell_max - 1}

  // Profiles as functions of the squared argument s = |p|_q^2.
  double theta(double s) const;
  double theta_d1(double s) const;  // d theta / ds
  double theta_d2(double s) const;
  double theta_tilde(double s) const;
  double theta_tilde_d1(double s) const;
  double theta_tilde_d2(double s) const;

  /// Member ell as a function of s = |p|_q^2 (ell = -1 uses theta_tilde(4s)).
  double member(int ell, double s) const;
  double member_d1(int ell, double s) const;  // d/ds
  double member_d2(int ell, double s) const;
  /// analytic s-derivatives of the member, orders 0..4
  void member_derivs4(int ell, double s, double out[5]) const;

  double identity_sum(double s) const;  // sum of squared members, = 1

  /// Certified constants C_alpha with sup_p |d^alpha_p theta_ell| <= C_alpha 2^{-alpha ell},
  /// alpha = 0..4, measured on samples across all members.
  std::vector<double> deriv_bound_constants;

  Bump bump;
};

/// Builds a dyadic partition from a strictly positive bump on (1/4, 4);
/// theta = bump / sqrt(Theta) with Theta(s) = sum_l bump^2(4^-l s).
/// Throws when the bump is not bounded away from 0 on a dyadic fundamental
/// domain (normalization undefined).
DyadicPartition build_dyadic(int ell_max = 12, double t_max = 2048,
                             const Bump& bump = Bump{});

/// Grid family psi_{m,ell,A}(q) = psi((q - A 2^-ell m)/(A 2^-ell)) built from
/// a base profile w0 on (-1,1) with sum_m w0^2(x - m) > 0,
/// psi = w0 / sqrt(sum_m w0^2(. - m)).
struct GridPartition {
  double A = 1.0;
  int ell = 0;

  double psi(double x) const;     // normalized base profile
  double psi_d1(double x) const;
  double psi_d2(double x) const;

  double scale() const { return A * std::pow(2.0, -ell); }
  double member(int m, double q) const;
  double member_dq(int m, double q) const;
  double identity_sum(double q) const;  // sum_m psi^2(q - m) at base scale = 1

  /// Certified constants C_beta = sup |(A 2^-ell)^beta D^beta psi_{m,ell,A}|,
  /// beta = 0..3 (independent of m, ell, A).
  std::vector<double> deriv_bound_constants;

  Bump w0;
};

GridPartition build_grid(double A, int ell);

/// Appendix-C localization inequalities for a family {chi_l} with
/// sum chi_l^2 = 1 and a second-order operator P:
///   ||Pu||^2 <= 2 S1 + 4 S2 + 8 S3   and   ||Pu||^2 >= S1/2 - 2 S2 - 4 S3,
/// with S1 = sum ||P chi u||^2, S2 = sum ||[P,chi]chi u||^2,
/// S3 = sum ||[[P,chi],chi]chi u||^2. Also reports
/// r = 2(2 S2 + 4 S3)/S1 and, when r < 1, the two-sided equivalence with
/// constants (2+r) and (1-r)/2.
struct LocalizationReport {
  double norm_Pu_sq = 0;
  double s1 = 0, s2 = 0, s3 = 0;
  double r = 0;
  bool upper_ok = false, lower_ok = false;
  bool equiv_ok = false;  // meaningful when r < 1
  double triple_comm_residual = 0;
};

/// pre: triple commutators of P with the family members vanish (probed on the
/// first state against triple_tol, relative to the operator scale; a larger
/// residual signals an operator of order > 2 -> throws). The discrete
/// residual of a second-order stencil operator scales with the grid spacing,
/// so callers pass a representation-appropriate tolerance.
std::vector<LocalizationReport> localization_bounds(const FiberOperator& P,
                                                    const std::vector<Vector>& multipliers,
                                                    const std::vector<Vector>& states,
                                                    double triple_tol = 1e-12);

/// Smallest C on the search grid making the dyadic operator equivalence
///   (1/4) sum_l ||(kappa/b^2 + P - i lambda/b) theta_l u||^2
///      <= ||(kappa/b^2 + P - i lambda/b) u||^2
///      <= (5/2) sum_l || ... theta_l u||^2
/// hold with kappa_b = C (1+b^2) over all supplied states.
struct DyadicEquivalenceReport {
  double C = 0;
  double kappa_b = 0;
  bool ok = false;
  double lower_margin = 0;  // min over states of (mid - lower bound)
  double upper_margin = 0;  // min over states of (upper bound - mid)
};

DyadicEquivalenceReport dyadic_equivalence(const FiberOperator& P_b,
                                           const std::vector<Vector>& theta_members,
                                           const std::vector<Vector>& states, double b,
                                           double lambda,
                                           const std::vector<double>& C_search_grid);

/// Grid-partition error control: both displayed inequalities of the
/// q-localization
///   (1/2) sum_m ||L psi_m u||^2 - 2 E  <=  ||L u||^2  <=  2 sum_m ||L psi_m u||^2 + 4 E
/// with L = kappa_b/b^2 + P - i lambda/b and the commutator error term
/// E = sum_{m1,m2} ||[P,psi_m1] psi_m2 u||^2, which scales as 1/(A^2 b^2)
/// (slope -2 in a log-A fit). C_gpsi is E in the paper normalization
/// E <= C_gpsi 2^{4 ell} / (A b)^2 * sum_m ||psi_m u||^2.
struct GridErrorReport {
  double mid = 0;        // ||L u||^2
  double localized = 0;  // sum_m ||L psi_m u||^2
  double error_term = 0; // E
  double C_gpsi = 0;
  bool lower_ok = false, upper_ok = false;
};

GridErrorReport grid_error_bound(const FiberOperator& P_bl,
                                 const std::vector<Vector>& psi_members, const Vector& u,
                                 double kappa_b, double b, double lambda, int ell, double A);

}  // namespace gkfp
