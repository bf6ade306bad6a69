// The verification engine: extremal-constant computation for the displayed
// inequalities, resolvent norms, scaling-exponent fits, refined accretivity
// floors and the oscillator comparison.

#pragma once

#include "gkfp/operators.hpp"

namespace gkfp {

/// One inequality: L on the left, weighted R_i on the right. All operators
/// share one representation; weights >= 0.
struct QuadraticFormBundle {
  Matrix L;
  std::vector<Matrix> rhs;
  std::vector<double> weights;
};

struct MinConstantResult {
  double c = 0;        // C* = max_u sum_i w_i ||R_i u||^2 / ||L u||^2
  Vector maximizer;    // unit vector attaining C*
  bool regularized = false;
};

/// Largest generalized eigenvalue of (sum w_i R_i^* R_i, L^* L), computed by
/// Cholesky reduction of L^*L (+ eps when needed, flagged) and a deterministic
/// extremal eigenpair iteration. Throws when L^*L is indefinite after
/// regularization.
MinConstantResult min_constant(const QuadraticFormBundle& bundle, double eps = 1e-12);

struct EstimateReport {
  std::map<std::string, double> params;
  double empirical_constant = 0;
  double margin = 0;
  double refinement_drift = 0;
  bool pass = false;
};

/// Complex Airy bound: empirical C0(xi,lambda) with L = 1 + P_1(xi,lambda)
/// and R-list {(1/2)Delta_p, (p xi - lambda), (|xi|^{2/3}+1), (|lambda|/(1+|p|))^{2/3}}.
/// pre: the grid window covers the turning region |p xi - lambda| <= 10 (1+|xi|^{2/3});
/// a maximizer with > 1% mass in the outer 5% of the window flags the report.
EstimateReport airy_bound(double xi, double lambda, const PGrid& grid);

/// Grid adapted to the turning region of P_1(xi,lambda).
PGrid airy_window(double xi, double lambda, int points);

/// Euclidean subelliptic bound: empirical C with
///   L = h/b + Phat_{b,h,0} - i h lambda  and R-list
///   {(h/b + Ohat_{b,h}), (p.xi/b - h lambda), ((h|xi|/b)^{2/3} + h/b),
///    (h^2 |lambda| / (sqrt(hb) + |p|))^{2/3}}  (per-fiber representation).
EstimateReport euclid_bound(double b, double h, const RealVector& xi, double lambda,
                            const HermiteBasis& basis);

/// ||(op - z)^{-1}|| = 1 / sigma_min(op - z) by dense SVD.
/// Throws when sigma_min <= 1e-13 (numerically singular shift).
double resolvent_norm(const FiberOperator& op, Complex z);

struct FitResult {
  double slope = 0;
  double stderr_ = 0;
};
/// Least-squares slope of log y against log x. pre: >= 4 positive points.
FitResult exponent_fit(std::span<const double> xs, std::span<const double> ys);

/// Appendix-A oscillator comparison for SPD matrices g1, g2:
/// two-sided constant C_{g1,g2} and the difference bound
/// ||(O_{g2} - O_{g1}) u|| <= C_{g1} ||g2 - g1|| ||O_{g1} u||.
struct OscillatorCompareReport {
  double c_both = 1;      // max of the ratio and its reciprocal
  double c_forward = 1;   // max ||O_{g1} u|| / ||O_{g2} u||
  double c_backward = 1;
  double diff_constant = 0;  // empirical C_{g1} at this pair
};
OscillatorCompareReport oscillator_compare(const RealMatrix& g1, const RealMatrix& g2,
                                           const HermiteBasis& basis);

/// Refined accretivity floors for Phat_{b,h,f} on the shell 1/8 <= |p| <= 8
/// (smooth shell multiplier applied to test vectors):
///   Re <u, (h kappa_b/b + Phat - i h lambda) u>
///        >= ||u||^2 / (2^7 b^2) + (1/2) sum ||h D_p u||^2,
/// and the squared version with constants 2^-14 b^-4 and 2^-8 b^-2.
struct RefinedAccretivityReport {
  double margin_real = 0;     // min eigenvalue of the Hermitian-floor difference
  double margin_squared = 0;  // min eigenvalue of the squared-version difference
  double kappa_b = 0;
  bool pass = false;
};
RefinedAccretivityReport refined_accretivity(const GkfpParams& params, double A,
                                             double f_frozen, const PGrid& grid,
                                             double xi = 0);

/// Dense eigenvalues of O + i p.xi, sorted by real part.
std::vector<Complex> fiber_spectrum(const RealVector& xi, const HermiteBasis& basis);

/// First n_report eigenvalues of the 1D fiber matrix O + i p xi at assembly
/// cutoff N_assembly, by compensated quad-precision Newton on the
/// characteristic polynomial of the tridiagonal fiber matrix. The eigenvector
/// condition number grows like e^{xi^2} L_n(-2 xi^2), so a double-precision
/// dense eigensolve loses these eigenvalues entirely once that factor passes
/// 1/eps; the char-poly route in extended precision recovers them. Throws
/// when Newton cannot isolate a root near each target (truncation cutoff too
/// small for the requested window).
std::vector<double> fiber_spectrum_accurate(double xi, int n_report, int N_assembly);

/// Smallest assembly cutoff from {64,96,128,160,192,256} at which the first
/// n_report fiber eigenvalues are stable to stab_tol between consecutive
/// cutoffs.
int fiber_cutoff_for(double xi, int n_report, double stab_tol = 1e-9);

}  // namespace gkfp
