// Assembly of the model operator families: the vertical oscillator, the
// Euclidean fiber model, the dyadically scaled operator on a periodic q-grid,
// scaling/rotation reductions, quasimodes and multiplier commutators.

#pragma once

#include "gkfp/basis.hpp"
#include "gkfp/geometry.hpp"

#include <optional>

namespace gkfp {

struct GkfpParams {
  double b = 1.0;        // friction parameter > 0
  double kappa_b = 0.0;  // accretivity shift >= 0
  double lambda = 0.0;   // spectral parameter
  double h = 1.0;        // auxiliary scale

  /// h derived from the dyadic index: h * b * 2^{2 ell} = 1 exactly.
  static GkfpParams from_ell(double b, int ell);
};

/// q-representation: either a finite list of Fourier parameters xi (per-fiber
/// mode) or a periodic grid of M_q points on a circle of given length.
struct QGrid {
  int points = 8;
  double length = 2.0 * 3.14159265358979323846;
  RealVector nodes() const;
  /// Fourier mode xi_k = 2 pi k / length for k = -M/2+1 .. M/2-1 (Nyquist row
  /// of the spectral derivative is zeroed).
  double xi(int k) const;
};

struct QRep {
  enum class Mode { per_fiber, periodic_grid };
  Mode mode = Mode::per_fiber;
  std::vector<RealVector> xi_list;  // per-fiber
  QGrid grid;                       // periodic grid
};

/// Spectral (Fourier) differentiation matrix on the periodic q-grid; real
/// antisymmetric, diagonalized by the DFT with eigenvalues i*xi_k.
RealMatrix spectral_derivative(const QGrid& grid);

/// Centered second-order difference on the periodic q-grid (used by the
/// stencil-order commutator checks).
RealMatrix fd2_derivative(const QGrid& grid);

enum class QDeriv { spectral, fd2 };

/// Vertical oscillator at base point q:
///   O = (1/2) ( -g_ij(q) d/dp_i d/dp_j + g^ij(q) p_i p_j )
/// in the Hermite basis. Hermitian; spectrum bounded below by d/2.
FiberOperator assemble_vertical(const HermiteBasis& basis, const MetricField& metric,
                                const RealVector& q);

/// Same contraction with explicit coefficient matrices (used by the
/// oscillator-comparison estimates).
FiberOperator assemble_oscillator(const HermiteBasis& basis, const RealMatrix& g_cov);

/// Euclidean fiber model
///   Phat_{b,h,f} = (1/2) sum_i (h D_{p_i})^2 + |p|^2/(2 b^2) + (i/b) p.xi
///                  + h f^{ij}_k p_i p_j d/dp_k
/// with f frozen at a chart point (empty = omitted term).
FiberOperator assemble_euclid_fiber(const GkfpParams& params, const RealVector& xi,
                                    const std::vector<double>& f_frozen,
                                    const HermiteBasis& basis);

/// Which p-representation assemble_scaled uses.
struct PRep {
  enum class Kind { hermite, grid };
  Kind kind = Kind::hermite;
  HermiteBasis hermite;
  PGrid grid;
  static PRep make_hermite(const HermiteBasis& b);
  static PRep make_grid(const PGrid& g);
};

/// Scaled operator on (q-grid) x (p-representation), d = metric.dim:
///   P_{b,ell} = O_ell / b^2 + Y_ell / b,
///   O_ell = (1/2)(2^{-2l} g_ij D_{p_i} D_{p_j} + 2^{2l} g^ij p_i p_j),
///   Y_ell = 2^l g^ij p_j ( d/dq^i + Gamma^m_{ik} p_m d/dp_k ).
/// Throws when the total dimension exceeds dim_cap.
FiberOperator assemble_scaled(const GkfpParams& params, int ell, const MetricField& metric,
                              const QGrid& qgrid, const PRep& prep,
                              QDeriv qderiv = QDeriv::spectral, long dim_cap = 1 << 22);

/// Oscillator / transport pieces of the scaled operator (same representation).
FiberOperator assemble_scaled_oscillator(int ell, const MetricField& metric,
                                         const QGrid& qgrid, const PRep& prep);
FiberOperator assemble_scaled_transport(int ell, const MetricField& metric,
                                        const QGrid& qgrid, const PRep& prep,
                                        QDeriv qderiv = QDeriv::spectral);

/// Unitary-scaling certificate: spectrum(Phat_{b,h,0}) = (h/b) spectrum(Phat_{1,1,0})
/// after p -> sqrt(hb) p, xi -> sqrt(b/h) xi.
struct ScalingCertificate {
  double b = 1, h = 1;
  double p_scale = 1;         // sqrt(h*b)
  double spectral_ratio = 1;  // h/b
  double xi_scale = 1;        // sqrt(b/h)
};
ScalingCertificate scaling_reduce(double b, double h);

/// Matrix of Phat_{b,h,0}(xi) in the p -> sqrt(hb) p scaled Hermite basis;
/// algebraically equals (h/b) * [O + i (xi*sqrt(b/h)) . p].
FiberOperator assemble_euclid_fiber_scaled_basis(const GkfpParams& params,
                                                 const RealVector& xi,
                                                 const HermiteBasis& basis);

/// Orthogonal matrix R with R^T xi = (|xi|, 0, ..., 0); identity for xi = 0.
RealMatrix rotate_fiber(const RealVector& xi);

/// Conjugated rotated fiber operator O + i p_1 |xi|.
FiberOperator assemble_rotated_fiber(double xi_norm, const HermiteBasis& basis);

/// Quasimode u(q,p) = phi(|p|^2_q), normalized; reports transport and
/// oscillator residuals. Representation: q-grid x Hermite.
struct QuasimodeReport {
  double norm_u = 1;
  double norm_Yu = 0;        // ||Y u||
  double norm_Ou = 0;        // ||O u||
  double norm_Pplus = 0;     // ||P_{+,b} u||
  double norm_Pminus = 0;    // ||P_{-,b} u||
};
QuasimodeReport quasimode(const MetricField& metric,
                          const std::function<double(double)>& phi, double b,
                          const QGrid& qgrid, const HermiteBasis& basis);

/// Quasimode state vector in the q-grid x Hermite representation.
Vector quasimode_state(const MetricField& metric,
                       const std::function<double(double)>& phi,
                       const QGrid& qgrid, const HermiteBasis& basis);

/// [A, m] with m acting diagonally (sampled multiplier). Double commutators
/// by iteration. Throws on representation mismatch.
FiberOperator commutator(const FiberOperator& op, const Vector& multiplier);

/// Convenience: commutator applied to a vector without forming the matrix.
Vector commutator_apply(const FiberOperator& op, const Vector& multiplier, const Vector& u);

}  // namespace gkfp
