// Hermite and finite-difference representations of the elementary fiber
// operators (p_j, d/dp_j, number operator) from which the model operators
// are assembled.
//
// Conventions: orthonormal Hermite functions h_n with
//   p h_n   = sqrt((n+1)/2) h_{n+1} + sqrt(n/2) h_{n-1},
//   h_n'    = sqrt(n/2) h_{n-1} - sqrt((n+1)/2) h_{n+1},
// so that (-(d/dp)^2 + p^2)/2 h_n = (n + 1/2) h_n.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gkfp {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Gauss-Hermite rule for integrals over the real line, stored with the
/// "total" weights w_k so that  int f(p) dp ~= sum_k w_k f(x_k)  is exact
/// for f = (polynomial of degree <= 2*order-1) * exp(-p^2).
struct GaussHermite {
  RealVector nodes;
  RealVector weights;
  static GaussHermite make(int order);
};

/// Evaluate orthonormal Hermite functions h_0..h_{nmax-1} at x.
/// Returns a vector of length nmax.
RealVector hermite_values(int nmax, double x);

struct HermiteBasis {
  int p_dims = 1;   // d
  int cutoff = 2;   // N, modes 0..N-1 per axis
  GaussHermite quad;
  RealMatrix h_at_nodes;  // (node, mode) table, modes 0..N-1

  static HermiteBasis make(int d, int N);
  static HermiteBasis make(int d, int N, int quad_order);

  long dim() const;  // N^d

  // Row-major multi-index packing: flat = n_1*N^{d-1} + ... + n_d.
  long flat_index(std::span<const int> modes) const;
  std::vector<int> unpack(long flat) const;
};

struct PGrid {
  enum class Boundary { periodic, dirichlet };
  double half_width = 1.0;  // P
  int points = 8;           // M
  Boundary boundary = Boundary::dirichlet;

  static PGrid make(double P, int M, Boundary b = Boundary::dirichlet);
  double spacing() const { return 2.0 * half_width / points; }
  RealVector nodes() const;  // -P + k*spacing, k = 0..M-1
};

/// Which discretization a FiberOperator's matrix refers to.
struct RepInfo {
  enum class Kind { hermite, pgrid, hermite_qgrid, pgrid_qgrid };
  Kind kind = Kind::hermite;
  long dim = 0;
  int p_dims = 1;
  int cutoff = 0;        // Hermite modes per axis, when applicable
  double half_width = 0; // grid half width, when applicable
  int points = 0;        // p-grid points, when applicable
  int q_points = 0;      // q-grid points, when applicable
  double q_length = 0;   // q period, when applicable

  static RepInfo hermite(const HermiteBasis& b);
  static RepInfo pgrid(const PGrid& g);
};

/// A discretized fiber operator: complex square matrix tagged with its
/// representation, a symbolic label and the named parameters its formula uses.
struct FiberOperator {
  Matrix matrix;
  RepInfo rep;
  std::string label;
  std::map<std::string, double> params;

  long dim() const { return matrix.rows(); }
  void check() const;  // matrix dimension matches rep dimension
};

/// Number operator: diagonal with entries sum_j n_j + d/2.
FiberOperator op_number(const HermiteBasis& basis);

/// Multiplication by p_axis (0-based axis), real symmetric, tridiagonal per axis.
FiberOperator op_position(const HermiteBasis& basis, int axis);

/// d/dp_axis, real antisymmetric on the interior block.
FiberOperator op_deriv(const HermiteBasis& basis, int axis);

/// Complex Airy operator P_1(xi,lambda) = i(p*xi - lambda) - (1/2) Delta_p
/// with the 3-point Laplacian and the grid's boundary rule.
FiberOperator op_airy_grid(const PGrid& grid, double xi, double lambda);

/// Galerkin matrix of multiplication by f(p) in the Hermite basis (1D),
/// computed with the basis quadrature.
RealMatrix hermite_multiplier(const HermiteBasis& basis,
                              const std::function<double(double)>& f);

/// Evaluate a 1D Hermite coefficient vector on grid nodes, and project back.
/// Round trip is the identity on modes n <= N/2 to 1e-8 when P >= sqrt(2N)+4.
Vector to_grid(const Vector& coeffs, const HermiteBasis& basis, const PGrid& grid);
Vector to_hermite(const Vector& samples, const HermiteBasis& basis, const PGrid& grid);

/// Warning flag of to_grid/to_hermite: true when the grid window is too
/// narrow for the requested cutoff (P < sqrt(2N) + 4).
bool grid_too_narrow(const HermiteBasis& basis, const PGrid& grid);

}  // namespace gkfp
