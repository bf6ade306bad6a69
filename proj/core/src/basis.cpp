#include "gkfp/basis.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace gkfp {

RealVector hermite_values(int nmax, double x) {
  RealVector h(nmax);
  if (nmax <= 0) return h;
  // The recurrence runs on values scaled by exp(-log_h0 - shift*LOG_RES), so
  // large |x| (where h_0 itself underflows) stays representable.
  const double log_h0 = -0.25 * std::log(M_PI) - 0.5 * x * x;
  const double RES = 1e250, LOG_RES = std::log(1e250);
  double prev = 1.0, cur = std::sqrt(2.0) * x;
  long shift = 0;
  auto emit = [&](int n, double s) {
    if (s == 0.0) {
      h(n) = 0.0;
      return;
    }
    const double tot = log_h0 + shift * LOG_RES + std::log(std::abs(s));
    h(n) = (tot < -744.0) ? 0.0 : ((s > 0) ? std::exp(tot) : -std::exp(tot));
  };
  emit(0, prev);
  if (nmax == 1) return h;
  emit(1, cur);
  for (int n = 1; n + 1 < nmax; ++n) {
    double next = std::sqrt(2.0 / (n + 1.0)) * x * cur - std::sqrt(n / (n + 1.0)) * prev;
    if (std::abs(next) > RES) {
      next /= RES;
      cur /= RES;
      shift += 1;
    }
    emit(n + 1, next);
    prev = cur;
    cur = next;
  }
  return h;
}

GaussHermite GaussHermite::make(int order) {
  if (order < 1) throw std::invalid_argument("GaussHermite: order must be >= 1");
  // Nodes from the Jacobi matrix (Golub-Welsch); the eigenvector method for
  // the weights underflows at large order, so the total weights come from the
  // Christoffel function with orthonormal Hermite *functions*, which are O(1):
  //   w_k = 1 / sum_{j<order} h_j(x_k)^2.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double beta = std::sqrt(k / 2.0);
    J(k, k - 1) = beta;
    J(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussHermite q;
  q.nodes = es.eigenvalues();
  q.weights.resize(order);
  for (int k = 0; k < order; ++k) {
    const RealVector h = hermite_values(order, q.nodes(k));
    const double den = h.squaredNorm();
    if (!(den > 0)) throw std::runtime_error("GaussHermite: node weight underflow; reduce order");
    q.weights(k) = 1.0 / den;
  }
  return q;
}

HermiteBasis HermiteBasis::make(int d, int N) { return make(d, N, 2 * N); }

HermiteBasis HermiteBasis::make(int d, int N, int quad_order) {
  if (d < 1) throw std::invalid_argument("HermiteBasis: d must be >= 1");
  if (N < 2) throw std::invalid_argument("HermiteBasis: cutoff must be >= 2");
  if (quad_order < 2 * N) throw std::invalid_argument("HermiteBasis: quadrature order must be >= 2N");
  HermiteBasis b;
  b.p_dims = d;
  b.cutoff = N;
  b.quad = GaussHermite::make(quad_order);
  b.h_at_nodes.resize(quad_order, N);
  for (int k = 0; k < quad_order; ++k) {
    b.h_at_nodes.row(k) = hermite_values(N, b.quad.nodes(k)).transpose();
  }
  return b;
}

long HermiteBasis::dim() const {
  long n = 1;
  for (int j = 0; j < p_dims; ++j) n *= cutoff;
  return n;
}

long HermiteBasis::flat_index(std::span<const int> modes) const {
  long idx = 0;
  for (int j = 0; j < p_dims; ++j) idx = idx * cutoff + modes[j];
  return idx;
}

std::vector<int> HermiteBasis::unpack(long flat) const {
  std::vector<int> modes(p_dims);
  for (int j = p_dims - 1; j >= 0; --j) {
    modes[j] = static_cast<int>(flat % cutoff);
    flat /= cutoff;
  }
  return modes;
}

PGrid PGrid::make(double P, int M, Boundary b) {
  if (!(P > 0)) throw std::invalid_argument("PGrid: half_width must be positive");
  if (M < 8) throw std::invalid_argument("PGrid: need at least 8 points");
  return PGrid{P, M, b};
}

RealVector PGrid::nodes() const {
  RealVector x(points);
  const double s = spacing();
  for (int k = 0; k < points; ++k) x(k) = -half_width + k * s;
  return x;
}

RepInfo RepInfo::hermite(const HermiteBasis& b) {
  RepInfo r;
  r.kind = Kind::hermite;
  r.dim = b.dim();
  r.p_dims = b.p_dims;
  r.cutoff = b.cutoff;
  return r;
}

RepInfo RepInfo::pgrid(const PGrid& g) {
  RepInfo r;
  r.kind = Kind::pgrid;
  r.dim = g.points;
  r.p_dims = 1;
  r.half_width = g.half_width;
  r.points = g.points;
  return r;
}

void FiberOperator::check() const {
  if (matrix.rows() != matrix.cols() || matrix.rows() != rep.dim)
    throw std::runtime_error("FiberOperator: matrix dimension does not match representation");
}

namespace {

// 1D tables; tensorization lifts them per axis.
RealMatrix position_1d(int N) {
  RealMatrix m = RealMatrix::Zero(N, N);
  for (int n = 0; n + 1 < N; ++n) {
    const double c = std::sqrt((n + 1) / 2.0);
    m(n, n + 1) = c;
    m(n + 1, n) = c;
  }
  return m;
}

RealMatrix deriv_1d(int N) {
  RealMatrix m = RealMatrix::Zero(N, N);
  for (int n = 0; n + 1 < N; ++n) {
    const double c = std::sqrt((n + 1) / 2.0);
    m(n, n + 1) = c;    // <h_n | d/dp | h_{n+1}> = sqrt((n+1)/2)
    m(n + 1, n) = -c;   // <h_{n+1} | d/dp | h_n> = -sqrt((n+1)/2)
  }
  return m;
}

// Lift a 1D mode-space matrix to axis `axis` of the d-fold tensor basis.
RealMatrix lift_axis(const RealMatrix& m1, int d, int N, int axis) {
  const long dim = static_cast<long>(std::pow(static_cast<double>(N), d) + 0.5);
  RealMatrix out = RealMatrix::Zero(dim, dim);
  // Strides of row-major packing: axis j has stride N^{d-1-j}.
  long stride = 1;
  for (int j = d - 1; j > axis; --j) stride *= N;
  const long outer = dim / (stride * N);
  for (long o = 0; o < outer; ++o) {
    for (long inner = 0; inner < stride; ++inner) {
      const long base = o * stride * N + inner;
      for (int a = 0; a < N; ++a)
        for (int c = 0; c < N; ++c)
          if (m1(a, c) != 0.0) out(base + a * stride, base + c * stride) = m1(a, c);
    }
  }
  return out;
}

}  // namespace

FiberOperator op_number(const HermiteBasis& basis) {
  FiberOperator op;
  op.rep = RepInfo::hermite(basis);
  op.label = "number";
  Vector diag(basis.dim());
  for (long i = 0; i < basis.dim(); ++i) {
    const auto modes = basis.unpack(i);
    double v = basis.p_dims / 2.0;
    for (int m : modes) v += m;
    diag(i) = v;
  }
  op.matrix = diag.asDiagonal();
  return op;
}

FiberOperator op_position(const HermiteBasis& basis, int axis) {
  if (axis < 0 || axis >= basis.p_dims) throw std::invalid_argument("op_position: axis out of range");
  FiberOperator op;
  op.rep = RepInfo::hermite(basis);
  op.label = "position";
  op.params["axis"] = axis;
  op.matrix = lift_axis(position_1d(basis.cutoff), basis.p_dims, basis.cutoff, axis).cast<Complex>();
  return op;
}

FiberOperator op_deriv(const HermiteBasis& basis, int axis) {
  if (axis < 0 || axis >= basis.p_dims) throw std::invalid_argument("op_deriv: axis out of range");
  FiberOperator op;
  op.rep = RepInfo::hermite(basis);
  op.label = "deriv";
  op.params["axis"] = axis;
  op.matrix = lift_axis(deriv_1d(basis.cutoff), basis.p_dims, basis.cutoff, axis).cast<Complex>();
  return op;
}

FiberOperator op_airy_grid(const PGrid& grid, double xi, double lambda) {
  const int M = grid.points;
  const double s = grid.spacing();
  const double inv_s2 = 1.0 / (s * s);
  const RealVector p = grid.nodes();
  Matrix m = Matrix::Zero(M, M);
  for (int k = 0; k < M; ++k) {
    m(k, k) = Complex(inv_s2, p(k) * xi - lambda);  // -1/2 * (-2/s^2), i(p xi - lambda)
    const int prev = k - 1, next = k + 1;
    if (prev >= 0) m(k, prev) = -0.5 * inv_s2;
    if (next < M) m(k, next) = -0.5 * inv_s2;
  }
  if (grid.boundary == PGrid::Boundary::periodic) {
    m(0, M - 1) += -0.5 * inv_s2;
    m(M - 1, 0) += -0.5 * inv_s2;
  }
  FiberOperator op;
  op.rep = RepInfo::pgrid(grid);
  op.label = "airy";
  op.params["xi"] = xi;
  op.params["lambda"] = lambda;
  op.matrix = std::move(m);
  return op;
}

RealMatrix hermite_multiplier(const HermiteBasis& basis, const std::function<double(double)>& f) {
  const int N = basis.cutoff;
  const int Q = static_cast<int>(basis.quad.nodes.size());
  RealVector fw(Q);
  for (int k = 0; k < Q; ++k) fw(k) = basis.quad.weights(k) * f(basis.quad.nodes(k));
  return basis.h_at_nodes.transpose() * fw.asDiagonal() * basis.h_at_nodes;
}

bool grid_too_narrow(const HermiteBasis& basis, const PGrid& grid) {
  return grid.half_width < std::sqrt(2.0 * basis.cutoff) + 4.0;
}

Vector to_grid(const Vector& coeffs, const HermiteBasis& basis, const PGrid& grid) {
  if (coeffs.size() != basis.cutoff) throw std::invalid_argument("to_grid: 1D coefficient vector expected");
  const RealVector p = grid.nodes();
  Vector out = Vector::Zero(grid.points);
  for (int k = 0; k < grid.points; ++k) {
    const RealVector h = hermite_values(basis.cutoff, p(k));
    Complex v = 0;
    for (int n = 0; n < basis.cutoff; ++n) v += coeffs(n) * h(n);
    out(k) = v;
  }
  return out;
}

Vector to_hermite(const Vector& samples, const HermiteBasis& basis, const PGrid& grid) {
  if (samples.size() != grid.points) throw std::invalid_argument("to_hermite: sample vector size mismatch");
  const RealVector p = grid.nodes();
  const double s = grid.spacing();
  Vector out = Vector::Zero(basis.cutoff);
  for (int k = 0; k < grid.points; ++k) {
    const RealVector h = hermite_values(basis.cutoff, p(k));
    for (int n = 0; n < basis.cutoff; ++n) out(n) += s * h(n) * samples(k);
  }
  return out;
}

}  // namespace gkfp
