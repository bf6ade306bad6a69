#include "gkfp/operators.hpp"

#include <cmath>

namespace gkfp {

GkfpParams GkfpParams::from_ell(double b, int ell) {
  GkfpParams p;
  p.b = b;
  p.h = 1.0 / (std::pow(2.0, 2.0 * ell) * b);
  return p;
}

RealVector QGrid::nodes() const {
  RealVector x(points);
  for (int k = 0; k < points; ++k) x(k) = length * k / points;
  return x;
}

double QGrid::xi(int k) const { return 2.0 * M_PI * k / length; }

RealMatrix fd2_derivative(const QGrid& grid) {
  const int M = grid.points;
  const double inv2s = M / (2.0 * grid.length);
  RealMatrix D = RealMatrix::Zero(M, M);
  for (int j = 0; j < M; ++j) {
    D(j, (j + 1) % M) = inv2s;
    D(j, (j + M - 1) % M) = -inv2s;
  }
  return D;
}

RealMatrix spectral_derivative(const QGrid& grid) {
  // D_{jl} = (1/M) sum_k (i xi_k) e^{i xi_k (q_j - q_l)} over modes
  // k = -kmax..kmax; real antisymmetric, and for even M the Nyquist mode
  // carries no derivative.
  const int M = grid.points;
  const double dq = grid.length / M;
  const int kmax = (M % 2) ? (M - 1) / 2 : M / 2 - 1;
  RealMatrix D = RealMatrix::Zero(M, M);
  for (int j = 0; j < M; ++j)
    for (int l = 0; l < M; ++l) {
      double v = 0;
      for (int k = 1; k <= kmax; ++k) {
        const double xi = grid.xi(k);
        v -= 2.0 * xi * std::sin(xi * (j - l) * dq) / M;
      }
      D(j, l) = v;
    }
  return D;
}

FiberOperator assemble_oscillator(const HermiteBasis& basis, const RealMatrix& g_cov) {
  const int d = basis.p_dims;
  if (g_cov.rows() != d || g_cov.cols() != d)
    throw std::invalid_argument("assemble_oscillator: metric dimension mismatch");
  Eigen::LDLT<RealMatrix> ldlt(g_cov);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() < 1e-14 * std::max(1.0, g_cov.cwiseAbs().maxCoeff()))
    throw std::runtime_error("assemble_oscillator: singular metric");
  const RealMatrix g_inv = ldlt.solve(RealMatrix::Identity(d, d));

  std::vector<Matrix> P(d), D(d);
  for (int j = 0; j < d; ++j) {
    P[j] = op_position(basis, j).matrix;
    D[j] = op_deriv(basis, j).matrix;
  }
  Matrix m = Matrix::Zero(basis.dim(), basis.dim());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (g_cov(i, j) != 0.0) m -= 0.5 * g_cov(i, j) * (D[i] * D[j]);
      if (g_inv(i, j) != 0.0) m += 0.5 * g_inv(i, j) * (P[i] * P[j]);
    }
  FiberOperator op;
  op.rep = RepInfo::hermite(basis);
  op.label = "oscillator";
  op.matrix = std::move(m);
  return op;
}

FiberOperator assemble_vertical(const HermiteBasis& basis, const MetricField& metric,
                                const RealVector& q) {
  if (metric.dim != basis.p_dims)
    throw std::invalid_argument("assemble_vertical: metric/basis dimension mismatch");
  FiberOperator op = assemble_oscillator(basis, metric.g(q));
  op.label = "vertical_oscillator";
  for (int i = 0; i < metric.dim; ++i) op.params["q" + std::to_string(i)] = q(i);
  return op;
}

FiberOperator assemble_euclid_fiber(const GkfpParams& params, const RealVector& xi,
                                    const std::vector<double>& f_frozen,
                                    const HermiteBasis& basis) {
  const int d = basis.p_dims;
  if (xi.size() != d) throw std::invalid_argument("assemble_euclid_fiber: xi length mismatch");
  if (!f_frozen.empty() && static_cast<int>(f_frozen.size()) != d * d * d)
    throw std::invalid_argument("assemble_euclid_fiber: frozen f must have d^3 entries");

  std::vector<Matrix> P(d), D(d);
  for (int j = 0; j < d; ++j) {
    P[j] = op_position(basis, j).matrix;
    D[j] = op_deriv(basis, j).matrix;
  }
  const double b = params.b, h = params.h;
  Matrix m = Matrix::Zero(basis.dim(), basis.dim());
  for (int j = 0; j < d; ++j) {
    m -= 0.5 * h * h * (D[j] * D[j]);              // (1/2)(h D_p)^2, D_p = -i d/dp
    m += (0.5 / (b * b)) * (P[j] * P[j]);          // |p|^2 / (2 b^2)
    m += Complex(0, xi(j) / b) * P[j];             // (i/b) p . xi
  }
  if (!f_frozen.empty()) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
          const double f = f_frozen[(i * d + j) * d + k];
          if (f != 0.0) m += h * f * (P[i] * (P[j] * D[k]));
        }
  }
  FiberOperator op;
  op.rep = RepInfo::hermite(basis);
  op.label = "euclid_fiber";
  op.params["b"] = b;
  op.params["h"] = h;
  for (int j = 0; j < d; ++j) op.params["xi" + std::to_string(j)] = xi(j);
  op.matrix = std::move(m);
  return op;
}

FiberOperator assemble_euclid_fiber_scaled_basis(const GkfpParams& params, const RealVector& xi,
                                                 const HermiteBasis& basis) {
  // In the basis h_n(p / sqrt(hb)) / (hb)^{1/4} the matrix of Phat_{b,h,0} is
  // (h/b) [O + i (xi sqrt(b/h)) . p]; assembled from that algebra.
  const ScalingCertificate cert = scaling_reduce(params.b, params.h);
  GkfpParams unit;
  unit.b = 1;
  unit.h = 1;
  FiberOperator op = assemble_euclid_fiber(unit, RealVector(cert.xi_scale * xi), {}, basis);
  op.matrix *= cert.spectral_ratio;
  op.label = "euclid_fiber_scaled_basis";
  op.params["b"] = params.b;
  op.params["h"] = params.h;
  return op;
}

PRep PRep::make_hermite(const HermiteBasis& b) {
  PRep r;
  r.kind = Kind::hermite;
  r.hermite = b;
  return r;
}

PRep PRep::make_grid(const PGrid& g) {
  PRep r;
  r.kind = Kind::grid;
  r.grid = g;
  return r;
}

namespace {

struct PBlocks {
  // Per-axis p-space operators in the chosen representation, dense complex.
  std::vector<Matrix> P, Dp;
  long pdim = 0;
};

PBlocks p_blocks(const PRep& prep, int d) {
  PBlocks out;
  if (prep.kind == PRep::Kind::hermite) {
    if (prep.hermite.p_dims != d) throw std::invalid_argument("assemble_scaled: basis dimension mismatch");
    out.pdim = prep.hermite.dim();
    for (int j = 0; j < d; ++j) {
      out.P.push_back(op_position(prep.hermite, j).matrix);
      out.Dp.push_back(op_deriv(prep.hermite, j).matrix);
    }
  } else {
    if (d != 1) throw std::invalid_argument("assemble_scaled: grid p-representation is 1D");
    const PGrid& g = prep.grid;
    out.pdim = g.points;
    Matrix P = Matrix::Zero(g.points, g.points);
    const RealVector nodes = g.nodes();
    for (int k = 0; k < g.points; ++k) P(k, k) = nodes(k);
    out.P.push_back(P);
    // Centered first difference with the grid's boundary rule; antisymmetric.
    Matrix D = Matrix::Zero(g.points, g.points);
    const double inv2s = 1.0 / (2.0 * g.spacing());
    for (int k = 0; k < g.points; ++k) {
      if (k + 1 < g.points) D(k, k + 1) = inv2s;
      if (k - 1 >= 0) D(k, k - 1) = -inv2s;
    }
    if (g.boundary == PGrid::Boundary::periodic) {
      D(g.points - 1, 0) = inv2s;
      D(0, g.points - 1) = -inv2s;
    }
    out.Dp.push_back(D);
  }
  return out;
}

// Second derivative in p; on the grid the 3-point stencil (not Dp^2).
Matrix p_second_derivative(const PRep& prep, const PBlocks& blocks, int i, int j) {
  if (prep.kind == PRep::Kind::hermite) return blocks.Dp[i] * blocks.Dp[j];
  const PGrid& g = prep.grid;
  Matrix L = Matrix::Zero(g.points, g.points);
  const double inv_s2 = 1.0 / (g.spacing() * g.spacing());
  for (int k = 0; k < g.points; ++k) {
    L(k, k) = -2.0 * inv_s2;
    if (k + 1 < g.points) L(k, k + 1) = inv_s2;
    if (k - 1 >= 0) L(k, k - 1) = inv_s2;
  }
  if (g.boundary == PGrid::Boundary::periodic) {
    L(g.points - 1, 0) = inv_s2;
    L(0, g.points - 1) = inv_s2;
  }
  return L;
}

}  // namespace

FiberOperator assemble_scaled_oscillator(int ell, const MetricField& metric, const QGrid& qgrid,
                                         const PRep& prep) {
  const int d = metric.dim;
  if (d != 1) throw std::invalid_argument("assemble_scaled: 1D base only");
  const PBlocks blocks = p_blocks(prep, d);
  const long M = qgrid.points;
  const long dim = M * blocks.pdim;
  const RealVector qn = qgrid.nodes();
  const double s2l = std::pow(2.0, 2.0 * ell), s2li = std::pow(2.0, -2.0 * ell);

  Matrix m = Matrix::Zero(dim, dim);
  for (long qi = 0; qi < M; ++qi) {
    RealVector q(1);
    q(0) = qn(qi);
    const double gq = metric.g(q)(0, 0), giq = 1.0 / gq;
    const Matrix dd = p_second_derivative(prep, blocks, 0, 0);
    const Matrix block = 0.5 * (-s2li * gq * dd + s2l * giq * (blocks.P[0] * blocks.P[0]));
    m.block(qi * blocks.pdim, qi * blocks.pdim, blocks.pdim, blocks.pdim) = block;
  }
  FiberOperator op;
  op.rep.kind = (prep.kind == PRep::Kind::hermite) ? RepInfo::Kind::hermite_qgrid
                                                   : RepInfo::Kind::pgrid_qgrid;
  op.rep.dim = dim;
  op.rep.p_dims = d;
  op.rep.cutoff = (prep.kind == PRep::Kind::hermite) ? prep.hermite.cutoff : 0;
  op.rep.points = (prep.kind == PRep::Kind::grid) ? prep.grid.points : 0;
  op.rep.half_width = (prep.kind == PRep::Kind::grid) ? prep.grid.half_width : 0;
  op.rep.q_points = qgrid.points;
  op.rep.q_length = qgrid.length;
  op.label = "scaled_oscillator";
  op.params["ell"] = ell;
  op.matrix = std::move(m);
  return op;
}

FiberOperator assemble_scaled_transport(int ell, const MetricField& metric, const QGrid& qgrid,
                                        const PRep& prep, QDeriv qderiv) {
  const int d = metric.dim;
  if (d != 1) throw std::invalid_argument("assemble_scaled: 1D base only");
  const PBlocks blocks = p_blocks(prep, d);
  const long M = qgrid.points;
  const long dim = M * blocks.pdim;
  const RealVector qn = qgrid.nodes();
  const RealMatrix Dq = (qderiv == QDeriv::spectral) ? spectral_derivative(qgrid)
                                                     : fd2_derivative(qgrid);
  const double tl = std::pow(2.0, ell);

  // Y_ell = 2^l g^{11}(q) p ( d/dq + Gamma(q) p d/dp )
  Matrix m = Matrix::Zero(dim, dim);
  const Matrix gp = blocks.P[0];
  const Matrix ppd = blocks.P[0] * blocks.P[0] * blocks.Dp[0];
  for (long qi = 0; qi < M; ++qi) {
    RealVector q(1);
    q(0) = qn(qi);
    const double gi = 1.0 / metric.g(q)(0, 0);
    const double gamma = christoffel(metric, q)[0](0, 0);
    // dq-part couples q-blocks; Gamma-part is block diagonal.
    for (long qj = 0; qj < M; ++qj) {
      if (Dq(qi, qj) != 0.0)
        m.block(qi * blocks.pdim, qj * blocks.pdim, blocks.pdim, blocks.pdim) +=
            tl * gi * Dq(qi, qj) * gp;
    }
    m.block(qi * blocks.pdim, qi * blocks.pdim, blocks.pdim, blocks.pdim) += tl * gi * gamma * ppd;
  }
  FiberOperator op;
  op.rep.kind = (prep.kind == PRep::Kind::hermite) ? RepInfo::Kind::hermite_qgrid
                                                   : RepInfo::Kind::pgrid_qgrid;
  op.rep.dim = dim;
  op.rep.p_dims = d;
  op.rep.cutoff = (prep.kind == PRep::Kind::hermite) ? prep.hermite.cutoff : 0;
  op.rep.points = (prep.kind == PRep::Kind::grid) ? prep.grid.points : 0;
  op.rep.half_width = (prep.kind == PRep::Kind::grid) ? prep.grid.half_width : 0;
  op.rep.q_points = qgrid.points;
  op.rep.q_length = qgrid.length;
  op.label = "scaled_transport";
  op.params["ell"] = ell;
  op.matrix = std::move(m);
  return op;
}

FiberOperator assemble_scaled(const GkfpParams& params, int ell, const MetricField& metric,
                              const QGrid& qgrid, const PRep& prep, QDeriv qderiv, long dim_cap) {
  const PBlocks blocks = p_blocks(prep, metric.dim);
  const long dim = static_cast<long>(qgrid.points) * blocks.pdim;
  if (dim > dim_cap) throw std::runtime_error("assemble_scaled: total dimension exceeds cap");
  FiberOperator osc = assemble_scaled_oscillator(ell, metric, qgrid, prep);
  FiberOperator tr = assemble_scaled_transport(ell, metric, qgrid, prep, qderiv);
  FiberOperator op = std::move(osc);
  op.matrix = op.matrix / (params.b * params.b) + tr.matrix / params.b;
  op.label = "scaled_gkfp";
  op.params["b"] = params.b;
  op.params["ell"] = ell;
  return op;
}

ScalingCertificate scaling_reduce(double b, double h) {
  if (!(b > 0) || !(h > 0)) throw std::invalid_argument("scaling_reduce: b, h must be positive");
  ScalingCertificate c;
  c.b = b;
  c.h = h;
  c.p_scale = std::sqrt(h * b);
  c.spectral_ratio = h / b;
  c.xi_scale = std::sqrt(b / h);
  return c;
}

RealMatrix rotate_fiber(const RealVector& xi) {
  const int d = static_cast<int>(xi.size());
  const double n = xi.norm();
  if (n == 0.0) return RealMatrix::Identity(d, d);
  // Householder reflection mapping e_1 to xi/|xi| composed with a sign fix,
  // so that R^T xi = (|xi|, 0, ..., 0) and R is orthogonal.
  RealVector u = xi / n;
  RealVector e1 = RealVector::Zero(d);
  e1(0) = 1.0;
  if ((u - e1).norm() < 1e-14) return RealMatrix::Identity(d, d);
  RealVector w = u - e1;
  w.normalize();
  RealMatrix H = RealMatrix::Identity(d, d) - 2.0 * w * w.transpose();
  // H e_1 = u and H is symmetric orthogonal, so H^T xi = |xi| e_1.
  return H;
}

FiberOperator assemble_rotated_fiber(double xi_norm, const HermiteBasis& basis) {
  FiberOperator op = op_number(basis);
  op.matrix += Complex(0, xi_norm) * op_position(basis, 0).matrix;
  op.label = "rotated_fiber";
  op.params["xi_norm"] = xi_norm;
  return op;
}

Vector quasimode_state(const MetricField& metric, const std::function<double(double)>& phi,
                       const QGrid& qgrid, const HermiteBasis& basis) {
  if (metric.dim != 1 || basis.p_dims != 1)
    throw std::invalid_argument("quasimode: 1D base representation");
  const int N = basis.cutoff;
  const long M = qgrid.points;
  const RealVector qn = qgrid.nodes();
  Vector u = Vector::Zero(M * N);
  // Hermite coefficients of p -> phi(g^{11}(q) p^2) per q node. The profile
  // lives on a compact |p|-window, which Gauss-Hermite nodes sample far too
  // coarsely, so the projection integrates over [-pmax, pmax] with composite
  // Simpson instead.
  double pmax_all = 0;
  {
    double s_hi = 1e-2;
    while (s_hi < 1e6 && (phi(s_hi) != 0.0 || s_hi < 16.0)) s_hi *= 2.0;
    pmax_all = std::sqrt(s_hi);
  }
  const int panels = 1 << 12;
  for (long qi = 0; qi < M; ++qi) {
    RealVector q(1);
    q(0) = qn(qi);
    const double gi = metric.ginv(q)(0, 0);
    const double pmax = pmax_all / std::sqrt(gi);
    const double h = 2.0 * pmax / panels;
    for (int k = 0; k <= panels; ++k) {
      const double p = -pmax + k * h;
      const double f = phi(gi * p * p);
      if (f == 0.0) continue;
      const double w = h / 3.0 * ((k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0));
      const RealVector hv = hermite_values(N, p);
      for (int n = 0; n < N; ++n) u(qi * N + n) += w * f * hv(n);
    }
  }
  const double nrm = u.norm();
  if (nrm < 1e-300) throw std::runtime_error("quasimode: profile underflow (all-zero samples)");
  return u / nrm;
}

QuasimodeReport quasimode(const MetricField& metric, const std::function<double(double)>& phi,
                          double b, const QGrid& qgrid, const HermiteBasis& basis) {
  const Vector u = quasimode_state(metric, phi, qgrid, basis);
  const PRep prep = PRep::make_hermite(basis);
  const Matrix O = assemble_scaled_oscillator(0, metric, qgrid, prep).matrix;
  const Matrix Y = assemble_scaled_transport(0, metric, qgrid, prep).matrix;
  QuasimodeReport rep;
  rep.norm_u = u.norm();
  const Vector Ou = O * u, Yu = Y * u;
  rep.norm_Ou = Ou.norm();
  rep.norm_Yu = Yu.norm();
  rep.norm_Pplus = (Ou / (b * b) + Yu / b).norm();
  rep.norm_Pminus = (Ou / (b * b) - Yu / b).norm();
  return rep;
}

FiberOperator commutator(const FiberOperator& op, const Vector& multiplier) {
  if (multiplier.size() != op.dim())
    throw std::invalid_argument("commutator: multiplier length does not match representation");
  FiberOperator out;
  out.rep = op.rep;
  out.label = "[" + op.label + ",m]";
  out.params = op.params;
  out.matrix = op.matrix * multiplier.asDiagonal() - multiplier.asDiagonal() * op.matrix;
  return out;
}

Vector commutator_apply(const FiberOperator& op, const Vector& multiplier, const Vector& u) {
  if (multiplier.size() != op.dim() || u.size() != op.dim())
    throw std::invalid_argument("commutator_apply: dimension mismatch");
  const Vector mu = multiplier.cwiseProduct(u);
  return op.matrix * mu - multiplier.cwiseProduct(Vector(op.matrix * u));
}

}  // namespace gkfp
