#include "gkfp/partitions.hpp"

#include <cmath>

namespace gkfp {

double Bump::operator()(double t) const {
  if (t <= a || t >= b) return 0.0;
  const double u = (t - a) * (b - t);
  if (u < 1.4e-3) return 0.0;  // exp(-1/u) underflows; avoids 0 * inf downstream
  return std::exp(-1.0 / u);
}

double Bump::d1(double t) const {
  if (t <= a || t >= b) return 0.0;
  const double u = (t - a) * (b - t);
  if (u < 1.4e-3) return 0.0;
  const double du = (b - t) - (t - a);  // a + b - 2t
  return operator()(t) * du / (u * u);
}

double Bump::d2(double t) const {
  if (t <= a || t >= b) return 0.0;
  const double u = (t - a) * (b - t);
  if (u < 1.4e-3) return 0.0;
  const double du = a + b - 2.0 * t;
  const double v = operator()(t);
  // d/dt [v du/u^2] = v (du/u^2)^2 + v (du' u^2 - du 2u u') / u^4
  return v * (du * du / (u * u * u * u) + (-2.0 * u * u - du * 2.0 * u * du) / (u * u * u * u));
}

void Bump::derivs(double t, double out[5]) const {
  if (t <= a || t >= b || (t - a) * (b - t) < 1.4e-3) {
    for (int k = 0; k <= 4; ++k) out[k] = 0.0;
    return;
  }
  // g = -1/u with u = (t-a)(b-t), w = u' = a+b-2t, r = 1/u; then
  //   g'    = w r^2
  //   g''   = -2 r^2 - 2 w^2 r^3
  //   g'''  = 12 w r^3 + 6 w^3 r^4
  //   g'''' = -24 r^3 - 72 w^2 r^4 - 24 w^4 r^5
  // and f = e^g via the exponential Bell polynomials.
  const double u = (t - a) * (b - t);
  const double w = a + b - 2.0 * t;
  const double r = 1.0 / u;
  const double r2 = r * r, r3 = r2 * r, r4 = r3 * r, r5 = r4 * r;
  const double g1 = w * r2;
  const double g2 = -2.0 * r2 - 2.0 * w * w * r3;
  const double g3 = 12.0 * w * r3 + 6.0 * w * w * w * r4;
  const double g4 = -24.0 * r3 - 72.0 * w * w * r4 - 24.0 * w * w * w * w * r5;
  const double f = std::exp(-r);
  out[0] = f;
  out[1] = f * g1;
  out[2] = f * (g2 + g1 * g1);
  out[3] = f * (g3 + 3.0 * g1 * g2 + g1 * g1 * g1);
  out[4] = f * (g4 + 4.0 * g1 * g3 + 3.0 * g2 * g2 + 6.0 * g1 * g1 * g2 +
                g1 * g1 * g1 * g1);
}

namespace {

// Theta(s) = sum over integers l of bump^2(4^-l s); 4-multiplicatively
// periodic and positive on (0, inf). At most two terms are nonzero.
double dyadic_normalizer(const Bump& bump, double s, double* d1 = nullptr, double* d2 = nullptr) {
  double sum = 0, sum1 = 0, sum2 = 0;
  if (s <= 0) return 0;
  const double l0 = std::log(s) / std::log(4.0);
  const int lmin = static_cast<int>(std::floor(l0)) - 1;
  for (int l = lmin; l <= lmin + 3; ++l) {
    const double scale = std::pow(4.0, -l);
    const double arg = scale * s;
    const double v = bump(arg);
    if (v == 0.0) continue;
    sum += v * v;
    if (d1 || d2) {
      const double bv1 = bump.d1(arg);
      sum1 += 2.0 * v * bv1 * scale;
      if (d2) {
        const double bv2 = bump.d2(arg);
        sum2 += 2.0 * (bv1 * bv1 + v * bv2) * scale * scale;
      }
    }
  }
  if (d1) *d1 = sum1;
  if (d2) *d2 = sum2;
  return sum;
}

}  // namespace

double DyadicPartition::theta(double s) const {
  const double v = bump(s);
  if (v == 0.0) return 0.0;
  return v / std::sqrt(dyadic_normalizer(bump, s));
}

double DyadicPartition::theta_d1(double s) const {
  const double v = bump(s);
  if (v == 0.0) return 0.0;
  double n1 = 0;
  const double n = dyadic_normalizer(bump, s, &n1);
  return bump.d1(s) / std::sqrt(n) - 0.5 * v * n1 / (n * std::sqrt(n));
}

double DyadicPartition::theta_d2(double s) const {
  const double v = bump(s);
  if (v == 0.0) return 0.0;
  double n1 = 0, n2 = 0;
  const double n = dyadic_normalizer(bump, s, &n1, &n2);
  const double v1 = bump.d1(s), v2 = bump.d2(s);
  const double rn = std::sqrt(n);
  // d2 of v / sqrt(n)
  return v2 / rn - v1 * n1 / (n * rn) - 0.5 * v * n2 / (n * rn) + 0.75 * v * n1 * n1 / (n * n * rn);
}

double DyadicPartition::theta_tilde(double s) const {
  // theta_tilde^2(s) = sum_{l>=0} theta^2(4^l s); exactly 1 for s <= 1 and 0 for s >= 4.
  if (s <= 1.0) return 1.0;
  if (s >= 4.0) return 0.0;
  const double t0 = theta(s);
  return std::sqrt(t0 * t0);  // for s in (1,4) only the l=0 term survives
}

double DyadicPartition::theta_tilde_d1(double s) const {
  if (s <= 1.0 || s >= 4.0) return 0.0;
  // theta_tilde = |theta| = theta on (1,4) where theta > 0
  return theta_d1(s);
}

double DyadicPartition::theta_tilde_d2(double s) const {
  if (s <= 1.0 || s >= 4.0) return 0.0;
  return theta_d2(s);
}

double DyadicPartition::member(int ell, double s) const {
  if (ell < -1) throw std::invalid_argument("DyadicPartition: ell >= -1");
  if (ell == -1) return theta_tilde(4.0 * s);
  return theta(std::pow(4.0, -ell) * s);
}

double DyadicPartition::member_d1(int ell, double s) const {
  if (ell == -1) return 4.0 * theta_tilde_d1(4.0 * s);
  const double sc = std::pow(4.0, -ell);
  return sc * theta_d1(sc * s);
}

double DyadicPartition::member_d2(int ell, double s) const {
  if (ell == -1) return 16.0 * theta_tilde_d2(4.0 * s);
  const double sc = std::pow(4.0, -ell);
  return sc * sc * theta_d2(sc * s);
}

namespace {

// theta-derivatives 0..4 at s in (1/4, 4): theta = f * Theta^{-1/2} with f the
// bump and Theta(s) = sum_l f^2(4^-l s); everything by Leibniz / Faa di Bruno.
void theta_derivs4(const Bump& bump, double s, double out[5]) {
  double f[5];
  bump.derivs(s, f);
  if (f[0] == 0.0) {
    for (int k = 0; k <= 4; ++k) out[k] = 0.0;
    return;
  }
  double th[5] = {0, 0, 0, 0, 0};  // Theta and its derivatives
  const double l0 = std::log(s) / std::log(4.0);
  const int lmin = static_cast<int>(std::floor(l0)) - 1;
  for (int l = lmin; l <= lmin + 3; ++l) {
    const double c = std::pow(4.0, -l);
    double b[5];
    bump.derivs(c * s, b);
    if (b[0] == 0.0 && b[1] == 0.0) continue;
    double sq[5];  // derivatives of bump^2 at c*s
    sq[0] = b[0] * b[0];
    sq[1] = 2.0 * b[0] * b[1];
    sq[2] = 2.0 * (b[1] * b[1] + b[0] * b[2]);
    sq[3] = 2.0 * (3.0 * b[1] * b[2] + b[0] * b[3]);
    sq[4] = 2.0 * (3.0 * b[2] * b[2] + 4.0 * b[1] * b[3] + b[0] * b[4]);
    double ck = 1.0;
    for (int k = 0; k <= 4; ++k) {
      th[k] += ck * sq[k];
      ck *= c;
    }
  }
  // G = Theta^{-1/2} via phi(x) = x^{-1/2}
  const double x = th[0];
  const double p1 = -0.5 * std::pow(x, -1.5);
  const double p2 = 0.75 * std::pow(x, -2.5);
  const double p3 = -1.875 * std::pow(x, -3.5);
  const double p4 = 6.5625 * std::pow(x, -4.5);
  double G[5];
  G[0] = 1.0 / std::sqrt(x);
  G[1] = p1 * th[1];
  G[2] = p2 * th[1] * th[1] + p1 * th[2];
  G[3] = p3 * th[1] * th[1] * th[1] + 3.0 * p2 * th[1] * th[2] + p1 * th[3];
  G[4] = p4 * th[1] * th[1] * th[1] * th[1] + 6.0 * p3 * th[1] * th[1] * th[2] +
         p2 * (3.0 * th[2] * th[2] + 4.0 * th[1] * th[3]) + p1 * th[4];
  // theta^{(k)} = sum_j C(k,j) f^{(j)} G^{(k-j)}
  out[0] = f[0] * G[0];
  out[1] = f[1] * G[0] + f[0] * G[1];
  out[2] = f[2] * G[0] + 2.0 * f[1] * G[1] + f[0] * G[2];
  out[3] = f[3] * G[0] + 3.0 * f[2] * G[1] + 3.0 * f[1] * G[2] + f[0] * G[3];
  out[4] = f[4] * G[0] + 4.0 * f[3] * G[1] + 6.0 * f[2] * G[2] + 4.0 * f[1] * G[3] +
           f[0] * G[4];
}

}  // namespace

void DyadicPartition::member_derivs4(int ell, double s, double out[5]) const {
  if (ell == -1) {
    // theta_tilde(y): 1 for y <= 1, theta(y) on (1,4), 0 beyond; y = 4s
    const double y = 4.0 * s;
    if (y <= 1.0) {
      out[0] = 1.0;
      for (int k = 1; k <= 4; ++k) out[k] = 0.0;
      return;
    }
    if (y >= 4.0) {
      for (int k = 0; k <= 4; ++k) out[k] = 0.0;
      return;
    }
    double inner[5];
    theta_derivs4(bump, y, inner);
    double c = 1.0;
    for (int k = 0; k <= 4; ++k) {
      out[k] = c * inner[k];
      c *= 4.0;
    }
    return;
  }
  const double sc = std::pow(4.0, -ell);
  double inner[5];
  theta_derivs4(bump, sc * s, inner);
  double c = 1.0;
  for (int k = 0; k <= 4; ++k) {
    out[k] = c * inner[k];
    c *= sc;
  }
}

double DyadicPartition::identity_sum(double s) const {
  double sum = member(-1, s) * member(-1, s);
  for (int l = 0; l <= ell_max; ++l) {
    const double v = member(l, s);
    sum += v * v;
  }
  return sum;
}

DyadicPartition build_dyadic(int ell_max, double t_max, const Bump& bump) {
  DyadicPartition part;
  part.ell_max = ell_max;
  part.t_max = t_max;
  part.bump = bump;
  // Normalization requires the bump to be bounded away from 0 on a dyadic
  // fundamental domain [1, 4) (equivalently the summed normalizer positive).
  for (int i = 0; i <= 256; ++i) {
    const double s = 1.0 + 3.0 * i / 256.0;
    if (dyadic_normalizer(bump, s) < 1e-12)
      throw std::invalid_argument("build_dyadic: bump not bounded away from 0 on a fundamental domain");
  }
  // Derivative-bound certificates sup_p |d^a_p theta_ell| <= C_a 2^{-a ell}:
  // measured in the radial variable r = |p| on members ell = -1..3 (scale
  // covariance makes higher members redundant), finite differences in r.
  const int order_max = 4;
  part.deriv_bound_constants.assign(order_max + 1, 0.0);
  auto member_of_r = [&part](int ell, double r) { return part.member(ell, r * r); };
  for (int ell = -1; ell <= 3; ++ell) {
    const double scale = std::pow(2.0, ell);
    const double r_lo = (ell == -1) ? 0.0 : 0.4 * scale;
    const double r_hi = (ell == -1) ? 1.1 : 2.1 * scale;
    const int n_samples = 1200;
    const double fd_h = 1e-2 * ((ell == -1) ? 0.5 : scale);
    for (int i = 0; i <= n_samples; ++i) {
      const double r = r_lo + (r_hi - r_lo) * i / n_samples;
      // central stencils up to order 4
      double der[5];
      der[0] = std::abs(member_of_r(ell, r));
      const double f2 = member_of_r(ell, r + 2 * fd_h), f1 = member_of_r(ell, r + fd_h),
                   f0 = member_of_r(ell, r), fm1 = member_of_r(ell, r - fd_h),
                   fm2 = member_of_r(ell, r - 2 * fd_h);
      der[1] = std::abs((f2 * -1 + 8 * f1 - 8 * fm1 + fm2) / (12 * fd_h));
      der[2] = std::abs((-f2 + 16 * f1 - 30 * f0 + 16 * fm1 - fm2) / (12 * fd_h * fd_h));
      der[3] = std::abs((f2 - 2 * f1 + 2 * fm1 - fm2) / (2 * fd_h * fd_h * fd_h));
      const double f3 = member_of_r(ell, r + 3 * fd_h), fm3 = member_of_r(ell, r - 3 * fd_h);
      der[4] = std::abs((f3 - 9 * f2 + 24 * f1 - 24 * fm1 + 9 * fm2 - fm3) /
                        (6 * fd_h * fd_h * fd_h * fd_h));
      for (int a = 0; a <= order_max; ++a) {
        const double scaled = der[a] * std::pow(2.0, a * std::max(ell, 0));
        part.deriv_bound_constants[a] = std::max(part.deriv_bound_constants[a], scaled);
      }
    }
  }
  return part;
}

namespace {

double grid_normalizer(const Bump& w0, double x, double* d1 = nullptr, double* d2 = nullptr) {
  // sum_m w0^2(x - m); w0 supported in (-1,1) so at most two terms.
  double sum = 0, sum1 = 0, sum2 = 0;
  const int m0 = static_cast<int>(std::floor(x));
  for (int m = m0 - 1; m <= m0 + 1; ++m) {
    const double v = w0(x - m);
    if (v == 0.0) continue;
    sum += v * v;
    if (d1 || d2) {
      const double v1 = w0.d1(x - m);
      sum1 += 2.0 * v * v1;
      if (d2) sum2 += 2.0 * (v1 * v1 + v * w0.d2(x - m));
    }
  }
  if (d1) *d1 = sum1;
  if (d2) *d2 = sum2;
  return sum;
}

}  // namespace

double GridPartition::psi(double x) const {
  const double v = w0(x);
  if (v == 0.0) return 0.0;
  return v / std::sqrt(grid_normalizer(w0, x));
}

double GridPartition::psi_d1(double x) const {
  const double v = w0(x);
  if (v == 0.0) return 0.0;
  double n1 = 0;
  const double n = grid_normalizer(w0, x, &n1);
  return w0.d1(x) / std::sqrt(n) - 0.5 * v * n1 / (n * std::sqrt(n));
}

double GridPartition::psi_d2(double x) const {
  const double v = w0(x);
  if (v == 0.0) return 0.0;
  double n1 = 0, n2 = 0;
  const double n = grid_normalizer(w0, x, &n1, &n2);
  const double v1 = w0.d1(x), v2 = w0.d2(x);
  const double rn = std::sqrt(n);
  return v2 / rn - v1 * n1 / (n * rn) - 0.5 * v * n2 / (n * rn) + 0.75 * v * n1 * n1 / (n * n * rn);
}

double GridPartition::member(int m, double q) const { return psi((q - scale() * m) / scale()); }

double GridPartition::member_dq(int m, double q) const {
  return psi_d1((q - scale() * m) / scale()) / scale();
}

double GridPartition::identity_sum(double q) const {
  double sum = 0;
  const int m0 = static_cast<int>(std::floor(q));
  for (int m = m0 - 1; m <= m0 + 1; ++m) {
    const double v = psi(q - m);
    sum += v * v;
  }
  return sum;
}

GridPartition build_grid(double A, int ell) {
  if (!(A > 0)) throw std::invalid_argument("build_grid: A must be positive");
  GridPartition part;
  part.A = A;
  part.ell = ell;
  part.w0 = Bump{-1.0, 1.0};
  for (int i = 0; i <= 64; ++i) {
    if (grid_normalizer(part.w0, i / 64.0) < 1e-12)
      throw std::invalid_argument("build_grid: normalizer vanishes");
  }
  // C_beta = sup |(A 2^-ell)^beta D^beta psi_{m,ell,A}| = sup |psi^{(beta)}|,
  // independent of (m, ell, A).
  part.deriv_bound_constants.assign(4, 0.0);
  const double fd_h = 5e-3;
  for (int i = 0; i <= 2000; ++i) {
    const double x = -1.05 + 2.1 * i / 2000.0;
    part.deriv_bound_constants[0] = std::max(part.deriv_bound_constants[0], std::abs(part.psi(x)));
    part.deriv_bound_constants[1] = std::max(part.deriv_bound_constants[1], std::abs(part.psi_d1(x)));
    part.deriv_bound_constants[2] = std::max(part.deriv_bound_constants[2], std::abs(part.psi_d2(x)));
    const double f2 = part.psi_d1(x + fd_h), f1 = part.psi_d1(x - fd_h);
    part.deriv_bound_constants[3] =
        std::max(part.deriv_bound_constants[3], std::abs((f2 - f1) / (2 * fd_h)));
  }
  return part;
}

namespace {

bool product_vanishes(const Vector& a, const Vector& b) {
  for (long i = 0; i < a.size(); ++i)
    if (a(i) != Complex(0, 0) && b(i) != Complex(0, 0)) return false;
  return true;
}

}  // namespace

std::vector<LocalizationReport> localization_bounds(const FiberOperator& P,
                                                    const std::vector<Vector>& multipliers,
                                                    const std::vector<Vector>& states,
                                                    double triple_tol) {
  const long n = P.dim();
  const size_t L = multipliers.size();
  for (const Vector& m : multipliers)
    if (m.size() != n) throw std::invalid_argument("localization_bounds: multiplier dimension mismatch");
  for (const Vector& u : states)
    if (u.size() != n) throw std::invalid_argument("localization_bounds: state dimension mismatch");
  if (states.empty()) return {};

  const Matrix& A = P.matrix;
  const double op_scale = std::max(1.0, A.cwiseAbs().maxCoeff());

  // Precondition: triple commutators vanish (second-order operator). Probed
  // on the first state over overlapping triples; expansion
  //   [[[P,c1],c2],c3] v = sum_{S subset {1,2,3}} (-1)^{|S|} c_S P(c_{S^c} v).
  {
    const Vector& u = states.front();
    const Vector Pu = A * u;
    double worst = 0;
    for (size_t i1 = 0; i1 < L; ++i1)
      for (size_t i2 = i1; i2 < std::min(L, i1 + 2); ++i2)
        for (size_t i3 = i2; i3 < std::min(L, i2 + 2); ++i3) {
          const Vector &c1 = multipliers[i1], &c2 = multipliers[i2], &c3 = multipliers[i3];
          Vector t = Vector::Zero(n);
          // S = {}: P(c1 c2 c3 v)
          t += A * Vector(c1.cwiseProduct(c2.cwiseProduct(c3.cwiseProduct(u))));
          // |S| = 1
          t -= c1.cwiseProduct(Vector(A * Vector(c2.cwiseProduct(c3.cwiseProduct(u)))));
          t -= c2.cwiseProduct(Vector(A * Vector(c1.cwiseProduct(c3.cwiseProduct(u)))));
          t -= c3.cwiseProduct(Vector(A * Vector(c1.cwiseProduct(c2.cwiseProduct(u)))));
          // |S| = 2
          t += c1.cwiseProduct(c2.cwiseProduct(Vector(A * Vector(c3.cwiseProduct(u)))));
          t += c1.cwiseProduct(c3.cwiseProduct(Vector(A * Vector(c2.cwiseProduct(u)))));
          t += c2.cwiseProduct(c3.cwiseProduct(Vector(A * Vector(c1.cwiseProduct(u)))));
          // S = {1,2,3}
          t -= c1.cwiseProduct(c2.cwiseProduct(c3.cwiseProduct(Pu)));
          worst = std::max(worst, t.norm());
        }
    const double rel = worst / (op_scale * u.norm());
    if (rel > triple_tol)
      throw std::runtime_error(
          "localization_bounds: triple commutator does not vanish (operator order > 2)");
  }

  std::vector<LocalizationReport> out;
  out.reserve(states.size());
  for (const Vector& u : states) {
    LocalizationReport rep;
    rep.triple_comm_residual = 0;

    const Vector Pu = A * u;
    rep.norm_Pu_sq = Pu.squaredNorm();

    // P(c1 u) reused by every sum.
    std::vector<Vector> cu(L), Pcu(L);
    for (size_t i = 0; i < L; ++i) {
      cu[i] = multipliers[i].cwiseProduct(u);
      Pcu[i] = A * cu[i];
      rep.s1 += Pcu[i].squaredNorm();
    }
    for (size_t i2 = 0; i2 < L; ++i2) {
      const Vector& c2 = multipliers[i2];
      for (size_t i1 = 0; i1 < L; ++i1) {
        // [P,c2](c1 u) = P(c2 c1 u) - c2 P(c1 u)
        if (product_vanishes(c2, multipliers[i1])) continue;
        const Vector v = c2.cwiseProduct(cu[i1]);
        rep.s2 += (A * v - c2.cwiseProduct(Pcu[i1])).squaredNorm();
      }
      for (size_t i3 = 0; i3 < L; ++i3) {
        const Vector& c3 = multipliers[i3];
        if (product_vanishes(c2, c3)) continue;
        for (size_t i1 = 0; i1 < L; ++i1) {
          // [[P,c2],c3](c1 u) expanded as in the precondition probe.
          const Vector& c1v = cu[i1];
          if (product_vanishes(c3, multipliers[i1]) && product_vanishes(c2, multipliers[i1]))
            continue;
          Vector t = A * Vector(c2.cwiseProduct(c3.cwiseProduct(c1v)));
          t -= c2.cwiseProduct(Vector(A * Vector(c3.cwiseProduct(c1v))));
          t -= c3.cwiseProduct(Vector(A * Vector(c2.cwiseProduct(c1v))));
          t += c2.cwiseProduct(c3.cwiseProduct(Pcu[i1]));
          rep.s3 += t.squaredNorm();
        }
      }
    }

    const double tol = 1e-10 * op_scale * op_scale * u.squaredNorm();
    rep.upper_ok = rep.norm_Pu_sq <= 2.0 * rep.s1 + 4.0 * rep.s2 + 8.0 * rep.s3 + tol;
    rep.lower_ok = rep.norm_Pu_sq >= 0.5 * rep.s1 - 2.0 * rep.s2 - 4.0 * rep.s3 - tol;
    rep.r = (rep.s1 > 0) ? 2.0 * (2.0 * rep.s2 + 4.0 * rep.s3) / rep.s1 : 0.0;
    if (rep.r < 1.0) {
      rep.equiv_ok = ((2.0 + rep.r) * rep.s1 >= rep.norm_Pu_sq - tol) &&
                     (rep.norm_Pu_sq >= (1.0 - rep.r) / 2.0 * rep.s1 - tol);
    }
    out.push_back(rep);
  }
  return out;
}

DyadicEquivalenceReport dyadic_equivalence(const FiberOperator& P_b,
                                           const std::vector<Vector>& theta_members,
                                           const std::vector<Vector>& states, double b,
                                           double lambda,
                                           const std::vector<double>& C_search_grid) {
  // ||(kappa/b^2 + P - i lambda/b) v||^2 expands in kappa as
  //   ||w||^2 + 2 (kappa/b^2) Re<v, w> + (kappa/b^2)^2 ||v||^2,
  // w = (P - i lambda/b) v, so each candidate C costs only inner products.
  struct Piece {
    double w2 = 0, cross = 0, v2 = 0;
    double eval(double kb2) const { return w2 + 2.0 * kb2 * cross + kb2 * kb2 * v2; }
  };
  const Complex shift(0.0, -lambda / b);
  auto make_piece = [&](const Vector& v) {
    Piece p;
    const Vector w = P_b.matrix * v + shift * v;
    p.w2 = w.squaredNorm();
    p.cross = std::real(v.dot(w));
    p.v2 = v.squaredNorm();
    return p;
  };

  std::vector<Piece> whole;
  std::vector<std::vector<Piece>> localized;
  whole.reserve(states.size());
  for (const Vector& u : states) {
    whole.push_back(make_piece(u));
    std::vector<Piece> loc;
    loc.reserve(theta_members.size());
    for (const Vector& th : theta_members) loc.push_back(make_piece(Vector(th.cwiseProduct(u))));
    localized.push_back(std::move(loc));
  }

  DyadicEquivalenceReport rep;
  for (double C : C_search_grid) {
    const double kappa = C * (1.0 + b * b);
    const double kb2 = kappa / (b * b);
    double lower_margin = 1e300, upper_margin = 1e300;
    for (size_t s = 0; s < states.size(); ++s) {
      const double mid = whole[s].eval(kb2);
      double sum = 0;
      for (const Piece& p : localized[s]) sum += p.eval(kb2);
      lower_margin = std::min(lower_margin, mid - 0.25 * sum);
      upper_margin = std::min(upper_margin, 2.5 * sum - mid);
    }
    if (lower_margin >= 0 && upper_margin >= 0) {
      rep.C = C;
      rep.kappa_b = kappa;
      rep.ok = true;
      rep.lower_margin = lower_margin;
      rep.upper_margin = upper_margin;
      return rep;
    }
    rep.lower_margin = lower_margin;  // margins at the last (failing) C
    rep.upper_margin = upper_margin;
  }
  return rep;  // search grid exhausted, ok = false with margins reported
}

GridErrorReport grid_error_bound(const FiberOperator& P_bl,
                                 const std::vector<Vector>& psi_members, const Vector& u,
                                 double kappa_b, double b, double lambda, int ell, double A) {
  const Complex kshift(kappa_b / (b * b), -lambda / b);
  const Matrix& P = P_bl.matrix;
  auto apply = [&](const Vector& v) { return Vector(P * v + kshift * v); };

  GridErrorReport rep;
  rep.mid = apply(u).squaredNorm();
  std::vector<Vector> pu(psi_members.size()), Ppu(psi_members.size());
  for (size_t m = 0; m < psi_members.size(); ++m) {
    pu[m] = psi_members[m].cwiseProduct(u);
    Ppu[m] = P * pu[m];
    rep.localized += (Ppu[m] + kshift * pu[m]).squaredNorm();
  }

  // E = sum_{m1,m2} ||[P,psi_m1] psi_m2 u||^2 (the kappa/lambda shift commutes).
  double err = 0;
  for (const Vector& psi1 : psi_members) {
    for (size_t m2 = 0; m2 < psi_members.size(); ++m2) {
      if (product_vanishes(psi1, psi_members[m2])) continue;
      const Vector v = psi1.cwiseProduct(pu[m2]);
      err += (P * v - psi1.cwiseProduct(Ppu[m2])).squaredNorm();
    }
  }
  rep.error_term = err;

  double loc_mass = 0;
  for (const Vector& v : pu) loc_mass += v.squaredNorm();
  const double paper_scale = std::pow(2.0, 4.0 * ell) / (A * A * b * b) * loc_mass;
  rep.C_gpsi = (paper_scale > 0) ? err / paper_scale : 0.0;

  const double tol = 1e-10 * (rep.mid + rep.localized + 1.0);
  rep.lower_ok = rep.mid >= 0.5 * rep.localized - 2.0 * err - tol;
  rep.upper_ok = rep.mid <= 2.0 * rep.localized + 4.0 * err + tol;
  return rep;
}

}  // namespace gkfp
