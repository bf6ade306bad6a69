#include "gkfp/geometry.hpp"

#include <cmath>

namespace gkfp {

namespace {

MetricField analytic_metric(int dim,
                            std::function<double(double, int)> comp /* (q_i, axis) -> g_ii */,
                            std::function<double(double, int)> dcomp,
                            std::function<double(double, int)> d2comp) {
  // Diagonal metric with g_ii depending only on q_i.
  MetricField m;
  m.dim = dim;
  m.g = [dim, comp](const RealVector& q) {
    RealMatrix g = RealMatrix::Identity(dim, dim);
    for (int i = 0; i < dim; ++i) g(i, i) = comp(q(i), i);
    return g;
  };
  m.dg = [dim, dcomp](const RealVector& q) {
    MetricDeriv d(dim, RealMatrix::Zero(dim, dim));
    for (int i = 0; i < dim; ++i) d[i](i, i) = dcomp(q(i), i);
    return d;
  };
  m.d2g = [dim, d2comp](const RealVector& q) {
    std::vector<MetricDeriv> d2(dim, MetricDeriv(dim, RealMatrix::Zero(dim, dim)));
    for (int i = 0; i < dim; ++i) d2[i][i](i, i) = d2comp(q(i), i);
    return d2;
  };
  return m;
}

}  // namespace

RealMatrix MetricField::ginv(const RealVector& q) const {
  const RealMatrix gq = g(q);
  Eigen::LDLT<RealMatrix> ldlt(gq);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() < 1e-14 * std::max(1.0, gq.cwiseAbs().maxCoeff()))
    throw std::runtime_error("MetricField: singular or non-SPD metric");
  return ldlt.solve(RealMatrix::Identity(dim, dim));
}

double MetricField::p_norm_sq(const RealVector& q, const RealVector& p) const {
  return p.dot(ginv(q) * p);
}

MetricField MetricField::flat(int dim) {
  return analytic_metric(
      dim, [](double, int) { return 1.0; }, [](double, int) { return 0.0; },
      [](double, int) { return 0.0; });
}

MetricField MetricField::sin1d(double eps) {
  if (std::abs(eps) >= 1.0) throw std::invalid_argument("sin1d: |eps| must be < 1");
  return analytic_metric(
      1, [eps](double q, int) { return 1.0 + eps * std::sin(q); },
      [eps](double q, int) { return eps * std::cos(q); },
      [eps](double q, int) { return -eps * std::sin(q); });
}

MetricField MetricField::expphi1d(double eps) {
  // g = exp(2 phi), phi = eps sin q; the 1D Christoffel symbol is phi'.
  return analytic_metric(
      1, [eps](double q, int) { return std::exp(2.0 * eps * std::sin(q)); },
      [eps](double q, int) { return 2.0 * eps * std::cos(q) * std::exp(2.0 * eps * std::sin(q)); },
      [eps](double q, int) {
        const double s = std::sin(q), c = std::cos(q);
        return (4.0 * eps * eps * c * c - 2.0 * eps * s) * std::exp(2.0 * eps * s);
      });
}

MetricField MetricField::torus2d(double eps) {
  if (std::abs(eps) >= 1.0) throw std::invalid_argument("torus2d: |eps| must be < 1");
  // Diagonal perturbation with cross dependence, so the curvature is nonzero
  // (a product metric would pull back to the exact identity in normal
  // coordinates). dg vanishes at q = (0, pi/2), which linear_chart uses.
  MetricField m;
  m.dim = 2;
  auto g11 = [eps](double q1, double q2) { return 1.0 + eps * std::sin(q1) * std::cos(q2); };
  auto g22 = [eps](double q1, double q2) { return 1.0 + eps * std::cos(q1) * std::sin(q2); };
  m.g = [g11, g22](const RealVector& q) {
    RealMatrix g = RealMatrix::Identity(2, 2);
    g(0, 0) = g11(q(0), q(1));
    g(1, 1) = g22(q(0), q(1));
    return g;
  };
  m.dg = [eps](const RealVector& q) {
    MetricDeriv d(2, RealMatrix::Zero(2, 2));
    const double s1 = std::sin(q(0)), c1 = std::cos(q(0));
    const double s2 = std::sin(q(1)), c2 = std::cos(q(1));
    d[0](0, 0) = eps * c1 * c2;
    d[0](1, 1) = -eps * s1 * s2;
    d[1](0, 0) = -eps * s1 * s2;
    d[1](1, 1) = eps * c1 * c2;
    return d;
  };
  m.d2g = [eps](const RealVector& q) {
    std::vector<MetricDeriv> d2(2, MetricDeriv(2, RealMatrix::Zero(2, 2)));
    const double s1 = std::sin(q(0)), c1 = std::cos(q(0));
    const double s2 = std::sin(q(1)), c2 = std::cos(q(1));
    // component (0,0): eps s1 c2 ; component (1,1): eps c1 s2
    d2[0][0](0, 0) = -eps * s1 * c2;
    d2[0][0](1, 1) = -eps * c1 * s2;
    d2[0][1](0, 0) = -eps * c1 * s2;
    d2[0][1](1, 1) = eps * s1 * c2;
    d2[1][0](0, 0) = -eps * c1 * s2;
    d2[1][0](1, 1) = eps * s1 * c2;
    d2[1][1](0, 0) = -eps * s1 * c2;
    d2[1][1](1, 1) = -eps * c1 * s2;
    return d2;
  };
  return m;
}

MetricField MetricField::from_preset(const std::string& name) {
  auto param = [&name](size_t prefix_len) { return std::stod(name.substr(prefix_len)); };
  if (name == "flat") return flat(1);
  if (name == "flat2d") return flat(2);
  if (name.rfind("sin1d:", 0) == 0) return sin1d(param(6));
  if (name.rfind("expphi1d:", 0) == 0) return expphi1d(param(9));
  if (name.rfind("torus2d:", 0) == 0) return torus2d(param(8));
  throw std::invalid_argument("unknown metric preset: " + name);
}

MetricField with_flat_outside(const MetricField& metric, const RealVector& q0, double r0) {
  const int d = metric.dim;
  // chi = 1 on [0, r0], 0 beyond 2 r0, smooth monotone in between.
  auto chi = [r0](double r) {
    if (r <= r0) return 1.0;
    if (r >= 2.0 * r0) return 0.0;
    const double t = (r - r0) / r0;
    const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
    return b / (a + b);
  };
  auto blended = [metric, q0, chi, d](const RealVector& q) {
    const double c = chi((q - q0).norm());
    if (c == 0.0) return RealMatrix(RealMatrix::Identity(d, d));
    return RealMatrix(c * metric.g(q) + (1.0 - c) * RealMatrix::Identity(d, d));
  };
  MetricField out;
  out.dim = d;
  out.flat_outside = r0;
  out.g = blended;
  out.dg = [blended, d](const RealVector& q) {
    const double h = 1e-5;
    MetricDeriv dg(d, RealMatrix::Zero(d, d));
    for (int k = 0; k < d; ++k) {
      RealVector q1 = q, q2 = q, q3 = q, q4 = q;
      q1(k) -= 2 * h;
      q2(k) -= h;
      q3(k) += h;
      q4(k) += 2 * h;
      dg[k] = (blended(q1) - 8.0 * blended(q2) + 8.0 * blended(q3) - blended(q4)) / (12.0 * h);
    }
    return dg;
  };
  out.d2g = [out_dg = out.dg, d](const RealVector& q) {
    const double h = 1e-4;
    std::vector<MetricDeriv> d2(d, MetricDeriv(d, RealMatrix::Zero(d, d)));
    for (int k = 0; k < d; ++k) {
      RealVector qp = q, qm = q;
      qp(k) += h;
      qm(k) -= h;
      const MetricDeriv dp = out_dg(qp), dm = out_dg(qm);
      for (int l = 0; l < d; ++l) d2[k][l] = (dp[l] - dm[l]) / (2.0 * h);
    }
    return d2;
  };
  return out;
}

namespace {

std::vector<RealMatrix> christoffel_from(const RealMatrix& gi, const MetricDeriv& dg, int d) {
  std::vector<RealMatrix> gamma(d, RealMatrix::Zero(d, d));
  for (int l = 0; l < d; ++l)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) {
        double v = 0;
        for (int a = 0; a < d; ++a)
          v += 0.5 * gi(l, a) * (dg[j](a, k) + dg[k](a, j) - dg[a](j, k));
        gamma[l](j, k) = v;
      }
  return gamma;
}

// dGamma[m][l](j,k) = d Gamma^l_{jk} / dq^m, from analytic dg and d2g.
std::vector<std::vector<RealMatrix>> christoffel_deriv(const MetricField& metric,
                                                       const RealVector& q) {
  const int d = metric.dim;
  const RealMatrix gi = metric.ginv(q);
  const MetricDeriv dg = metric.dg(q);
  const auto d2g = metric.d2g(q);
  // d g^{la} / dq^m = -(g^-1 dg_m g^-1)^{la}
  std::vector<RealMatrix> dginv(d);
  for (int m = 0; m < d; ++m) dginv[m] = -gi * dg[m] * gi;
  std::vector<std::vector<RealMatrix>> out(d, std::vector<RealMatrix>(d, RealMatrix::Zero(d, d)));
  for (int m = 0; m < d; ++m)
    for (int l = 0; l < d; ++l)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
          double v = 0;
          for (int a = 0; a < d; ++a) {
            v += 0.5 * dginv[m](l, a) * (dg[j](a, k) + dg[k](a, j) - dg[a](j, k));
            v += 0.5 * gi(l, a) * (d2g[m][j](a, k) + d2g[m][k](a, j) - d2g[m][a](j, k));
          }
          out[m][l](j, k) = v;
        }
  return out;
}

}  // namespace

std::vector<RealMatrix> christoffel(const MetricField& metric, const RealVector& q) {
  return christoffel_from(metric.ginv(q), metric.dg(q), metric.dim);
}

RealMatrix NormalChart::ginv(const RealVector& qt) const {
  return g(qt).ldlt().solve(RealMatrix::Identity(dim, dim));
}

std::vector<RealMatrix> NormalChart::christoffel(const RealVector& qt) const {
  return christoffel_from(ginv(qt), dg(qt), dim);
}

namespace {

// Adaptive Simpson on [a,b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double flm = f(0.5 * (a + m)), frm = f(0.5 * (m + b));
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

double invert_monotone(const std::function<double(double)>& fwd,
                       const std::function<double(double)>& deriv, double target, double guess) {
  double x = guess;
  for (int it = 0; it < 64; ++it) {
    const double r = fwd(x) - target;
    if (std::abs(r) < 1e-13 * (1.0 + std::abs(target))) return x;
    x -= r / deriv(x);
  }
  throw std::runtime_error("normal_chart: inversion did not converge");
}

NormalChart chart_1d_arclength(const MetricField& metric, const RealVector& q0, double radius) {
  const double c = q0(0);
  auto sqrtg = [metric](double q) {
    RealVector qq(1);
    qq(0) = q;
    return std::sqrt(metric.g(qq)(0, 0));
  };
  auto fwd = [sqrtg, c](double q) { return integrate(sqrtg, c, q, 1e-12); };

  NormalChart chart;
  chart.dim = 1;
  chart.center = q0;
  chart.radius = radius;
  chart.from_manifold = [fwd](const RealVector& q) {
    RealVector qt(1);
    qt(0) = fwd(q(0));
    return qt;
  };
  chart.to_manifold = [fwd, sqrtg, c](const RealVector& qt) {
    RealVector q(1);
    q(0) = invert_monotone(fwd, sqrtg, qt(0), c + qt(0) / sqrtg(c));
    return q;
  };
  // Arclength reparameterization makes the pulled-back 1D metric exactly 1.
  chart.g = [](const RealVector&) { return RealMatrix::Identity(1, 1); };
  chart.dg = [](const RealVector&) { return MetricDeriv(1, RealMatrix::Zero(1, 1)); };
  return chart;
}

struct GeodesicResult {
  RealVector q;
  RealMatrix dq_dv0;  // endpoint sensitivity to the initial velocity
};

// Geodesic flow q'' = -Gamma(q)(q',q') integrated to t=1 with fixed-step RK4,
// together with the variational system for d(endpoint)/d(initial velocity).
GeodesicResult shoot_geodesic(const MetricField& metric, const RealVector& q0,
                              const RealVector& v0, int steps) {
  const int d = metric.dim;
  struct State {
    RealVector q, v;
    RealMatrix Jq, Jv;
  };
  auto rhs = [&](const State& s) {
    const auto gamma = christoffel(metric, s.q);
    const auto dgamma = christoffel_deriv(metric, s.q);
    State out;
    out.q = s.v;
    out.v = RealVector::Zero(d);
    for (int l = 0; l < d; ++l) out.v(l) = -s.v.dot(gamma[l] * s.v);
    out.Jq = s.Jv;
    out.Jv = RealMatrix::Zero(d, d);
    for (int c = 0; c < d; ++c) {
      const RealVector jq = s.Jq.col(c), jv = s.Jv.col(c);
      for (int l = 0; l < d; ++l) {
        double a = 0;
        for (int m = 0; m < d; ++m) a -= jq(m) * s.v.dot(dgamma[m][l] * s.v);
        a -= 2.0 * jv.dot(gamma[l] * s.v);
        out.Jv(l, c) = a;
      }
    }
    return out;
  };
  auto axpy = [](const State& s, double dt, const State& k) {
    return State{s.q + dt * k.q, s.v + dt * k.v, s.Jq + dt * k.Jq, s.Jv + dt * k.Jv};
  };

  State s{q0, v0, RealMatrix::Zero(d, d), RealMatrix::Identity(d, d)};
  const double dt = 1.0 / steps;
  for (int i = 0; i < steps; ++i) {
    const State k1 = rhs(s);
    const State k2 = rhs(axpy(s, 0.5 * dt, k1));
    const State k3 = rhs(axpy(s, 0.5 * dt, k2));
    const State k4 = rhs(axpy(s, dt, k3));
    s.q += dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
    s.v += dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    s.Jq += dt / 6.0 * (k1.Jq + 2.0 * k2.Jq + 2.0 * k3.Jq + k4.Jq);
    s.Jv += dt / 6.0 * (k1.Jv + 2.0 * k2.Jv + 2.0 * k3.Jv + k4.Jv);
  }
  return GeodesicResult{s.q, s.Jq};
}

NormalChart chart_2d_geodesic(const MetricField& metric, const RealVector& q0, double radius) {
  const int d = 2;
  const int steps = 400;
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(metric.g(q0));
  if (es.eigenvalues().minCoeff() <= 0)
    throw std::runtime_error("normal_chart: non-SPD metric at center");
  const RealMatrix E = es.operatorInverseSqrt();  // orthonormal frame at q0
  const RealMatrix Einv = E.inverse();

  auto forward_full = [metric, q0, E, steps](const RealVector& qt) {
    GeodesicResult r = shoot_geodesic(metric, q0, E * qt, steps);
    r.dq_dv0 = r.dq_dv0 * E;  // chain rule v0 = E qt
    return r;
  };
  auto forward = [forward_full](const RealVector& qt) { return forward_full(qt).q; };
  auto backward = [forward_full, Einv, q0](const RealVector& q) {
    RealVector qt = Einv * RealVector(q - q0);  // frame-linearized first guess
    for (int it = 0; it < 60; ++it) {
      const GeodesicResult r = forward_full(qt);
      const RealVector res = r.q - q;
      if (res.norm() < 1e-12) return qt;
      qt -= r.dq_dv0.lu().solve(res);
    }
    throw std::runtime_error("normal_chart: geodesic inversion did not converge");
  };
  auto pulled_metric = [metric, forward_full](const RealVector& qt) {
    const GeodesicResult r = forward_full(qt);
    const RealMatrix gq = metric.g(r.q);
    RealMatrix gt = r.dq_dv0.transpose() * gq * r.dq_dv0;
    return RealMatrix(0.5 * (gt + gt.transpose()));
  };

  NormalChart chart;
  chart.dim = d;
  chart.center = q0;
  chart.radius = radius;
  chart.to_manifold = forward;
  chart.from_manifold = backward;
  chart.g = pulled_metric;
  chart.dg = [pulled_metric, d](const RealVector& qt) {
    // 5-point stencil; pulled_metric is accurate to the integrator tolerance.
    const double h = 1e-3;
    MetricDeriv dgt(d, RealMatrix::Zero(d, d));
    for (int k = 0; k < d; ++k) {
      RealVector q1 = qt, q2 = qt, q3 = qt, q4 = qt;
      q1(k) -= 2 * h;
      q2(k) -= h;
      q3(k) += h;
      q4(k) += 2 * h;
      dgt[k] = (pulled_metric(q1) - 8.0 * pulled_metric(q2) + 8.0 * pulled_metric(q3) -
                pulled_metric(q4)) /
               (12.0 * h);
    }
    return dgt;
  };
  return chart;
}

}  // namespace

NormalChart normal_chart(const MetricField& metric, const RealVector& q0, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("normal_chart: radius must be positive");
  NormalChart chart = (metric.dim == 1) ? chart_1d_arclength(metric, q0, radius)
                                        : chart_2d_geodesic(metric, q0, radius);
  const ChartCertificate cert = certify_chart(chart, 5);
  if (cert.origin_metric_defect > 1e-8 || cert.origin_dmetric_defect > 1e-8)
    throw std::runtime_error("normal_chart: radius exceeds chart validity");
  return chart;
}

NormalChart linear_chart(const MetricField& metric, const RealVector& q0, double radius) {
  const int d = metric.dim;
  const MetricDeriv dg0 = metric.dg(q0);
  double defect = 0;
  for (int k = 0; k < d; ++k) defect = std::max(defect, dg0[k].cwiseAbs().maxCoeff());
  if (defect > 1e-10)
    throw std::invalid_argument("linear_chart: dg(q0) != 0, normal-coordinate estimates fail");
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(metric.g(q0));
  if (es.eigenvalues().minCoeff() <= 0)
    throw std::runtime_error("linear_chart: non-SPD metric at center");
  const RealMatrix S = es.operatorSqrt().inverse();  // q = q0 + S qt
  NormalChart chart;
  chart.dim = d;
  chart.center = q0;
  chart.radius = radius;
  chart.to_manifold = [q0, S](const RealVector& qt) { return RealVector(q0 + S * qt); };
  chart.from_manifold = [q0, S](const RealVector& q) {
    return RealVector(S.lu().solve(RealVector(q - q0)));
  };
  chart.g = [metric, q0, S](const RealVector& qt) {
    return RealMatrix(S.transpose() * metric.g(q0 + S * qt) * S);
  };
  chart.dg = [metric, q0, S, d](const RealVector& qt) {
    const MetricDeriv dgq = metric.dg(q0 + S * qt);
    MetricDeriv out(d, RealMatrix::Zero(d, d));
    for (int k = 0; k < d; ++k) {
      RealMatrix acc = RealMatrix::Zero(d, d);  // d/dqt^k = sum_a S_ak d/dq^a
      for (int a = 0; a < d; ++a) acc += S(a, k) * dgq[a];
      out[k] = S.transpose() * acc * S;
    }
    return out;
  };
  return chart;
}

ChartCertificate certify_chart(const NormalChart& chart, int samples_per_axis) {
  ChartCertificate cert;
  const int d = chart.dim;
  const RealVector origin = RealVector::Zero(d);
  const RealMatrix g0 = chart.g(origin);
  cert.origin_metric_defect = (g0 - RealMatrix::Identity(d, d)).cwiseAbs().maxCoeff();
  const MetricDeriv dg0 = chart.dg(origin);
  for (int k = 0; k < d; ++k)
    cert.origin_dmetric_defect = std::max(cert.origin_dmetric_defect, dg0[k].cwiseAbs().maxCoeff());

  auto visit = [&](const RealVector& qt) {
    const double r = qt.norm();
    if (r < 1e-6 || r > chart.radius) return;
    const RealMatrix gt = chart.g(qt);
    const double mdef = (gt - RealMatrix::Identity(d, d)).cwiseAbs().maxCoeff();
    cert.metric_error_constant = std::max(cert.metric_error_constant, mdef / (r * r));
    double cdef = 0;
    for (const RealMatrix& gm : chart.christoffel(qt)) cdef = std::max(cdef, gm.cwiseAbs().maxCoeff());
    cert.christoffel_constant = std::max(cert.christoffel_constant, cdef / r);
  };

  for (int i = 0; i < samples_per_axis; ++i) {
    const double x = -chart.radius + 2.0 * chart.radius * i / (samples_per_axis - 1);
    if (d == 1) {
      RealVector qt(1);
      qt(0) = x;
      visit(qt);
    } else {
      for (int j = 0; j < samples_per_axis; ++j) {
        RealVector qt(2);
        qt(0) = x;
        qt(1) = -chart.radius + 2.0 * chart.radius * j / (samples_per_axis - 1);
        visit(qt);
      }
    }
  }
  return cert;
}

std::vector<double> ScaledCoeffs::freeze(const RealVector& q) const {
  std::vector<double> out(dim * dim * dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) out[(i * dim + j) * dim + k] = f(q, i, j, k);
  return out;
}

double ScaledCoeffs::freeze1(const RealVector& q) const { return f(q, 0, 0, 0); }

namespace {

// All d^3 components of f at one chart point; shares the tensor evaluations.
std::vector<double> scaled_f_point(const NormalChart& chart, int ell, const RealVector& q) {
  const int d = chart.dim;
  const double s = std::pow(2.0, -ell);
  const RealVector qs = s * q;
  const RealMatrix gt = chart.g(qs);
  const RealMatrix gi = chart.ginv(qs);
  const MetricDeriv dgt = chart.dg(qs);
  const auto gamma = christoffel_from(gi, dgt, d);
  std::vector<RealMatrix> dginv(d);
  for (int m = 0; m < d; ++m) dginv[m] = -gi * dgt[m] * gi;

  std::vector<double> out(d * d * d);
  const double two_ell = std::pow(2.0, ell);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) {
        double v = 0;
        for (int np = 0; np < d; ++np) {
          double gam = 0;
          for (int n = 0; n < d; ++n) gam += gamma[np](i, n) * gi(n, k);
          v += gt(np, j) * (dginv[i](k, np) + gam);
        }
        out[(i * d + j) * d + k] = two_ell * v;
      }
  return out;
}

}  // namespace

ScaledCoeffs scaled_coeffs(const NormalChart& chart, int ell, double A, double chat,
                           int samples_per_axis) {
  const int d = chart.dim;
  if (std::pow(2.0, -ell) * chat * A > chart.radius)
    throw std::invalid_argument("scaled_coeffs: chart too small for 2^-ell * A ball");

  ScaledCoeffs sc;
  sc.ell = ell;
  sc.A = A;
  sc.dim = d;
  sc.chat = chat;
  sc.f = [chart, ell, d](const RealVector& q, int i, int j, int k) {
    return scaled_f_point(chart, ell, q)[(i * d + j) * d + k];
  };

  double sup = 0;
  auto visit = [&](const RealVector& q) {
    if (q.norm() > chat * A) return;
    for (double v : scaled_f_point(chart, ell, q)) sup = std::max(sup, std::abs(v));
  };
  for (int i = 0; i < samples_per_axis; ++i) {
    const double x = -chat * A + 2.0 * chat * A * i / (samples_per_axis - 1);
    if (d == 1) {
      RealVector q(1);
      q(0) = x;
      visit(q);
    } else {
      for (int j = 0; j < samples_per_axis; ++j) {
        RealVector q(2);
        q(0) = x;
        q(1) = -chat * A + 2.0 * chat * A * j / (samples_per_axis - 1);
        visit(q);
      }
    }
  }
  sc.sup_bound = sup;
  sc.c1 = sup / A;
  return sc;
}

}  // namespace gkfp
