#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gkfp/rng.hpp"
#include "gkfp/sobolev.hpp"

#include <cmath>

using namespace gkfp;

namespace {

PhasePoint random_point(CounterRng& rng, int d, double scale) {
  PhasePoint X;
  X.q = scale * rng.gaussian_vector(d);
  X.p = scale * rng.gaussian_vector(d);
  X.xi = scale * rng.gaussian_vector(d);
  X.eta = scale * rng.gaussian_vector(d);
  return X;
}

FiberField random_field(CounterRng& rng, const HermiteBasis& basis, const RealVector& xi,
                        int active_modes) {
  FiberField u;
  u.p_dims = basis.p_dims;
  u.cutoff = basis.cutoff;
  u.xi = xi;
  u.coef = Matrix::Zero(basis.dim(), xi.size());
  for (long k = 0; k < xi.size(); ++k)
    for (int n = 0; n < active_modes; ++n) u.coef(n, k) = Complex(rng.gaussian(), rng.gaussian());
  u.coef /= u.coef.norm();
  return u;
}

}  // namespace

TEST_CASE("phase-space weight and metric") {
  SUBCASE("weight at the origin and per-axis composition") {
    PhasePoint X = PhasePoint::zero(2);
    CHECK(psi_weight(X) == 1.0);
    PhasePoint T = PhasePoint::zero(2);
    T.q(0) = 1;
    T.p(0) = 1;
    T.xi(0) = 1;
    T.eta(0) = 1;
    CHECK(gpsi_form(X, T) == doctest::Approx(4.0).epsilon(1e-15));
  }
  SUBCASE("Psi >= 1 everywhere") {
    CounterRng rng(11, 0);
    for (int i = 0; i < 1000; ++i) CHECK(psi_weight(random_point(rng, 2, 5.0)) >= 1.0);
  }
  SUBCASE("replacing Psi by 4 Psi divides the xi term by 16") {
    CounterRng rng(12, 0);
    PhasePoint X = random_point(rng, 2, 2.0);
    PhasePoint T = PhasePoint::zero(2);
    T.xi = rng.gaussian_vector(2);
    const double psi = psi_weight(X);
    CHECK(gpsi_form(X, T) == doctest::Approx(T.xi.squaredNorm() / (psi * psi)).epsilon(1e-14));
    const double with_4psi = T.xi.squaredNorm() / (16.0 * psi * psi);
    CHECK(gpsi_form(X, T) / 16.0 == doctest::Approx(with_4psi).epsilon(1e-14));
  }
  SUBCASE("symplectic dual satisfies g^sigma = Psi^2 g") {
    // dual of a diagonal metric: pairs (q,xi) and (p,eta) swap and invert
    CounterRng rng(13, 0);
    for (int trial = 0; trial < 100; ++trial) {
      PhasePoint X = random_point(rng, 2, 3.0);
      PhasePoint T = random_point(rng, 2, 1.0);
      const double psi = psi_weight(X);
      const double dual = T.xi.squaredNorm() + psi * psi * T.q.squaredNorm() +
                          psi * (T.p.squaredNorm() + T.eta.squaredNorm());
      CHECK(dual == doctest::Approx(psi * psi * gpsi_form(X, T)).epsilon(1e-12));
    }
  }
  SUBCASE("log Psi is convex in the log of the ray parameter") {
    // d log Psi / d log t is nondecreasing along each coordinate ray
    for (int axis = 0; axis < 3; ++axis) {
      double prev_slope = -1;
      for (int i = 0; i < 1000; ++i) {
        const double t = std::pow(10.0, -2.0 + 4.0 * i / 999.0);
        auto at = [&](double tt) {
          PhasePoint X = PhasePoint::zero(1);
          if (axis == 0) X.p(0) = tt;
          if (axis == 1) X.xi(0) = tt;
          if (axis == 2) X.eta(0) = tt;
          return std::log(psi_weight(X));
        };
        const double slope = (at(t * 1.001) - at(t)) / std::log(1.001);
        CHECK(slope >= prev_slope - 1e-6);
        prev_slope = slope;
      }
    }
  }
}

TEST_CASE("slowness at R = 2^12") {
  CounterRng rng(21, 0);
  const double R = 4096.0;
  SUBCASE("coincident points give ratio 1") {
    PhasePoint X = random_point(rng, 2, 4.0);
    SlownessResult res = slowness_check(X, X, R);
    CHECK(res.premise);
    CHECK(res.ratio == 1.0);
    CHECK(res.pass);
  }
  SUBCASE("1e5 random pairs satisfying the premise: zero failures") {
    int failures = 0, tested = 0;
    for (int i = 0; i < 100000; ++i) {
      PhasePoint X = random_point(rng, 1, std::pow(10.0, 2.0 * rng.uniform()));
      PhasePoint D = random_point(rng, 1, 1.0);
      const double norm = std::sqrt(gpsi_form(X, D));
      const double target = (0.999 * rng.uniform()) / R;
      PhasePoint Xp = X;
      const double c = target / std::max(norm, 1e-300);
      Xp.q += c * D.q;
      Xp.p += c * D.p;
      Xp.xi += c * D.xi;
      Xp.eta += c * D.eta;
      SlownessResult res = slowness_check(X, Xp, R);
      if (res.premise) {
        ++tested;
        if (!res.pass) ++failures;
      }
    }
    CHECK(tested > 90000);
    CHECK(failures == 0);
  }
  SUBCASE("pairs violating the premise are filtered, not failed") {
    PhasePoint X = PhasePoint::zero(1);
    PhasePoint Xp = X;
    Xp.xi(0) = 1e6;
    SlownessResult res = slowness_check(X, Xp, R);
    CHECK(!res.premise);
    CHECK(res.pass);
  }
  SUBCASE("R below 2^12 rejected") {
    PhasePoint X = PhasePoint::zero(1);
    CHECK_THROWS_AS(slowness_check(X, X, 64.0), std::invalid_argument);
  }
}

TEST_CASE("temperance with the explicit constant 64 (1+|X-X'|^2)^3") {
  CounterRng rng(22, 0);
  SUBCASE("coincident points") {
    PhasePoint X = random_point(rng, 2, 4.0);
    TemperanceResult res = temperance_check(X, X);
    CHECK(res.lhs == 1.0);
    CHECK(res.rhs == 64.0);
    CHECK(res.pass);
  }
  SUBCASE("1e5 random gaussian pairs at scale 10: zero failures") {
    int failures = 0;
    for (int i = 0; i < 100000; ++i) {
      PhasePoint X = random_point(rng, 1, 10.0);
      PhasePoint Xp = random_point(rng, 1, 10.0);
      if (!temperance_check(X, Xp).pass) ++failures;
    }
    CHECK(failures == 0);
  }
  SUBCASE("xi-only displacement has measurable slack") {
    PhasePoint X = PhasePoint::zero(1);
    PhasePoint Xp = X;
    Xp.xi(0) = 7.0;
    TemperanceResult res = temperance_check(X, Xp);
    CHECK(res.pass);
    CHECK(res.lhs <= 64.0 * std::pow(1.0 + 49.0, 3));
    CHECK(res.rhs / res.lhs > 1.0);
  }
}

TEST_CASE("per-fiber W^2 operator") {
  HermiteBasis b = HermiteBasis::make(1, 24);
  SUBCASE("diagonal value at xi = 0, C_g = 1") {
    RealVector xi = RealVector::Zero(1);
    FiberOperator w2 = w2_fiber(xi, 1.0, b);
    for (int n = 0; n < b.cutoff; ++n) {
      const double o = n + 0.5;
      CHECK(std::real(w2.matrix(n, n)) == doctest::Approx(1.0 + o * o).epsilon(1e-15));
    }
  }
  SUBCASE("commutes with the oscillator exactly") {
    RealVector xi(1);
    xi(0) = 2.5;
    FiberOperator w2 = w2_fiber(xi, 4.0, b);
    const Matrix num = op_number(b).matrix;
    CHECK((w2.matrix * num - num * w2.matrix).norm() == 0.0);
  }
  SUBCASE("minimum eigenvalue at least 1 across a xi grid") {
    for (double x : {0.0, 0.5, 2.0, 16.0}) {
      RealVector xi(1);
      xi(0) = x;
      FiberOperator w2 = w2_fiber(xi, 1.0, b);
      CHECK(w2.matrix.diagonal().real().minCoeff() >= 1.0);
    }
  }
  SUBCASE("default C_g is the smallest admissible power of two") {
    RealVector grid(3);
    grid << 0.0, 1.0, 4.0;
    CHECK(default_cg(grid, b) == 1.0);
  }
}

TEST_CASE("anisotropic Sobolev norms") {
  HermiteBasis b = HermiteBasis::make(1, 32);
  RealVector xi(5);
  xi << -2, -1, 0, 1, 2;
  CounterRng rng(31, 0);
  SUBCASE("s = 0 gives the squared L2 norm twice (both diagonal terms)") {
    FiberField u = random_field(rng, b, xi, 24);
    CHECK(norm_ws(u, 0.0) == doctest::Approx(2.0 * u.coef.squaredNorm()).epsilon(1e-12));
  }
  SUBCASE("ground state x single fourier mode") {
    FiberField u;
    u.p_dims = 1;
    u.cutoff = b.cutoff;
    u.xi = RealVector::Constant(1, 2.0);
    u.coef = Matrix::Zero(b.dim(), 1);
    u.coef(0, 0) = 1.0;
    const double s = 1.5;
    const double expected = std::pow(0.5, 2 * s) + std::pow(2.0, 2 * s);
    CHECK(norm_ws(u, s) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("norms (ii) and (iv) are equivalent with a stable constant") {
    for (int s : {1, 2}) {
      auto ratio_bounds = [&](const HermiteBasis& basis) {
        CounterRng inner(77, 10 + s);
        double lo = 1e300, hi = 0;
        for (int trial = 0; trial < 50; ++trial) {
          FiberField u = random_field(inner, basis, xi, basis.cutoff * 3 / 4);
          const double a = norm_ws(u, s);
          const double m = norm_monomial(u, s, basis);
          lo = std::min(lo, a / m);
          hi = std::max(hi, a / m);
        }
        return std::pair<double, double>(lo, hi);
      };
      const auto [lo1, hi1] = ratio_bounds(HermiteBasis::make(1, 24));
      const auto [lo2, hi2] = ratio_bounds(HermiteBasis::make(1, 48));
      CHECK(hi1 / lo1 < 1e3);
      CHECK(std::abs(hi2 - hi1) / hi1 < 0.4);
      CHECK(std::abs(lo2 - lo1) / lo1 < 0.4);
    }
  }
  SUBCASE("weighted characterization (v) equivalent to (iv)") {
    HermiteBasis basis = HermiteBasis::make(1, 24);
    CounterRng inner(78, 3);
    double lo = 1e300, hi = 0;
    for (int trial = 0; trial < 25; ++trial) {
      FiberField u = random_field(inner, basis, xi, 18);
      const double m4 = norm_monomial(u, 1, basis);
      const double m5 = norm_weighted(u, 1, basis);
      lo = std::min(lo, m4 / m5);
      hi = std::max(hi, m4 / m5);
    }
    CHECK(hi / lo < 10.0);
  }
}

TEST_CASE("two-index norms and embeddings") {
  HermiteBasis b = HermiteBasis::make(1, 32);
  RealVector xi(5);
  xi << -4, -1, 0, 1, 4;
  const double C_g = 1.0;
  CounterRng rng(41, 0);
  SUBCASE("(0,0) is the L2 norm") {
    FiberField u = random_field(rng, b, xi, 24);
    CHECK(norm_ws1s2(u, 0, 0, C_g) == doctest::Approx(u.coef.norm()).epsilon(1e-12));
  }
  SUBCASE("(1,0) on the ground-state fiber is sqrt(d/2) times the norm") {
    FiberField u;
    u.p_dims = 1;
    u.cutoff = b.cutoff;
    u.xi = RealVector::Constant(1, 3.0);
    u.coef = Matrix::Zero(b.dim(), 1);
    u.coef(0, 0) = 2.0;
    CHECK(norm_ws1s2(u, 1, 0, C_g) == doctest::Approx(std::sqrt(0.5) * 2.0).epsilon(1e-12));
  }
  SUBCASE("embedding into the zero-oscillator index holds on 100 states") {
    for (int s1 : {1, 2}) {
      CounterRng inner(42, 100 + s1);
      for (int trial = 0; trial < 100; ++trial) {
        FiberField u = random_field(inner, b, xi, 28);
        const double lhs = norm_ws1s2(u, s1, 1.0, C_g);
        const double rhs = norm_ws1s2(u, 0, 1.0 + s1 / 2.0, C_g);
        CHECK(lhs <= rhs * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("dyadic norm equivalence") {
  HermiteBasis b = HermiteBasis::make(1, 48);
  DyadicPartition part = build_dyadic();
  RealVector xi(3);
  xi << -1, 0, 2;
  SUBCASE("s = 0 quadratic identity is exact on quadrature nodes") {
    CounterRng rng(51, 0);
    Vector c = Vector::Zero(b.cutoff);
    for (int n = 0; n < 36; ++n) c(n) = Complex(rng.gaussian(), rng.gaussian());
    double whole = 0, split = 0;
    for (long k = 0; k < b.quad.nodes.size(); ++k) {
      const double p = b.quad.nodes(k);
      Complex val = 0;
      for (int n = 0; n < b.cutoff; ++n) val += c(n) * b.h_at_nodes(k, n);
      const double mass = b.quad.weights(k) * std::norm(val);
      whole += mass;
      double members = 0;
      for (int ell = -1; ell <= part.ell_max; ++ell) {
        const double th = part.member(ell, p * p);
        members += th * th;
      }
      split += mass * members;
    }
    CHECK(std::abs(whole - split) < 1e-12 * whole);
  }
  SUBCASE("state in one shell: ratio within [1/3, 3]") {
    FiberField u;
    u.p_dims = 1;
    u.cutoff = b.cutoff;
    u.xi = xi;
    u.coef = Matrix::Zero(b.dim(), xi.size());
    for (long k = 0; k < xi.size(); ++k)
      for (int n = 0; n < b.cutoff; ++n) {
        double acc = 0;
        for (long j = 0; j < b.quad.nodes.size(); ++j) {
          const double p = b.quad.nodes(j);
          acc += b.quad.weights(j) * b.h_at_nodes(j, n) * part.member(1, p * p);
        }
        u.coef(n, k) = acc;
      }
    u.coef /= u.coef.norm();
    // At s = 0 the quadratic identity makes the ratio exactly 1; the overlap
    // count (at most 3 members meet one shell) is what the bound rests on.
    DyadicNormReport rep0 = dyadic_norm_equivalence({u}, 0.0, part, b);
    CHECK(rep0.ratio > 1.0 / 3.0);
    CHECK(rep0.ratio < 3.0);
    CHECK(rep0.ratio == doctest::Approx(1.0).epsilon(1e-6));
    // At s >= 1 the two-sided constant carries the partition derivative
    // bounds, which are large for the exponential bump; finite and reported.
    DyadicNormReport rep1 = dyadic_norm_equivalence({u}, 1.0, part, b);
    CHECK(rep1.ratio > 0.0);
    CHECK(std::isfinite(rep1.ratio));
  }
  SUBCASE("constants stable under cutoff doubling for s in {1, 2}") {
    // fixed smooth state class carried at two hosting cutoffs
    auto run = [&](double s, int N) {
      HermiteBasis basis = HermiteBasis::make(1, N);
      CounterRng rng(52, 1);
      std::vector<FiberField> states;
      for (int i = 0; i < 12; ++i) states.push_back(random_field(rng, basis, xi, 16));
      return dyadic_norm_equivalence(states, s, part, basis);
    };
    for (double s : {1.0, 2.0}) {
      DyadicNormReport r1 = run(s, 24);
      DyadicNormReport r2 = run(s, 48);
      CHECK(r1.c_lower > 0.0);
      CHECK(std::isfinite(r1.c_upper));
      CHECK(std::abs(r2.c_upper - r1.c_upper) / r1.c_upper < 0.10);
      CHECK(std::abs(r2.c_lower - r1.c_lower) / r1.c_lower < 0.10);
    }
  }
}
