#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gkfp/estimates.hpp"
#include "gkfp/geometry.hpp"
#include "gkfp/rng.hpp"

#include <cmath>

using namespace gkfp;

TEST_CASE("extremal constants from quadratic form bundles") {
  HermiteBasis b = HermiteBasis::make(1, 16);
  const Matrix num = op_number(b).matrix;
  const Matrix eye = Matrix::Identity(b.dim(), b.dim());
  SUBCASE("R = L gives C* = 1") {
    QuadraticFormBundle bundle;
    bundle.L = num + eye;
    bundle.rhs = {num + eye};
    bundle.weights = {1.0};
    CHECK(min_constant(bundle).c == doctest::Approx(1.0).epsilon(1e-11));
  }
  SUBCASE("R = 2L gives C* = 4") {
    QuadraticFormBundle bundle;
    bundle.L = num + eye;
    bundle.rhs = {2.0 * (num + eye)};
    bundle.weights = {1.0};
    CHECK(min_constant(bundle).c == doctest::Approx(4.0).epsilon(1e-11));
  }
  SUBCASE("diagonal ratio maximization oracle") {
    // R = O, L = 1 + O: C* = max_n (n+1/2)^2/(n+3/2)^2 over n <= N-1
    QuadraticFormBundle bundle;
    bundle.L = num + eye;
    bundle.rhs = {num};
    bundle.weights = {1.0};
    double oracle = 0;
    for (int n = 0; n < b.cutoff; ++n)
      oracle = std::max(oracle, std::pow(n + 0.5, 2) / std::pow(n + 1.5, 2));
    const double frozen = std::pow(b.cutoff - 1 + 0.5, 2) / std::pow(b.cutoff + 0.5, 2);
    CHECK(oracle == frozen);
    MinConstantResult res = min_constant(bundle);
    CHECK(res.c == doctest::Approx(frozen).epsilon(1e-10));
    CHECK(res.c < 1.0);
    // maximizer concentrates on the top mode
    CHECK(std::norm(res.maximizer(b.cutoff - 1)) > 0.99);
  }
  SUBCASE("monotone nonincreasing as weights decrease") {
    QuadraticFormBundle bundle;
    bundle.L = num + eye;
    bundle.rhs = {num, op_position(b, 0).matrix};
    bundle.weights = {1.0, 1.0};
    const double c1 = min_constant(bundle).c;
    bundle.weights = {0.5, 1.0};
    const double c2 = min_constant(bundle).c;
    bundle.weights = {0.5, 0.25};
    const double c3 = min_constant(bundle).c;
    CHECK(c2 <= c1 + 1e-12);
    CHECK(c3 <= c2 + 1e-12);
  }
  SUBCASE("negative weights rejected") {
    QuadraticFormBundle bundle;
    bundle.L = eye;
    bundle.rhs = {num};
    bundle.weights = {-1.0};
    CHECK_THROWS_AS(min_constant(bundle), std::invalid_argument);
  }
  SUBCASE("lanczos path agrees with the dense path") {
    // dimension above the dense threshold
    HermiteBasis big = HermiteBasis::make(1, 450);
    const Matrix bign = op_number(big).matrix;
    const Matrix bige = Matrix::Identity(big.dim(), big.dim());
    QuadraticFormBundle bundle;
    bundle.L = bign + bige;
    bundle.rhs = {bign};
    bundle.weights = {1.0};
    const double frozen = std::pow(449.5, 2) / std::pow(450.5, 2);
    CHECK(min_constant(bundle).c == doctest::Approx(frozen).epsilon(1e-9));
  }
}

TEST_CASE("complex airy bound") {
  SUBCASE("xi = lambda = 0 is dominated by the free resolvent: C0 <= 3") {
    PGrid g = PGrid::make(12.0, 256, PGrid::Boundary::dirichlet);
    EstimateReport rep = airy_bound(0.0, 0.0, g);
    CHECK(rep.empirical_constant <= 3.0);
    CHECK(rep.pass);
  }
  SUBCASE("sweep cells finite with interior maximizers") {
    for (double xi : {1.0, 16.0}) {
      for (double lambda : {0.0, 4.0}) {
        PGrid g = airy_window(xi, lambda, 384);
        EstimateReport rep = airy_bound(xi, lambda, g);
        CHECK(std::isfinite(rep.empirical_constant));
        CHECK(rep.empirical_constant > 0.0);
        CHECK(rep.pass);  // maximizer mass away from the window edge
      }
    }
  }
  SUBCASE("resolvent obeys the exact unitary scaling relation") {
    const int M = 384;
    const double base = resolvent_norm(op_airy_grid(PGrid::make(12.0, M), 1.0, 0.0),
                                       Complex(0, 0));
    for (double xi : {4.0, 64.0}) {
      PGrid g = PGrid::make(12.0 * std::pow(xi, -1.0 / 3.0), M);
      const double rn = resolvent_norm(op_airy_grid(g, xi, 0.0), Complex(0, 0));
      CHECK(std::abs(rn - std::pow(xi, -2.0 / 3.0) * base) < 1e-6 * rn);
    }
  }
}

TEST_CASE("euclidean subelliptic bound") {
  HermiteBasis b = HermiteBasis::make(1, 48);
  SUBCASE("b = h = 1, xi = lambda = 0 is finite") {
    RealVector xi = RealVector::Zero(1);
    EstimateReport rep = euclid_bound(1.0, 1.0, xi, 0.0, b);
    CHECK(rep.pass);
    CHECK(rep.empirical_constant > 0.0);
    CHECK(rep.empirical_constant < 1e4);
  }
  SUBCASE("unitary rescaling to (1,1) preserves the constant to 1%") {
    RealVector xi(1);
    xi(0) = 1.0;
    const double lambda = 2.0;
    const double base = euclid_bound(1.0, 1.0, xi, lambda, b).empirical_constant;
    for (auto [bb, hh] : std::vector<std::pair<double, double>>{{4.0, 0.25}, {0.5, 2.0}}) {
      // matched fiber: xi scaled by sqrt(h/b), lambda by 1/b
      RealVector xis = std::sqrt(hh / bb) * xi;
      const double c = euclid_bound(bb, hh, xis, lambda / bb, b).empirical_constant;
      CHECK(std::abs(c - base) / base < 0.01);
    }
  }
  SUBCASE("lambda sweep stays bounded") {
    RealVector xi(1);
    xi(0) = 2.0;
    double sup = 0;
    for (double lambda : {-64.0, -4.0, 0.0, 4.0, 64.0})
      sup = std::max(sup, euclid_bound(1.0, 1.0, xi, lambda, b).empirical_constant);
    CHECK(std::isfinite(sup));
    CHECK(sup < 1e4);
  }
}

TEST_CASE("resolvent norms") {
  SUBCASE("normal diagonal operator: 1/dist to the spectrum") {
    HermiteBasis b = HermiteBasis::make(1, 12);
    FiberOperator num = op_number(b);
    const Complex z(0.2, 0.4);
    double dist = 1e300;
    for (int n = 0; n < 12; ++n) dist = std::min(dist, std::abs(Complex(n + 0.5, 0) - z));
    CHECK(resolvent_norm(num, z) == doctest::Approx(1.0 / dist).epsilon(1e-10));
  }
  SUBCASE("oscillator at the origin: 2/d") {
    for (int d : {1, 2}) {
      HermiteBasis b = HermiteBasis::make(d, 8);
      CHECK(resolvent_norm(op_number(b), Complex(0, 0)) ==
            doctest::Approx(2.0 / d).epsilon(1e-12));
    }
  }
  SUBCASE("numerically singular shift rejected") {
    HermiteBasis b = HermiteBasis::make(1, 8);
    CHECK_THROWS_AS(resolvent_norm(op_number(b), Complex(0.5, 0)), std::runtime_error);
  }
}

TEST_CASE("scaling exponent fits") {
  SUBCASE("exact power laws") {
    std::vector<double> xs = {1, 2, 4, 8, 16}, ys;
    for (double x : xs) ys.push_back(std::pow(x, -2.0 / 3.0));
    FitResult f = exponent_fit(xs, ys);
    CHECK(f.slope == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
    CHECK(f.stderr_ < 1e-12);
    for (size_t i = 0; i < xs.size(); ++i) ys[i] = 3.7 * xs[i] * xs[i];
    f = exponent_fit(xs, ys);
    CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("input validation") {
    std::vector<double> xs = {1, 2, 3}, ys = {1, 2, 3};
    CHECK_THROWS_AS(exponent_fit(xs, ys), std::invalid_argument);
    std::vector<double> xs4 = {1, 2, 3, 4}, bad = {1, -2, 3, 4};
    CHECK_THROWS_AS(exponent_fit(xs4, bad), std::invalid_argument);
  }
  SUBCASE("airy resolvent sweep recovers the -2/3 exponent") {
    HermiteBasis b = HermiteBasis::make(1, 384);
    const Matrix D = op_deriv(b, 0).matrix;
    const Matrix half_lap = 0.5 * (D.transpose() * D);
    std::vector<double> xs, ys;
    for (double xi : {4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0}) {
      FiberOperator op;
      op.rep = RepInfo::hermite(b);
      op.matrix = Complex(0, xi) * op_position(b, 0).matrix + half_lap;
      xs.push_back(xi);
      ys.push_back(resolvent_norm(op, Complex(0, 0)));
    }
    FitResult f = exponent_fit(xs, ys);
    CHECK(std::abs(f.slope + 2.0 / 3.0) < 0.02);
  }
}

TEST_CASE("oscillator comparison") {
  HermiteBasis b = HermiteBasis::make(2, 12);
  SUBCASE("identical metrics give C = 1 and zero difference") {
    RealMatrix g = RealMatrix::Identity(2, 2);
    OscillatorCompareReport rep = oscillator_compare(g, g, b);
    CHECK(rep.c_both == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.diff_constant == 0.0);
  }
  SUBCASE("doubled metric: bounded constant, stable under cutoff growth") {
    RealMatrix g1 = RealMatrix::Identity(2, 2);
    RealMatrix g2 = 2.0 * g1;
    OscillatorCompareReport r1 = oscillator_compare(g1, g2, HermiteBasis::make(2, 10));
    OscillatorCompareReport r2 = oscillator_compare(g1, g2, HermiteBasis::make(2, 20));
    CHECK(r1.c_both < 10.0);
    CHECK(std::abs(r2.c_both - r1.c_both) / r1.c_both < 0.05);
  }
  SUBCASE("difference bound is linear in the metric separation") {
    RealMatrix g1 = RealMatrix::Identity(2, 2);
    RealMatrix e(2, 2);
    e << 0.4, 0.1, 0.1, 0.7;
    std::vector<double> ts = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}, diffs;
    for (double t : ts) {
      RealMatrix g2 = g1 + t * e;
      OscillatorCompareReport rep = oscillator_compare(g1, g2, b);
      diffs.push_back(rep.diff_constant * (g2 - g1).norm());
    }
    FitResult f = exponent_fit(ts, diffs);
    CHECK(std::abs(f.slope - 1.0) < 0.05);
  }
  SUBCASE("non-SPD input rejected") {
    RealMatrix g1 = RealMatrix::Identity(2, 2);
    RealMatrix bad = -g1;
    CHECK_THROWS(oscillator_compare(g1, bad, b));
  }
}

TEST_CASE("refined accretivity floors on the shell") {
  PGrid g = PGrid::make(10.0, 320, PGrid::Boundary::dirichlet);
  SUBCASE("flat case f = 0: both floors hold") {
    for (double bb : {0.5, 1.0, 4.0}) {
      GkfpParams pars = GkfpParams::from_ell(bb, 0);
      pars.kappa_b = 1.0;
      RefinedAccretivityReport rep = refined_accretivity(pars, 1.0, 0.0, g);
      CHECK(rep.pass);
      CHECK(rep.margin_real >= -1e-12);
    }
  }
  SUBCASE("margin independent of lambda to 1e-12") {
    GkfpParams p1 = GkfpParams::from_ell(2.0, 0);
    p1.kappa_b = 2.0;
    GkfpParams p2 = p1;
    p2.lambda = 37.5;
    RefinedAccretivityReport r1 = refined_accretivity(p1, 1.0, 0.05, g);
    RefinedAccretivityReport r2 = refined_accretivity(p2, 1.0, 0.05, g);
    CHECK(std::abs(r1.margin_real - r2.margin_real) < 1e-12);
  }
  SUBCASE("A sweep locates the kappa threshold") {
    // fixed kappa_b; the frozen f grows linearly with A and the Hermitian
    // floor minimizes at p = h f b^2, so the margin crosses zero near
    // f = sqrt(2 kappa)/b (A around 1 for these parameters)
    const double bb = 64.0, c1 = 0.0368;
    std::vector<double> margins;
    bool found_negative = false;
    double a_cross = 0;
    for (double A : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      GkfpParams pars = GkfpParams::from_ell(bb, 0);
      pars.kappa_b = 3.0;
      RefinedAccretivityReport rep = refined_accretivity(pars, A, c1 * A, g);
      margins.push_back(rep.margin_real);
      if (!found_negative && rep.margin_real < 0) {
        found_negative = true;
        a_cross = A;
      }
    }
    CHECK(found_negative);
    // the paper-safe region kappa >= 1 + 16 c1 A b ends near A = 0.05 here;
    // the empirical crossing sits strictly beyond it
    CHECK(a_cross > 0.06);
    for (size_t i = 1; i < margins.size(); ++i) CHECK(margins[i] <= margins[i - 1] + 1e-12);
  }
  SUBCASE("paper rule kappa_b = 1 + 16 c1 A b leaves no negative margins") {
    const double c1 = 0.0368;
    for (double bb : {8.0, 64.0}) {
      for (double A : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        GkfpParams pars = GkfpParams::from_ell(bb, 0);
        pars.kappa_b = 1.0 + 16.0 * c1 * A * bb;
        RefinedAccretivityReport rep = refined_accretivity(pars, A, c1 * A, g);
        CHECK(rep.pass);
      }
    }
  }
}

TEST_CASE("fiber spectra") {
  SUBCASE("xi = 0 is the exact ladder") {
    HermiteBasis b = HermiteBasis::make(1, 24);
    RealVector xi = RealVector::Zero(1);
    const auto eig = fiber_spectrum(xi, b);
    for (int n = 0; n < 24; ++n) CHECK(std::abs(eig[n] - Complex(n + 0.5, 0)) < 1e-12);
  }
  SUBCASE("spectrum invariant under xi -> -xi") {
    HermiteBasis b = HermiteBasis::make(1, 32);
    RealVector xp(1), xm(1);
    xp(0) = 1.5;
    xm(0) = -1.5;
    const auto ep = fiber_spectrum(xp, b);
    const auto em = fiber_spectrum(xm, b);
    for (int n = 0; n < 10; ++n) CHECK(std::abs(ep[n] - em[n]) < 1e-9);
  }
  SUBCASE("quad-precision route matches the completion of the square") {
    for (double xi : {0.0, 1.0, 2.0, 4.0}) {
      const int cutoff = fiber_cutoff_for(xi, 33);
      const auto eig = fiber_spectrum_accurate(xi, 33, cutoff);
      double worst = 0;
      for (int n = 0; n <= 32; ++n)
        worst = std::max(worst, std::abs(eig[n] - (n + 0.5 + xi * xi / 2.0)));
      CHECK(worst < 1e-6);
    }
  }
  SUBCASE("window too small is detected") {
    CHECK_THROWS_AS(fiber_spectrum_accurate(4.0, 33, 64), std::runtime_error);
  }
}

TEST_CASE("resolvent product along the imaginary axis stays bounded") {
  // sup_xi ||(fiber(xi) - i lambda)^{-1}|| times (lambda/<p_0>)^{2/3} has no
  // growth trend over lambda in [8, 512]; the quasimode causing the sup sits
  // near p_0 = lambda/xi, so the momentum bracket enters exactly as in the
  // weighted resolvent term of the subelliptic estimate.
  HermiteBasis b = HermiteBasis::make(1, 96);
  const Matrix D = op_deriv(b, 0).matrix;
  const Matrix P = op_position(b, 0).matrix;
  const Matrix osc = -0.5 * (D * D) + 0.5 * (P * P);
  std::vector<double> lambdas = {8, 32, 128, 512}, products;
  for (double lambda : lambdas) {
    double best = 0;
    for (double factor : {0.125, 0.25, 0.5, 1.0, 2.0}) {
      const double xi = lambda * factor;
      FiberOperator op;
      op.rep = RepInfo::hermite(b);
      op.matrix = osc + Complex(0, xi) * P;
      const double p0 = 1.0 / factor;
      const double weight = std::pow(lambda, 2.0 / 3.0) / std::pow(1.0 + p0 * p0, 1.0 / 3.0);
      best = std::max(best, resolvent_norm(op, Complex(0, lambda)) * weight);
    }
    products.push_back(best);
  }
  FitResult f = exponent_fit(lambdas, products);
  CHECK(std::abs(f.slope) < 0.1);
  double lo = 1e300, hi = 0;
  for (double v : products) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi / lo < 4.0);
}
