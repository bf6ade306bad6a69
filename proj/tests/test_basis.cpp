#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gkfp/basis.hpp"
#include "gkfp/estimates.hpp"

#include <cmath>

using namespace gkfp;

namespace {

// Independent quadrature oracle: composite Simpson integration of
// f(p) over [-L, L], no Gauss-Hermite machinery involved.
double simpson(const std::function<double(double)>& f, double L, int intervals) {
  const double h = 2.0 * L / intervals;
  double acc = f(-L) + f(L);
  for (int k = 1; k < intervals; ++k) acc += (k % 2 ? 4.0 : 2.0) * f(-L + k * h);
  return acc * h / 3.0;
}

double hermite_fn(int n, double p) { return hermite_values(n + 1, p)(n); }

// <h_m | p^j (d/dp)^c h_n> by direct integration (central difference for the
// derivative with a fine step; adequate against 1e-9 targets).
double matel_oracle(int m, int n, int pow_p, bool deriv) {
  auto f = [&](double p) {
    double v = deriv ? (hermite_fn(n, p + 5e-6) - hermite_fn(n, p - 5e-6)) / 1e-5
                     : hermite_fn(n, p);
    return hermite_fn(m, p) * std::pow(p, pow_p) * v;
  };
  return simpson(f, 12.0, 4000);
}

}  // namespace

TEST_CASE("gauss-hermite rule integrates hermite products exactly") {
  HermiteBasis b = HermiteBasis::make(1, 16);
  // quadrature order >= 2N: exact for h_m h_n p^k with m+n+k <= 2N-1
  for (int m : {0, 3, 15})
    for (int n : {0, 7, 15})
      for (int k : {0, 1}) {
        double q = 0;
        for (long i = 0; i < b.quad.nodes.size(); ++i)
          q += b.quad.weights(i) * b.h_at_nodes(i, m) * b.h_at_nodes(i, n) *
               std::pow(b.quad.nodes(i), k);
        const double reference = matel_oracle(m, n, k, false);
        CHECK(std::abs(q - reference) < 1e-9);
      }
}

TEST_CASE("basis functions orthonormal under the quadrature to 1e-12") {
  for (int N : {8, 32, 128}) {
    HermiteBasis b = HermiteBasis::make(1, N);
    double worst = 0;
    for (int m = 0; m < N; ++m)
      for (int n = m; n < N; ++n) {
        double q = 0;
        for (long i = 0; i < b.quad.nodes.size(); ++i)
          q += b.quad.weights(i) * b.h_at_nodes(i, m) * b.h_at_nodes(i, n);
        worst = std::max(worst, std::abs(q - (m == n ? 1.0 : 0.0)));
      }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("op_number is diagonal with entries sum n_j + d/2") {
  SUBCASE("d=1 ground state") {
    HermiteBasis b = HermiteBasis::make(1, 2);
    FiberOperator num = op_number(b);
    CHECK(std::real(num.matrix(0, 0)) == 0.5);
  }
  SUBCASE("d=1 ladder") {
    HermiteBasis b = HermiteBasis::make(1, 4);
    FiberOperator num = op_number(b);
    for (int n = 0; n < 4; ++n) CHECK(std::real(num.matrix(n, n)) == n + 0.5);
    CHECK((num.matrix - Matrix(num.matrix.diagonal().asDiagonal())).norm() == 0.0);
  }
  SUBCASE("d=2 additivity") {
    HermiteBasis b = HermiteBasis::make(2, 3);
    FiberOperator num = op_number(b);
    auto at = [&](int n1, int n2) {
      int modes[2] = {n1, n2};
      return std::real(num.matrix(b.flat_index(modes), b.flat_index(modes)));
    };
    CHECK(at(0, 0) == 1.0);
    CHECK(at(1, 0) == 2.0);
    CHECK(at(0, 1) == 2.0);
  }
  SUBCASE("minimum diagonal entry equals d/2") {
    for (int d : {1, 2}) {
      HermiteBasis b = HermiteBasis::make(d, 6);
      CHECK(op_number(b).matrix.diagonal().real().minCoeff() == d / 2.0);
    }
  }
}

TEST_CASE("op_position matches the quadrature oracle") {
  HermiteBasis b = HermiteBasis::make(1, 8);
  FiberOperator P = op_position(b, 0);
  // oracle-computed expected values, then frozen closed forms
  const double oracle_01 = matel_oracle(0, 1, 1, false);
  CHECK(std::abs(oracle_01 - 1.0 / std::sqrt(2.0)) < 1e-9);
  CHECK(std::abs(std::real(P.matrix(0, 1)) - 1.0 / std::sqrt(2.0)) < 1e-14);
  const double oracle_12 = matel_oracle(1, 2, 1, false);
  CHECK(std::abs(oracle_12 - 1.0) < 1e-9);
  CHECK(std::abs(std::real(P.matrix(1, 2)) - 1.0) < 1e-14);
  // exactly symmetric, only nearest-neighbor couplings
  CHECK((P.matrix - P.matrix.transpose()).norm() == 0.0);
  for (int m = 0; m < 8; ++m)
    for (int n = 0; n < 8; ++n)
      if (std::abs(m - n) != 1) CHECK(P.matrix(m, n) == Complex(0, 0));
}

TEST_CASE("op_deriv matches the quadrature oracle") {
  HermiteBasis b = HermiteBasis::make(1, 8);
  FiberOperator D = op_deriv(b, 0);
  // The oracle fixes the sign convention: <h_1 | d/dp h_0> = -1/sqrt(2)
  // (h_0 is a centered Gaussian, so h_0' = -p h_0), and antisymmetry gives
  // <h_0 | d/dp h_1> = +1/sqrt(2).
  const double oracle_10 = matel_oracle(1, 0, 0, true);
  CHECK(std::abs(oracle_10 + 1.0 / std::sqrt(2.0)) < 1e-6);
  CHECK(std::abs(std::real(D.matrix(1, 0)) + 1.0 / std::sqrt(2.0)) < 1e-14);
  const double oracle_01 = matel_oracle(0, 1, 0, true);
  CHECK(std::abs(oracle_01 - 1.0 / std::sqrt(2.0)) < 1e-6);
  CHECK(std::abs(std::real(D.matrix(0, 1)) - 1.0 / std::sqrt(2.0)) < 1e-14);
  CHECK((D.matrix + D.matrix.transpose()).norm() == 0.0);
  // parity: diagonal vanishes
  HermiteBasis b2 = HermiteBasis::make(1, 2);
  CHECK(op_deriv(b2, 0).matrix(1, 1) == Complex(0, 0));
}

TEST_CASE("op_position/op_deriv reproduce the oscillator on the interior block") {
  const int N = 12;
  HermiteBasis b = HermiteBasis::make(1, N);
  const Matrix D = op_deriv(b, 0).matrix;
  const Matrix P = op_position(b, 0).matrix;
  const Matrix osc = -0.5 * (D * D) + 0.5 * (P * P);
  const Matrix num = op_number(b).matrix;
  // direct matrix product vs op_number, modes n <= N-3
  for (int m = 0; m <= N - 3; ++m)
    for (int n = 0; n <= N - 3; ++n) CHECK(std::abs(osc(m, n) - num(m, n)) < 1e-13);
}

TEST_CASE("canonical commutation on the interior block") {
  const int N = 10;
  HermiteBasis b = HermiteBasis::make(1, N);
  const Matrix D = op_deriv(b, 0).matrix;
  const Matrix P = op_position(b, 0).matrix;
  const Matrix comm = D * P - P * D;
  for (int m = 0; m <= N - 2; ++m)
    for (int n = 0; n <= N - 2; ++n)
      CHECK(std::abs(comm(m, n) - (m == n ? 1.0 : 0.0)) < 1e-13);
}

TEST_CASE("position operators on different axes commute exactly") {
  HermiteBasis b = HermiteBasis::make(2, 6);
  const Matrix P0 = op_position(b, 0).matrix;
  const Matrix P1 = op_position(b, 1).matrix;
  CHECK((P0 * P1 - P1 * P0).norm() == 0.0);
  CHECK_THROWS_AS(op_position(b, 2), std::invalid_argument);
  CHECK_THROWS_AS(op_deriv(b, -1), std::invalid_argument);
}

TEST_CASE("airy grid operator structure") {
  PGrid g = PGrid::make(8.0, 64, PGrid::Boundary::dirichlet);
  SUBCASE("xi=0, lambda=0 is the Hermitian half Laplacian") {
    FiberOperator op = op_airy_grid(g, 0.0, 0.0);
    CHECK((op.matrix - op.matrix.adjoint()).norm() == 0.0);
    const double inv_s2 = 1.0 / (g.spacing() * g.spacing());
    CHECK(std::real(op.matrix(3, 3)) == doctest::Approx(inv_s2).epsilon(1e-14));
    CHECK(std::real(op.matrix(3, 4)) == doctest::Approx(-0.5 * inv_s2).epsilon(1e-14));
  }
  SUBCASE("hermitian part equals -1/2 Laplacian for any (xi, lambda)") {
    FiberOperator op = op_airy_grid(g, 3.0, -7.0);
    FiberOperator lap = op_airy_grid(g, 0.0, 0.0);
    CHECK((0.5 * (op.matrix + op.matrix.adjoint()) - lap.matrix).norm() < 1e-12);
  }
  SUBCASE("resolvent agrees across representations within 1%") {
    PGrid fine = PGrid::make(12.0, 512, PGrid::Boundary::dirichlet);
    const double rn_grid = resolvent_norm(op_airy_grid(fine, 1.0, 0.0), Complex(-1, 0));
    HermiteBasis hb = HermiteBasis::make(1, 128);
    Matrix m = Complex(0, 1.0) * op_position(hb, 0).matrix;
    m += 0.5 * (op_deriv(hb, 0).matrix.transpose() * op_deriv(hb, 0).matrix).eval();
    FiberOperator op;
    op.rep = RepInfo::hermite(hb);
    op.label = "airy_hermite";
    op.matrix = m;
    const double rn_hermite = resolvent_norm(op, Complex(-1, 0));
    CHECK(std::abs(rn_grid - rn_hermite) / rn_hermite < 0.01);
  }
}

TEST_CASE("to_grid / to_hermite round trip") {
  const int N = 32;
  HermiteBasis b = HermiteBasis::make(1, N);
  PGrid g = PGrid::make(std::sqrt(2.0 * N) + 6.0, 8 * N, PGrid::Boundary::dirichlet);
  CHECK(!grid_too_narrow(b, g));

  SUBCASE("ground state samples are positive Gaussians") {
    Vector e0 = Vector::Zero(N);
    e0(0) = 1.0;
    Vector s = to_grid(e0, b, g);
    const RealVector p = g.nodes();
    for (int k = 0; k < g.points; ++k) {
      CHECK(std::real(s(k)) > 0.0);
      const double expected = std::pow(M_PI, -0.25) * std::exp(-0.5 * p(k) * p(k));
      CHECK(std::abs(s(k) - expected) < 1e-12);
    }
  }
  SUBCASE("round trip error on e_{N/4} below 1e-8") {
    Vector e = Vector::Zero(N);
    e(N / 4) = 1.0;
    Vector back = to_hermite(to_grid(e, b, g), b, g);
    CHECK((back - e).norm() < 1e-8);
  }
  SUBCASE("round trip identity on all modes n <= N/2") {
    double worst = 0;
    for (int n = 0; n <= N / 2; ++n) {
      Vector e = Vector::Zero(N);
      e(n) = 1.0;
      worst = std::max(worst, (to_hermite(to_grid(e, b, g), b, g) - e).norm());
    }
    CHECK(worst < 1e-8);
  }
  SUBCASE("zero maps to zero") {
    Vector z = Vector::Zero(N);
    CHECK(to_grid(z, b, g).norm() == 0.0);
    CHECK(to_hermite(Vector::Zero(g.points), b, g).norm() == 0.0);
  }
  SUBCASE("narrow window reports the warning flag") {
    PGrid narrow = PGrid::make(4.0, 64, PGrid::Boundary::dirichlet);
    CHECK(grid_too_narrow(b, narrow));
  }
}

TEST_CASE("assembly is reproducible bit for bit") {
  HermiteBasis b1 = HermiteBasis::make(2, 10);
  HermiteBasis b2 = HermiteBasis::make(2, 10);
  CHECK((op_number(b1).matrix - op_number(b2).matrix).norm() == 0.0);
  CHECK((op_position(b1, 1).matrix - op_position(b2, 1).matrix).norm() == 0.0);
  CHECK((b1.quad.nodes - b2.quad.nodes).norm() == 0.0);
  CHECK((b1.quad.weights - b2.quad.weights).norm() == 0.0);
  PGrid g = PGrid::make(9.0, 128, PGrid::Boundary::periodic);
  CHECK((op_airy_grid(g, 2.0, 1.0).matrix - op_airy_grid(g, 2.0, 1.0).matrix).norm() == 0.0);
}

TEST_CASE("basis preconditions") {
  CHECK_THROWS_AS(HermiteBasis::make(0, 8), std::invalid_argument);
  CHECK_THROWS_AS(HermiteBasis::make(1, 1), std::invalid_argument);
  CHECK_THROWS_AS(HermiteBasis::make(1, 8, 9), std::invalid_argument);
  CHECK_THROWS_AS(PGrid::make(-1.0, 64), std::invalid_argument);
  CHECK_THROWS_AS(PGrid::make(1.0, 4), std::invalid_argument);
}
