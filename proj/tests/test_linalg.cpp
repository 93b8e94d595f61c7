#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pdmp/linalg.hpp"
#include "support/checks.hpp"

using namespace pdmp;
using testsupport::max_rel_err;

TEST_CASE("vec and unvec are inverse column-stacking maps", "[linalg]") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  Vector v = vec(m);
  REQUIRE(v.size() == 6);
  // Column-major stacking: first column first.
  CHECK(v(0) == 1);
  CHECK(v(1) == 4);
  CHECK(v(2) == 2);
  CHECK(v(5) == 6);
  CHECK(unvec(v, 2, 3) == m);
}

TEST_CASE("kron reproduces vec(A X B) = (B^T kron A) vec(X)", "[linalg]") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  auto random_matrix = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(gen);
    return m;
  };
  const Matrix A = random_matrix(3, 4), X = random_matrix(4, 2), B = random_matrix(2, 5);
  const Vector lhs = vec(Matrix(A * X * B));
  const Vector rhs = kron(Matrix(B.transpose()), A) * vec(X);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12 * lhs.cwiseAbs().maxCoeff());
}

TEST_CASE("kron dimensions and identity cases", "[linalg]") {
  const Matrix I2 = Matrix::Identity(2, 2);
  const Matrix I3 = Matrix::Identity(3, 3);
  CHECK(kron(I2, I3).isApprox(Matrix::Identity(6, 6), 0.0));
  Matrix a(1, 2);
  a << 2, 3;
  Matrix b(2, 1);
  b << 5, 7;
  const Matrix k = kron(a, b);
  REQUIRE(k.rows() == 2);
  REQUIRE(k.cols() == 2);
  CHECK(k(0, 0) == 10);
  CHECK(k(1, 1) == 21);
}

TEST_CASE("expm matches closed forms", "[linalg]") {
  SECTION("scalar") {
    CHECK(testsupport::rel_err(expm(Matrix::Constant(1, 1, -1.3))(0, 0), std::exp(-1.3)) < 1e-14);
  }
  SECTION("zero matrix") {
    // The Pade evaluation rounds once, so allow a single ulp off identity.
    CHECK((expm(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SECTION("rotation generator") {
    const double w = 0.7;
    Matrix g(2, 2);
    g << 0, -w, w, 0;
    Matrix want(2, 2);
    want << std::cos(w), -std::sin(w), std::sin(w), std::cos(w);
    CHECK(max_rel_err(expm(g), want) < 1e-14);
  }
  SECTION("nilpotent") {
    Matrix g(2, 2);
    g << 0, 1, 0, 0;
    Matrix want(2, 2);
    want << 1, 1, 0, 1;
    CHECK((expm(g) - want).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("inverse relation exp(A) exp(-A) = I") {
    Matrix a(3, 3);
    a << -1.0, 0.3, 0.0, 0.2, -2.0, 0.5, 0.1, 0.0, -0.7;
    a *= 4.0;  // large enough to force squaring steps
    const Matrix prod = expm(a) * expm(Matrix(-a));
    CHECK((prod - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("flow_with_integral solves x' = A x + a", "[linalg]") {
  Vector a(2);
  a << 1.0, -0.5;
  SECTION("invertible A matches resolvent formula") {
    Matrix A(2, 2);
    A << -1.0, 0.2, 0.1, -0.6;
    const double t = 0.9;
    const Flow f = flow_with_integral(A, a, t);
    CHECK(max_rel_err(f.transition, expm(Matrix(A * t))) < 1e-13);
    const Vector want = A.fullPivLu().solve(Vector((expm(Matrix(A * t)) - Matrix::Identity(2, 2)) * a));
    CHECK((f.integral - want).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("singular A integrates the constant term") {
    const Flow f = flow_with_integral(Matrix::Zero(2, 2), a, 2.5);
    CHECK((f.transition - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((f.integral - Vector(2.5 * a)).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("matrix_power is exact repeated multiplication", "[linalg]") {
  Matrix m(2, 2);
  m << 0.9, 0.1, -0.2, 1.1;
  CHECK(matrix_power(m, 0).isApprox(Matrix::Identity(2, 2), 0.0));
  CHECK(matrix_power(m, 1) == m);
  Matrix direct = Matrix::Identity(2, 2);
  for (int i = 0; i < 9; ++i) direct = direct * m;
  CHECK(max_rel_err(matrix_power(m, 9), direct) < 1e-14);
}

TEST_CASE("spectral radius and abscissa of a known matrix", "[linalg]") {
  Matrix m(2, 2);
  m << 0.0, 1.0, -2.0, -3.0;  // eigenvalues -1, -2
  CHECK(testsupport::rel_err(spectral_radius(m), 2.0) < 1e-12);
  CHECK(testsupport::rel_err(spectral_abscissa(m), -1.0) < 1e-12);
}

TEST_CASE("all_finite flags NaN and infinity", "[linalg]") {
  Matrix m = Matrix::Zero(2, 2);
  CHECK(all_finite(m));
  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(m));
}
