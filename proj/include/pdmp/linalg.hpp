#pragma once

// Dense kernels shared by the whole library: column-stacking vectorization,
// Kronecker products, the matrix exponential, and the affine flow map. Storage
// is Eigen's column-major dynamic matrices, so vec() is a direct memory view.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "pdmp/constants.hpp"
#include "pdmp/errors.hpp"

namespace pdmp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

namespace detail {
inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
}
}  // namespace detail

/// Column-stacking vectorization: vec(M)(i + rows*j) = M(i, j).
[[nodiscard]] inline Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

// Inverse of vec for an r-by-c target; v.size() must equal r*c.
[[nodiscard]] inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols)
    throw DimensionError("unvec: size " + std::to_string(v.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

// Kronecker product; block (i,j) of the result is a(i,j) * b.
[[nodiscard]] inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

[[nodiscard]] inline Matrix kron(const Matrix& a, const Vector& b) {
  return kron(a, Matrix(b));
}
[[nodiscard]] inline Matrix kron(const Vector& a, const Matrix& b) {
  return kron(Matrix(a), b);
}

// Matrix exponential by scaling-and-squaring with the [13/13] diagonal Pade
// approximant. Accuracy is near machine precision for any finite input; inputs
// whose exponential overflows double range raise NumericalError instead of
// returning Inf.
[[nodiscard]] inline Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("expm: matrix must be square");
  detail::require_finite(a, "expm");
  const Eigen::Index n = a.rows();
  if (n == 0) return Matrix(0, 0);

  static constexpr double b[] = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  static constexpr double theta13 = 5.371920351148152;

  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
  int squarings = 0;
  if (norm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
    if (squarings > 60)
      throw NumericalError("expm: norm " + std::to_string(norm) +
                           " too large, result would overflow");
  }
  const Matrix as = a / std::ldexp(1.0, squarings);

  const Matrix i = Matrix::Identity(n, n);
  const Matrix a2 = as * as;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a2 * a4;
  const Matrix u =
      as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
            b[3] * a2 + b[1] * i);
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
                   b[4] * a4 + b[2] * a2 + b[0] * i;
  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int s = 0; s < squarings; ++s) r = r * r;
  if (!r.allFinite())
    throw NumericalError("expm: overflow for spectrum of scale " + std::to_string(norm));
  return r;
}

/// State transition and forced response of dx/dt = A x + a over [0, t]:
//   x(t) = transition * x(0) + integral,
// with transition = e^{A t} and integral = int_0^t e^{A s} a ds. Computed from
// one exponential of the augmented matrix [[A, a],[0, 0]], which needs no
// invertibility of A.
struct Flow {
  Matrix transition;
  Vector integral;
};

[[nodiscard]] inline Flow flow_with_integral(const Matrix& a_mat, const Vector& a_vec,
                                             double t) {
  if (a_mat.rows() != a_mat.cols()) throw DimensionError("flow_with_integral: A must be square");
  if (a_vec.size() != a_mat.rows())
    throw DimensionError("flow_with_integral: a has size " + std::to_string(a_vec.size()) +
                         ", A is " + std::to_string(a_mat.rows()) + "x" +
                         std::to_string(a_mat.cols()));
  if (!(t >= 0.0)) throw DomainError("flow_with_integral: t must be >= 0");
  const Eigen::Index n = a_mat.rows();
  Matrix aug = Matrix::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = a_mat;
  aug.topRightCorner(n, 1) = a_vec;
  const Matrix e = expm(aug * t);
  return Flow{e.topLeftCorner(n, n), e.topRightCorner(n, 1)};
}

// Integer matrix power by repeated squaring.
[[nodiscard]] inline Matrix matrix_power(Matrix base, uint64_t exponent) {
  if (base.rows() != base.cols()) throw DimensionError("matrix_power: matrix must be square");
  Matrix out = Matrix::Identity(base.rows(), base.cols());
  while (exponent > 0) {
    if (exponent & 1u) out = out * base;
    exponent >>= 1;
    if (exponent > 0) base = base * base;
  }
  return out;
}

// Largest eigenvalue magnitude. Uses the full (real Schur based) eigensolver;
// accuracy is machine-level for the well-conditioned inputs this library feeds it.
[[nodiscard]] inline double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("spectral_radius: matrix must be square");
  detail::require_finite(m, "spectral_radius");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalError("spectral_radius: eigensolver failed to converge (info=" +
                         std::to_string(static_cast<int>(es.info())) + ")");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Largest eigenvalue real part (growth rate of e^{Mt}).
[[nodiscard]] inline double spectral_abscissa(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("spectral_abscissa: matrix must be square");
  detail::require_finite(m, "spectral_abscissa");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalError("spectral_abscissa: eigensolver failed to converge");
  return es.eigenvalues().real().maxCoeff();
}

}  // namespace pdmp
