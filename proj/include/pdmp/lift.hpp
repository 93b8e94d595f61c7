#pragma once

// Second-order lift: the process mu = [x; vec(x x^T)] is again a linear PDMP
// in n + n^2 dimensions, with flow and reset maps assembled from Kronecker
// products of the first-order model. Solving the lifted system for its
// stationary mean yields the stationary second moments of x.

#include <vector>

#include "pdmp/linalg.hpp"
#include "pdmp/model.hpp"

namespace pdmp {

struct LiftedPoissonFamily {
  double rate = 0.0;
  Matrix J_mu1;
  Vector R_mu1;
};

struct LiftedModel {
  Eigen::Index n = 0;  // base dimension; lifted dimension is n + n^2
  Vector a_mu;
  Matrix A_mu;
  std::vector<LiftedPoissonFamily> poisson;
  Matrix J_mu2;
  Vector R_mu2;

  Eigen::Index dim() const { return n + n * n; }
};

namespace detail {

// Assemble [[top_left, 0], [bottom_left, bottom_right]] over blocks of sizes
// n and n^2.
inline Matrix lower_block_matrix(const Matrix& top_left, const Matrix& bottom_left,
                                 const Matrix& bottom_right) {
  const Eigen::Index n = top_left.rows();
  const Eigen::Index n2 = n * n;
  Matrix out = Matrix::Zero(n + n2, n + n2);
  out.topLeftCorner(n, n) = top_left;
  out.bottomLeftCorner(n2, n) = bottom_left;
  out.bottomRightCorner(n2, n2) = bottom_right;
  return out;
}

inline Vector stack_vector(const Vector& head, const Vector& tail) {
  Vector out(head.size() + tail.size());
  out << head, tail;
  return out;
}

}  // namespace detail

// Build the (n + n^2)-dimensional model for mu = [x; vec(x x^T)]:
//   flow      d mu/dt = a_mu + A_mu mu
//   Poisson   mu -> J_mu1 mu + R_mu1
//   renewal   <mu+> = J_mu2 mu + R_mu2
// The off-diagonal blocks carry exactly the cross terms generated by
// expanding (J x + R)(J x + R)^T and averaging over the reset offset.
inline LiftedModel lift_second_order(const PDMPModel& m) {
  require_valid(m);
  const Eigen::Index n = m.dim();
  const Matrix eye = Matrix::Identity(n, n);
  const Matrix& A = m.dynamics.A;
  const Vector& a = m.dynamics.a_hat;

  LiftedModel lifted;
  lifted.n = n;
  lifted.A_mu = detail::lower_block_matrix(A, kron(eye, a) + kron(a, eye),
                                           kron(eye, A) + kron(A, eye));
  lifted.a_mu = detail::stack_vector(a, Vector::Zero(n * n));

  for (const auto& f : m.poisson_families) {
    LiftedPoissonFamily lf;
    lf.rate = f.rate;
    lf.J_mu1 = detail::lower_block_matrix(f.J1, kron(f.J1, f.R1_mean) + kron(f.R1_mean, f.J1),
                                          kron(f.J1, f.J1));
    lf.R_mu1 = detail::stack_vector(f.R1_mean, vec(f.R1_second));
    lifted.poisson.push_back(std::move(lf));
  }

  const auto& g = m.general_family;
  lifted.J_mu2 = detail::lower_block_matrix(
      g.J2,
      kron(g.B2, g.C2) + kron(g.C2, g.B2) + kron(g.J2, g.R2) + kron(g.R2, g.J2),
      kron(g.J2, g.J2) + kron(g.Q2, g.Q2));
  lifted.R_mu2 = detail::stack_vector(g.R2, vec(g.D2 + g.R2 * g.R2.transpose()));
  return lifted;
}

// Effective flow of the lifted mean between renewals, mirroring
// effective_matrices on the base model.
inline EffectiveMatrices lifted_effective_matrices(const LiftedModel& lifted) {
  const Eigen::Index d = lifted.dim();
  Matrix A_bar = lifted.A_mu;
  Vector a_bar = lifted.a_mu;
  for (const auto& f : lifted.poisson) {
    A_bar += f.rate * (f.J_mu1 - Matrix::Identity(d, d));
    a_bar += f.rate * f.R_mu1;
  }
  return {A_bar, a_bar};
}

// Direct (unlifted) one-event update of the exact second-moment pair: given
// the current mean out-state x and second moment S = <x x^T>, returns the
// post-reset pair for a Poisson family, averaging over the random offset.
// Reference implementation for tests; the lift must reproduce it.
inline std::pair<Vector, Matrix> poisson_reset_moments(const PoissonResetFamily& f,
                                                       const Vector& x, const Matrix& S) {
  Vector mean = f.J1 * x + f.R1_mean;
  Matrix second = f.J1 * S * f.J1.transpose() + f.J1 * x * f.R1_mean.transpose() +
                  f.R1_mean * x.transpose() * f.J1.transpose() + f.R1_second;
  return {mean, second};
}

// Same for the general family: conditional mean J2 x + R2 plus the prescribed
// conditional covariance assembled around it.
inline std::pair<Vector, Matrix> general_reset_moments(const GeneralResetFamily& g,
                                                       const Vector& x, const Matrix& S) {
  Vector mean = g.J2 * x + g.R2;
  Matrix second = g.J2 * S * g.J2.transpose() + g.J2 * x * g.R2.transpose() +
                  g.R2 * x.transpose() * g.J2.transpose() + g.R2 * g.R2.transpose() +
                  g.Q2 * S * g.Q2.transpose() + g.B2 * x * g.C2.transpose() +
                  g.C2 * x.transpose() * g.B2.transpose() + g.D2;
  return {mean, second};
}

}  // namespace pdmp
