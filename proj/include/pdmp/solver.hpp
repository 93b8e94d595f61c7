#pragma once

// Exact stationary moments of a linear PDMP with renewal resets. The mean
// solves a fixed point across one renewal cycle: propagate through the flow
// (with Poisson families absorbed into the effective matrices), apply the
// general reset, and require the cycle-start law to repeat. Second moments
// reuse the identical pipeline on the lifted (n + n^2)-dimensional system.
//
// All inter-event expectations come from the distribution's functionals, so
// the only approximation anywhere is controlled quadrature; the returned
// numerical_error_estimate reports how far the answer moves when the solve is
// repeated at a coarsened quadrature tolerance, plus a floating-point floor.

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/constants.hpp"
#include "pdmp/distribution.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/lift.hpp"
#include "pdmp/linalg.hpp"
#include "pdmp/model.hpp"

namespace pdmp {

struct StabilityReport {
  int order = 1;             // 1 = mean system, 2 = lifted second-moment system
  double spectral_radius = 0.0;
  bool stable = false;
  std::string matrix_checked;
};

struct MeanSolution {
  Vector mean;
  StabilityReport stability;
  double numerical_error_estimate = 0.0;
};

struct MomentSolution {
  Vector mean;
  Matrix second_moment;   // <x x^T>, symmetrized
  Matrix covariance;      // second_moment - mean mean^T
  Vector cv2;             // covariance(i,i)/mean(i)^2; NaN where mean(i) is 0
  std::vector<StabilityReport> stability;  // order-1 then order-2 report
  double numerical_error_estimate = 0.0;
};

namespace detail {

// One-norm of the inverse, for error amplification estimates.
inline double inverse_one_norm(const Eigen::FullPivLU<Matrix>& lu) {
  const Matrix inv = lu.inverse();
  return inv.cwiseAbs().colwise().sum().maxCoeff();
}

struct RenewalExpectations {
  Matrix exp_T;     // E[exp(A_bar T)]
  Vector phi_T;     // E[int_0^T exp(A_bar s) a_bar ds]
  Matrix exp_tau;   // same two under the stationary age law
  Vector phi_tau;
  double quad_error = 0.0;
};

inline double one_norm(const Matrix& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

// Two rounding amplifiers rule the renewal identity out in favor of the
// quadrature fallback. Inverting A_bar loses about cond(A_bar) digits, and
// slow-relaxation regimes reach cond ~ 1e12. Separately, phi_tau subtracts I
// from two exponentials in turn, so its relative error grows like
// eps / (|A_bar| <T>)^2 as the flow stops moving over one cycle.
inline bool identity_is_accurate(const Eigen::FullPivLU<Matrix>& lu, const Matrix& A_bar,
                                 double mean_T) {
  if (!lu.isInvertible()) return false;
  if (one_norm(A_bar) * inverse_one_norm(lu) >= 1e8) return false;
  return one_norm(A_bar) * mean_T >= 1e-2;
}

// Both flow expectations from one augmented matrix [[A_bar, a_bar],[0, 0]]:
// its exponential carries exp(A_bar t) and the forced integral side by side,
// so the T-expectation costs a single matrix-valued integral. The augmented
// matrix is singular by construction, so the age-law expectations come from
// the renewal identity on A_bar itself whenever it is safely invertible:
//   E[exp(A_bar tau)] = A_bar^-1 (E[exp(A_bar T)] - I) / <T>
//   E[phi(tau)]       = A_bar^-1 (E[exp(A_bar tau)] - I) a_bar
// which keeps the exponential/gamma/deterministic fast paths quadrature-free.
inline RenewalExpectations renewal_expectations(const InterEventDistribution& dist,
                                                const Matrix& A_bar, const Vector& a_bar,
                                                const Tolerances& tol) {
  const Eigen::Index n = A_bar.rows();
  Matrix aug = Matrix::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = A_bar;
  aug.topRightCorner(n, 1) = a_bar;
  auto over_T = dist.expect_matrix_exp_T(aug, tol);
  RenewalExpectations out;
  out.exp_T = over_T.value.topLeftCorner(n, n);
  out.phi_T = over_T.value.topRightCorner(n, 1);
  Eigen::FullPivLU<Matrix> lu(A_bar);
  if (identity_is_accurate(lu, A_bar, dist.mean())) {
    const Matrix eye = Matrix::Identity(n, n);
    out.exp_tau = lu.solve(Matrix(out.exp_T - eye)) / dist.mean();
    out.phi_tau = lu.solve(Vector((out.exp_tau - eye) * a_bar));
    const double amp = inverse_one_norm(lu);
    out.quad_error = over_T.error * (1.0 + amp / dist.mean());
    return out;
  }
  auto over_tau = dist.expect_matrix_exp_tau(aug, tol);
  out.exp_tau = over_tau.value.topLeftCorner(n, n);
  out.phi_tau = over_tau.value.topRightCorner(n, 1);
  out.quad_error = over_T.error + over_tau.error;
  return out;
}

struct RenewalSolve {
  Vector cycle_start;  // stationary mean immediately after a renewal reset
  Vector mean;         // stationary mean at a uniformly random time
  double error_estimate = 0.0;
};

// Stationary mean of the renewal-reset fixed point:
//   cycle_start = (I - J2 E[exp(A_bar T)])^-1 (R2 + J2 E[phi(T)])
//   mean        = E[exp(A_bar tau)] cycle_start + E[phi(tau)].
//
// error_estimate is a posteriori: the same solve is repeated from
// expectations at a 100x coarser quadrature tolerance and the movement of the
// answer is reported, plus a floating-point floor. Analytic expectation paths
// are tolerance-independent, so for them the estimate collapses to the floor;
// norm-product bounds were rejected here because they overshoot by many
// orders of magnitude on non-normal lifted systems.
inline RenewalSolve solve_renewal_mean(const InterEventDistribution& dist, const Matrix& A_bar,
                                       const Vector& a_bar, const Matrix& J2, const Vector& R2,
                                       const Tolerances& tol) {
  const Eigen::Index n = A_bar.rows();
  const auto solve_at = [&](const Tolerances& t) {
    const auto ex = renewal_expectations(dist, A_bar, a_bar, t);
    const Matrix K = Matrix::Identity(n, n) - J2 * ex.exp_T;
    Eigen::FullPivLU<Matrix> lu(K);
    if (!lu.isInvertible())
      throw NumericalError("solve_renewal_mean: I - J2 E[exp(A_bar T)] is singular");
    RenewalSolve out;
    out.cycle_start = lu.solve(R2 + J2 * ex.phi_T);
    out.mean = ex.exp_tau * out.cycle_start + ex.phi_tau;
    out.error_estimate = ex.quad_error;
    return out;
  };
  RenewalSolve out = solve_at(tol);
  Tolerances coarse = tol;
  coarse.quadrature_rel *= 100.0;
  coarse.quadrature_abs *= 100.0;
  const double floor = 1e-15 * (1.0 + out.mean.cwiseAbs().maxCoeff());
  try {
    const RenewalSolve check = solve_at(coarse);
    out.error_estimate = (out.mean - check.mean).cwiseAbs().maxCoeff() + floor;
  } catch (const NumericalError&) {
    out.error_estimate += floor;  // keep the raw expectation error as the signal
  }
  return out;
}

}  // namespace detail

// Spectral-radius feasibility of the renewal fixed point. Order 1 examines
// J2 E[exp(A_bar T)]; order 2 the lifted J_mu2 E[exp(A_mu_bar T)]. The fixed
// point exists iff the radius is strictly inside the unit circle.
inline StabilityReport check_stability(const PDMPModel& m, int order,
                                       const Tolerances& tol = default_tolerances()) {
  require_valid(m);
  StabilityReport rep;
  rep.order = order;
  Matrix update;
  if (order == 1) {
    const auto eff = effective_matrices(m);
    update = m.general_family.J2 * m.general_family.dist.expect_matrix_exp_T(eff.A_bar, tol).value;
    rep.matrix_checked = "J2 E[exp(A_bar T)]";
  } else if (order == 2) {
    const auto lifted = lift_second_order(m);
    const auto eff = lifted_effective_matrices(lifted);
    update = lifted.J_mu2 * m.general_family.dist.expect_matrix_exp_T(eff.A_bar, tol).value;
    rep.matrix_checked = "J_mu2 E[exp(A_mu_bar T)]";
  } else {
    throw DomainError("check_stability: order must be 1 or 2");
  }
  rep.spectral_radius = spectral_radius(update);
  rep.stable = rep.spectral_radius < 1.0 - tol.stability_margin;
  return rep;
}

inline MeanSolution stationary_mean(const PDMPModel& m,
                                    const Tolerances& tol = default_tolerances()) {
  MeanSolution out;
  out.stability = check_stability(m, 1, tol);
  if (!out.stability.stable)
    throw InstabilityError("stationary_mean: no stationary mean, spectral radius of " +
                               out.stability.matrix_checked + " is " +
                               std::to_string(out.stability.spectral_radius),
                           out.stability.spectral_radius, 1);
  const auto eff = effective_matrices(m);
  auto solve = detail::solve_renewal_mean(m.general_family.dist, eff.A_bar, eff.a_bar,
                                          m.general_family.J2, m.general_family.R2, tol);
  out.mean = std::move(solve.mean);
  out.numerical_error_estimate = solve.error_estimate;
  return out;
}

inline MomentSolution stationary_second(const PDMPModel& m,
                                        const Tolerances& tol = default_tolerances()) {
  MomentSolution out;
  const auto mean_solution = stationary_mean(m, tol);
  out.stability.push_back(mean_solution.stability);

  const auto lifted = lift_second_order(m);
  const auto eff = lifted_effective_matrices(lifted);
  StabilityReport rep2;
  rep2.order = 2;
  rep2.matrix_checked = "J_mu2 E[exp(A_mu_bar T)]";
  const Matrix update =
      lifted.J_mu2 * m.general_family.dist.expect_matrix_exp_T(eff.A_bar, tol).value;
  rep2.spectral_radius = spectral_radius(update);
  rep2.stable = rep2.spectral_radius < 1.0 - tol.stability_margin;
  out.stability.push_back(rep2);
  if (!rep2.stable)
    throw InstabilityError("stationary_second: no stationary second moment, spectral radius of " +
                               rep2.matrix_checked + " is " + std::to_string(rep2.spectral_radius),
                           rep2.spectral_radius, 2);

  auto solve = detail::solve_renewal_mean(m.general_family.dist, eff.A_bar, eff.a_bar,
                                          lifted.J_mu2, lifted.R_mu2, tol);
  const Eigen::Index n = m.dim();
  out.mean = solve.mean.head(n);
  Matrix S = unvec(solve.mean.tail(n * n), n, n);

  // The mean block of the lifted solve must reproduce the first-order solve;
  // disagreement means the expectations lost accuracy.
  const double mean_scale = mean_solution.mean.cwiseAbs().maxCoeff();
  const double mean_gap = (out.mean - mean_solution.mean).cwiseAbs().maxCoeff();
  if (mean_gap > 1e-6 * (1.0 + mean_scale))
    throw NumericalError("stationary_second: lifted mean disagrees with first-order mean by " +
                         std::to_string(mean_gap));

  const double asymmetry = (S - S.transpose()).cwiseAbs().maxCoeff();
  S = 0.5 * (S + S.transpose());
  out.second_moment = S;
  out.covariance = S - out.mean * out.mean.transpose();
  out.numerical_error_estimate =
      solve.error_estimate + mean_solution.numerical_error_estimate + asymmetry;

  out.cv2 = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
  const double floor = tol.mean_floor_rel * (1.0 + mean_scale);
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(out.mean(i)) > floor)
      out.cv2(i) = out.covariance(i, i) / (out.mean(i) * out.mean(i));
  return out;
}

struct ConditionalMeanCurve {
  std::vector<double> tau_grid;
  std::vector<Vector> conditional_mean;  // <x | age tau> at each grid point
  Vector unconditioned_mean;             // integral against the timer density
};

// Independent route to the stationary mean: solve the cycle-start fixed point,
// propagate it deterministically to each age tau through the effective flow,
// and integrate the resulting curve against the timer density.
inline ConditionalMeanCurve conditional_mean_ode_oracle(
    const PDMPModel& m, const std::vector<double>& tau_grid,
    const Tolerances& tol = default_tolerances()) {
  const auto rep = check_stability(m, 1, tol);
  if (!rep.stable)
    throw InstabilityError("conditional_mean_ode_oracle: spectral radius of " +
                               rep.matrix_checked + " is " + std::to_string(rep.spectral_radius),
                           rep.spectral_radius, 1);
  const auto eff = effective_matrices(m);
  const auto solve = detail::solve_renewal_mean(m.general_family.dist, eff.A_bar, eff.a_bar,
                                                m.general_family.J2, m.general_family.R2, tol);
  ConditionalMeanCurve out;
  out.tau_grid = tau_grid;
  out.conditional_mean.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    const auto fl = flow_with_integral(eff.A_bar, eff.a_bar, tau);
    out.conditional_mean.push_back(fl.transition * solve.cycle_start + fl.integral);
  }
  out.unconditioned_mean =
      m.general_family.dist
          .expect_over_tau(
              [&](double tau) -> Vector {
                const auto fl = flow_with_integral(eff.A_bar, eff.a_bar, tau);
                return fl.transition * solve.cycle_start + fl.integral;
              },
              tol)
          .value;
  return out;
}

}  // namespace pdmp
