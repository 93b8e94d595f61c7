#pragma once

// Declarative description of a piecewise-deterministic Markov process with
// linear flow dx/dt = a_hat + A x, any number of Poisson-timed affine reset
// families, and exactly one renewal-timed general reset family. Models are
// immutable value objects once validated; every operation here is pure.

#include <optional>
#include <string>
#include <vector>

#include "pdmp/distribution.hpp"
#include "pdmp/linalg.hpp"

namespace pdmp {

struct LinearDynamics {
  Vector a_hat;  // constant production, units state/time
  Matrix A;      // relaxation, units 1/time

  Eigen::Index dim() const { return a_hat.size(); }
};

// Resets x -> J1 x + R1 arriving at constant rate; R1 is a random offset
// specified by its first two moments (deterministic offsets set
// R1_second = R1_mean R1_mean^T).
struct PoissonResetFamily {
  double rate = 0.0;
  Matrix J1;
  Vector R1_mean;
  Matrix R1_second;  // <R1 R1^T>
};

// Renewal-timed reset with conditional mean <x+> = J2 x + R2 and conditional
// covariance Q2 x x^T Q2^T + B2 x C2^T + C2 x^T B2^T + D2.
struct GeneralResetFamily {
  InterEventDistribution dist;
  Matrix J2;
  Vector R2;
  Matrix Q2;
  Matrix B2;
  Vector C2;
  Matrix D2;
};

struct PDMPModel {
  LinearDynamics dynamics;
  std::vector<PoissonResetFamily> poisson_families;
  GeneralResetFamily general_family;

  Eigen::Index dim() const { return dynamics.dim(); }
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const {
    if (ok()) return "valid";
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v;
    }
    return out;
  }
};

namespace detail {

inline bool is_square(const Matrix& m, Eigen::Index n) { return m.rows() == n && m.cols() == n; }

inline bool is_symmetric(const Matrix& m, double tol) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + m.cwiseAbs().maxCoeff());
}

inline bool is_psd(const Matrix& m, double tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) return false;
  return es.eigenvalues().minCoeff() >= -tol * (1.0 + m.cwiseAbs().maxCoeff());
}

}  // namespace detail

// Report-returning check of every structural invariant; each violation names
// the offending field.
inline ValidationReport validate(const PDMPModel& m) {
  ValidationReport rep;
  auto fail = [&](const std::string& s) { rep.violations.push_back(s); };
  const Eigen::Index n = m.dim();
  if (n < 1) fail("dynamics.a_hat: state dimension must be at least 1");
  if (!all_finite(m.dynamics.a_hat)) fail("dynamics.a_hat: non-finite entries");
  if (!detail::is_square(m.dynamics.A, n))
    fail("dynamics.A: expected " + std::to_string(n) + "x" + std::to_string(n));
  else if (!all_finite(m.dynamics.A))
    fail("dynamics.A: non-finite entries");

  for (size_t i = 0; i < m.poisson_families.size(); ++i) {
    const auto& f = m.poisson_families[i];
    const std::string p = "poisson_families[" + std::to_string(i) + "].";
    if (!(f.rate > 0.0) || !std::isfinite(f.rate)) fail(p + "rate: must be positive and finite");
    if (!detail::is_square(f.J1, n))
      fail(p + "J1: expected " + std::to_string(n) + "x" + std::to_string(n));
    else if (!all_finite(f.J1))
      fail(p + "J1: non-finite entries");
    if (f.R1_mean.size() != n)
      fail(p + "R1_mean: expected length " + std::to_string(n));
    else if (!all_finite(f.R1_mean))
      fail(p + "R1_mean: non-finite entries");
    if (!detail::is_square(f.R1_second, n)) {
      fail(p + "R1_second: expected " + std::to_string(n) + "x" + std::to_string(n));
    } else if (!all_finite(f.R1_second)) {
      fail(p + "R1_second: non-finite entries");
    } else {
      if (!detail::is_symmetric(f.R1_second, 1e-9)) fail(p + "R1_second: must be symmetric");
      if (!detail::is_psd(f.R1_second, 1e-9)) fail(p + "R1_second: must be positive semidefinite");
      if (f.R1_mean.size() == n &&
          !detail::is_psd(f.R1_second - f.R1_mean * f.R1_mean.transpose(), 1e-9))
        fail(p + "R1_second: R1_second - R1_mean R1_mean^T must be positive semidefinite");
    }
  }

  const auto& g = m.general_family;
  auto check_square = [&](const Matrix& mat, const char* name) {
    if (!detail::is_square(mat, n))
      fail(std::string("general_family.") + name + ": expected " + std::to_string(n) + "x" +
           std::to_string(n));
    else if (!all_finite(mat))
      fail(std::string("general_family.") + name + ": non-finite entries");
  };
  check_square(g.J2, "J2");
  check_square(g.Q2, "Q2");
  check_square(g.B2, "B2");
  check_square(g.D2, "D2");
  if (g.R2.size() != n)
    fail("general_family.R2: expected length " + std::to_string(n));
  else if (!all_finite(g.R2))
    fail("general_family.R2: non-finite entries");
  if (g.C2.size() != n)
    fail("general_family.C2: expected length " + std::to_string(n));
  else if (!all_finite(g.C2))
    fail("general_family.C2: non-finite entries");
  if (detail::is_square(g.D2, n) && all_finite(g.D2) && !detail::is_symmetric(g.D2, 1e-9))
    fail("general_family.D2: must be symmetric");
  return rep;
}

inline void require_valid(const PDMPModel& m) {
  auto rep = validate(m);
  if (!rep.ok()) throw InvalidModelError("invalid model: " + rep.to_string());
}

struct EffectiveMatrices {
  Matrix A_bar;
  Vector a_bar;
};

// Dynamics of the mean between renewal events, with the Poisson families
// absorbed into the flow:
//   A_bar = A + sum_i h_i (J1_i - I),  a_bar = a_hat + sum_i h_i <R1_i>.
inline EffectiveMatrices effective_matrices(const PDMPModel& m) {
  const Eigen::Index n = m.dim();
  Matrix A_bar = m.dynamics.A;
  Vector a_bar = m.dynamics.a_hat;
  for (const auto& f : m.poisson_families) {
    A_bar += f.rate * (f.J1 - Matrix::Identity(n, n));
    a_bar += f.rate * f.R1_mean;
  }
  return {A_bar, a_bar};
}

}  // namespace pdmp
