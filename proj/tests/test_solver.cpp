#include <catch_amalgamated.hpp>

#include <cmath>

#include "pdmp/gene_expression.hpp"
#include "pdmp/lift.hpp"
#include "pdmp/solver.hpp"
#include "support/checks.hpp"

using namespace pdmp;
using testsupport::max_rel_err;
using testsupport::rel_err;

namespace {

// 2-D base model: stable drift plus one affine Poisson reset.
PDMPModel base_model(GeneralResetFamily general) {
  PDMPModel m{LinearDynamics{Vector::Zero(2), Matrix::Zero(2, 2)}, {}, std::move(general)};
  m.dynamics.a_hat << 1.0, 0.5;
  m.dynamics.A << -1.0, 0.2, 0.1, -0.8;
  PoissonResetFamily f;
  f.rate = 1.3;
  f.J1 = Matrix(2, 2);
  f.J1 << 0.9, 0.05, -0.1, 0.8;
  f.R1_mean = Vector(2);
  f.R1_mean << 0.4, 0.1;
  f.R1_second = f.R1_mean * f.R1_mean.transpose() + 0.05 * Matrix::Identity(2, 2);
  m.poisson_families.push_back(f);
  return m;
}

GeneralResetFamily noop_general(InterEventDistribution dist, Eigen::Index n) {
  return GeneralResetFamily{std::move(dist), Matrix::Identity(n, n), Vector::Zero(n),
                            Matrix::Zero(n, n), Matrix::Zero(n, n), Vector::Zero(n),
                            Matrix::Zero(n, n)};
}

GeneralResetFamily contracting_general(Eigen::Index n) {
  GeneralResetFamily g{InterEventDistribution::gamma(4.0, 0.25), Matrix(n, n), Vector(n),
                       Matrix::Zero(n, n), Matrix(n, n), Vector(n), Matrix(n, n)};
  g.J2 << 0.5, 0.0, 0.1, 0.6;
  g.R2 << 0.2, 0.0;
  g.B2 << 0.12, 0.0, 0.05, 0.08;
  g.C2 << 1.0, 0.5;
  g.D2 = 0.03 * Matrix::Identity(n, n);
  return g;
}

}  // namespace

TEST_CASE("no-op general reset reduces to the pure-Poisson solution", "[solver]") {
  // With an identity renewal reset the renewal structure is invisible and the
  // stationary moments must solve the plain jump-diffusion moment balance.
  const auto m = base_model(noop_general(InterEventDistribution::gamma(3.0, 0.4), 2));
  const auto sol = stationary_second(m);

  const auto lifted = lift_second_order(m);
  const auto eff = lifted_effective_matrices(lifted);
  // 0 = A_mu_bar mu + a_mu_bar is the stationary condition without renewals.
  const Vector mu_direct = (-eff.A_bar).fullPivLu().solve(eff.a_bar);

  Vector mu_solver(6);
  mu_solver << sol.mean, vec(sol.second_moment);
  CHECK((mu_solver - mu_direct).cwiseAbs().maxCoeff() <
        1e-6 * (1.0 + mu_direct.cwiseAbs().maxCoeff()));
}

TEST_CASE("exponential renewal resets are equivalent to a Poisson family", "[solver]") {
  const double lambda = 1.7;
  Matrix J(2, 2);
  J << 0.7, 0.1, 0.0, 0.6;
  Vector R(2);
  R << 0.3, 0.2;
  const Matrix R_second = R * R.transpose() + 0.04 * Matrix::Identity(2, 2);

  // Model A: the reset rides the exponential renewal clock.
  GeneralResetFamily as_general{InterEventDistribution::exponential(lambda),
                                J,
                                R,
                                Matrix::Zero(2, 2),
                                Matrix::Zero(2, 2),
                                Vector::Zero(2),
                                R_second - R * R.transpose()};
  const auto model_a = base_model(as_general);

  // Model B: the same reset as a Poisson family, renewal clock disconnected.
  auto model_b = base_model(noop_general(InterEventDistribution::gamma(2.0, 0.5), 2));
  PoissonResetFamily extra;
  extra.rate = lambda;
  extra.J1 = J;
  extra.R1_mean = R;
  extra.R1_second = R_second;
  model_b.poisson_families.push_back(extra);

  const auto sol_a = stationary_second(model_a);
  const auto sol_b = stationary_second(model_b);
  CHECK(max_rel_err(sol_a.mean, sol_b.mean) < 1e-8);
  CHECK(max_rel_err(sol_a.second_moment, sol_b.second_moment) < 1e-8);
}

TEST_CASE("order-2 solve embeds the order-1 mean", "[solver]") {
  const auto m = base_model(contracting_general(2));
  const auto first = stationary_mean(m);
  const auto second = stationary_second(m);
  CHECK(max_rel_err(second.mean, first.mean) < 1e-8);
  REQUIRE(second.stability.size() == 2);
  CHECK(second.stability[0].order == 1);
  CHECK(second.stability[1].order == 2);
  CHECK(second.stability[1].spectral_radius < 1.0);
  CHECK(second.numerical_error_estimate < 1e-6);
}

TEST_CASE("state rescaling scales moments homogeneously", "[solver]") {
  const double s = 2.0;
  const auto m = base_model(contracting_general(2));
  auto scaled = m;
  scaled.dynamics.a_hat *= s;
  for (auto& f : scaled.poisson_families) {
    f.R1_mean *= s;
    f.R1_second *= s * s;
  }
  scaled.general_family.R2 *= s;
  scaled.general_family.B2 *= s;  // B2 x C2^T picks up s from x too
  scaled.general_family.D2 *= s * s;

  const auto sol = stationary_second(m);
  const auto sol_s = stationary_second(scaled);
  CHECK(max_rel_err(sol_s.mean, Vector(s * sol.mean)) < 1e-8);
  CHECK(max_rel_err(sol_s.second_moment, Matrix(s * s * sol.second_moment)) < 1e-8);
  CHECK(max_rel_err(sol_s.cv2, sol.cv2) < 1e-8);
}

TEST_CASE("covariance is symmetric and consistent", "[solver]") {
  const auto sol = stationary_second(base_model(contracting_general(2)));
  CHECK((sol.second_moment - sol.second_moment.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  const Matrix want_cov = sol.second_moment - sol.mean * sol.mean.transpose();
  CHECK(max_rel_err(sol.covariance, want_cov) < 1e-12);
  for (int i = 0; i < 2; ++i)
    CHECK(rel_err(sol.cv2(i), sol.covariance(i, i) / (sol.mean(i) * sol.mean(i))) < 1e-12);
}

TEST_CASE("instability is reported with the offending spectral radius", "[solver]") {
  SECTION("first moment unstable") {
    // The drift contracts by about 0.38 per cycle here, so the division map
    // must exceed ~2.6 for the per-cycle radius to cross 1.
    GeneralResetFamily expanding = contracting_general(2);
    expanding.J2 = 3.0 * Matrix::Identity(2, 2);
    const auto m = base_model(expanding);
    const auto report = check_stability(m, 1);
    CHECK_FALSE(report.stable);
    CHECK(report.spectral_radius >= 1.0);
    try {
      stationary_mean(m);
      FAIL("expected InstabilityError");
    } catch (const InstabilityError& e) {
      CHECK(e.order == 1);
      CHECK(e.spectral_radius >= 1.0);
    }
  }
  SECTION("second moment unstable while the mean exists") {
    // J2 contracts but Q2 pumps variance: order-2 radius (J2^2 + Q2^2) <e^2..>
    // exceeds 1 while order-1 radius J2 <e..> stays below.
    PDMPModel m{LinearDynamics{Vector::Constant(1, 1.0), Matrix::Constant(1, 1, -0.01)},
                {},
                GeneralResetFamily{InterEventDistribution::deterministic(1.0),
                                   Matrix::Constant(1, 1, 0.5), Vector::Zero(1),
                                   Matrix::Constant(1, 1, 1.2), Matrix::Zero(1, 1),
                                   Vector::Zero(1), Matrix::Zero(1, 1)}};
    CHECK(check_stability(m, 1).stable);
    CHECK_FALSE(check_stability(m, 2).stable);
    CHECK_NOTHROW(stationary_mean(m));
    CHECK_THROWS_AS(stationary_second(m), InstabilityError);
  }
}

TEST_CASE("conditional-mean ODE oracle agrees with the closed-form mean", "[solver]") {
  const auto m = base_model(contracting_general(2));
  const std::vector<double> grid{0.0, 0.2, 0.5, 0.9, 1.4};
  const auto curve = conditional_mean_ode_oracle(m, grid);
  REQUIRE(curve.conditional_mean.size() == grid.size());
  const auto sol = stationary_mean(m);
  CHECK(max_rel_err(curve.unconditioned_mean, sol.mean) < 1e-6);
}

TEST_CASE("solver matches the protein closed forms at one point", "[solver]") {
  ProteinModelParams p;
  p.k = 20.0;
  p.U_mean = 1.0;
  p.U_second = 1.0;
  p.gamma = 0.5;
  p.b = 0.25;
  p.T_dist = cell_cycle_from_mean_cv2(1.0, 0.25);
  const auto sol = stationary_second(build_protein_model(p));
  CHECK(rel_err(sol.mean(0), protein_mean_closed(p)) < 1e-9);
  CHECK(rel_err(sol.cv2(0), protein_cv2(p).total_cv2) < 1e-9);
}

TEST_CASE("burst variance and fraction noise match the renewal fixed point", "[solver]") {
  // Independent oracle from the per-cycle moment flow with h = 2, <R> = 5,
  // <R^2> = 45, decay 1, gamma(8, 1/8) cycles, and division x -> theta x with
  // <theta> = 1/2, Var(theta) = 0.01:
  //   m1' = -m1 + 10,  m2' = -2 m2 + 20 m1 + 90,
  //   division scales m1 by 1/2 and m2 by 1/4 + 0.01 = 0.26.
  PoissonResetFamily fam;
  fam.rate = 2.0;
  fam.J1 = Matrix::Identity(1, 1);
  fam.R1_mean = Vector::Constant(1, 5.0);
  fam.R1_second = Matrix::Constant(1, 1, 45.0);
  GeneralResetFamily division{InterEventDistribution::gamma(8.0, 0.125),
                              Matrix::Constant(1, 1, 0.5), Vector::Zero(1),
                              Matrix::Constant(1, 1, 0.1), Matrix::Zero(1, 1),
                              Vector::Zero(1), Matrix::Zero(1, 1)};

  const double ET1 = std::pow(1.125, -8.0);  // E[e^-T]
  const double ET2 = std::pow(1.25, -8.0);   // E[e^-2T]
  const double mu1 = 5.0 * (1.0 - ET1) / (1.0 - 0.5 * ET1);
  const double drive = 145.0 * (1.0 - ET2) + 20.0 * (mu1 - 10.0) * (ET1 - ET2);
  const double mu2 = 0.26 * drive / (1.0 - 0.26 * ET2);
  const double Et1 = 1.0 - ET1;          // E[e^-tau], <T> = 1
  const double Et2 = 0.5 * (1.0 - ET2);  // E[e^-2tau]
  const double mean = 10.0 + (mu1 - 10.0) * Et1;
  const double second =
      mu2 * Et2 + 145.0 * (1.0 - Et2) + 20.0 * (mu1 - 10.0) * (Et1 - Et2);

  PDMPModel m{LinearDynamics{Vector::Zero(1), Matrix::Constant(1, 1, -1.0)}, {fam}, division};
  const auto sol = stationary_second(m);
  CHECK(rel_err(sol.mean(0), mean) < 1e-10);
  CHECK(rel_err(sol.second_moment(0, 0), second) < 1e-10);
  CHECK(sol.numerical_error_estimate < 1e-8);

  // Embedding the same species as the autonomous first coordinate of a
  // translation-coupled pair must leave its marginal moments untouched, and
  // the non-normal coupling must not blow up the error estimate.
  PoissonResetFamily fam2;
  fam2.rate = 2.0;
  fam2.J1 = Matrix::Identity(2, 2);
  fam2.R1_mean = (Vector(2) << 5.0, 0.0).finished();
  fam2.R1_second = (Matrix(2, 2) << 45.0, 0.0, 0.0, 0.0).finished();
  PDMPModel coupled{
      LinearDynamics{Vector::Zero(2), (Matrix(2, 2) << -1.0, 0.0, 10.0, -0.2).finished()},
      {fam2},
      GeneralResetFamily{InterEventDistribution::gamma(8.0, 0.125),
                         0.5 * Matrix::Identity(2, 2), Vector::Zero(2),
                         0.1 * Matrix::Identity(2, 2), Matrix::Zero(2, 2), Vector::Zero(2),
                         Matrix::Zero(2, 2)}};
  const auto sol2 = stationary_second(coupled);
  CHECK(rel_err(sol2.mean(0), mean) < 1e-10);
  CHECK(rel_err(sol2.second_moment(0, 0), second) < 1e-10);
  CHECK(sol2.numerical_error_estimate < 1e-8);
}
