#include <catch_amalgamated.hpp>

#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/weibull.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <vector>

#include "pdmp/distribution.hpp"
#include "pdmp/rng.hpp"
#include "support/checks.hpp"

using namespace pdmp;
using testsupport::ks_against_cdf;
using testsupport::max_rel_err;
using testsupport::rel_err;

namespace {

std::vector<InterEventDistribution> continuous_laws() {
  return {InterEventDistribution::exponential(1.4),
          InterEventDistribution::gamma(4.0, 0.25),
          InterEventDistribution::gamma(2.5, 0.4),
          InterEventDistribution::lognormal(-0.2, 0.5),
          InterEventDistribution::weibull(1.7, 1.1)};
}

InterEventDistribution tabulated_gamma(double shape, double scale, int knots = 400) {
  boost::math::gamma_distribution<double> g(shape, scale);
  const double hi = boost::math::quantile(g, 1.0 - 1e-12);
  std::vector<double> ts, ws;
  for (int i = 0; i <= knots; ++i) {
    const double t = hi * i / knots;
    ts.push_back(t);
    ws.push_back(boost::math::pdf(g, t));
  }
  return InterEventDistribution::tabulated(std::move(ts), std::move(ws));
}

}  // namespace

TEST_CASE("pdf and cdf match reference distributions", "[distribution]") {
  const double xs[] = {0.05, 0.3, 0.8, 1.6, 3.0};
  SECTION("gamma") {
    auto d = InterEventDistribution::gamma(4.0, 0.25);
    boost::math::gamma_distribution<double> ref(4.0, 0.25);
    for (double x : xs) {
      CHECK(rel_err(d.pdf(x), boost::math::pdf(ref, x)) < 1e-12);
      CHECK(rel_err(d.cdf(x), boost::math::cdf(ref, x)) < 1e-12);
    }
  }
  SECTION("exponential") {
    auto d = InterEventDistribution::exponential(1.4);
    boost::math::exponential_distribution<double> ref(1.4);
    for (double x : xs) {
      CHECK(rel_err(d.pdf(x), boost::math::pdf(ref, x)) < 1e-13);
      CHECK(rel_err(d.survival(x), 1.0 - boost::math::cdf(ref, x)) < 1e-12);
    }
  }
  SECTION("lognormal") {
    auto d = InterEventDistribution::lognormal(-0.2, 0.5);
    boost::math::lognormal_distribution<double> ref(-0.2, 0.5);
    for (double x : xs) {
      CHECK(rel_err(d.pdf(x), boost::math::pdf(ref, x)) < 1e-12);
      CHECK(rel_err(d.cdf(x), boost::math::cdf(ref, x)) < 1e-12);
    }
  }
  SECTION("weibull") {
    auto d = InterEventDistribution::weibull(1.7, 1.1);
    boost::math::weibull_distribution<double> ref(1.7, 1.1);
    for (double x : xs) {
      CHECK(rel_err(d.pdf(x), boost::math::pdf(ref, x)) < 1e-12);
      CHECK(rel_err(d.cdf(x), boost::math::cdf(ref, x)) < 1e-12);
    }
  }
}

TEST_CASE("raw moments match closed forms", "[distribution]") {
  SECTION("gamma") {
    auto d = InterEventDistribution::gamma(4.0, 0.25);
    CHECK(rel_err(d.mean(), 1.0) < 1e-13);
    CHECK(rel_err(d.raw_moment(2), 0.25 * 0.25 * 4.0 * 5.0) < 1e-13);
    CHECK(rel_err(d.raw_moment(3), std::pow(0.25, 3) * 4.0 * 5.0 * 6.0) < 1e-13);
    CHECK(rel_err(d.raw_moment4(), std::pow(0.25, 4) * 4.0 * 5.0 * 6.0 * 7.0) < 1e-13);
  }
  SECTION("exponential") {
    auto d = InterEventDistribution::exponential(2.0);
    CHECK(rel_err(d.raw_moment(2), 2.0 / 4.0) < 1e-13);
    CHECK(rel_err(d.raw_moment(3), 6.0 / 8.0) < 1e-13);
  }
  SECTION("deterministic") {
    auto d = InterEventDistribution::deterministic(0.7);
    CHECK(d.mean() == 0.7);
    CHECK(rel_err(d.raw_moment(3), std::pow(0.7, 3)) < 1e-15);
  }
  SECTION("lognormal") {
    auto d = InterEventDistribution::lognormal(-0.2, 0.5);
    auto mom = [&](int p) { return std::exp(p * -0.2 + 0.5 * p * p * 0.25); };
    CHECK(rel_err(d.mean(), mom(1)) < 1e-13);
    CHECK(rel_err(d.raw_moment(2), mom(2)) < 1e-13);
    CHECK(rel_err(d.raw_moment4(), mom(4)) < 1e-13);
  }
  SECTION("weibull") {
    auto d = InterEventDistribution::weibull(1.7, 1.1);
    auto mom = [&](int p) { return std::pow(1.1, p) * std::tgamma(1.0 + p / 1.7); };
    CHECK(rel_err(d.mean(), mom(1)) < 1e-13);
    CHECK(rel_err(d.raw_moment(3), mom(3)) < 1e-13);
  }
  SECTION("invalid order") {
    CHECK_THROWS_AS(InterEventDistribution::gamma(2.0, 1.0).raw_moment(5), DomainError);
  }
}

TEST_CASE("tabulated law approximates its source", "[distribution]") {
  auto tab = tabulated_gamma(3.0, 0.5);
  boost::math::gamma_distribution<double> ref(3.0, 0.5);
  // Interpolation-grade agreement: the table has 400 knots, so sub-percent is
  // the design accuracy, not solver-grade precision.
  CHECK(rel_err(tab.mean(), 1.5) < 1e-6);
  CHECK(rel_err(tab.raw_moment(2), 0.25 * 3.0 * 4.0) < 1e-3);
  for (double x : {0.4, 1.0, 2.2}) {
    CHECK(rel_err(tab.cdf(x), boost::math::cdf(ref, x)) < 5e-3);
    CHECK(rel_err(tab.pdf(x), boost::math::pdf(ref, x)) < 5e-3);
  }
}

TEST_CASE("pdf normalization and timer-pdf normalization", "[distribution]") {
  auto laws = continuous_laws();
  laws.push_back(tabulated_gamma(3.0, 0.5));
  for (const auto& d : laws) {
    auto total = d.expect_over_T([](double) { return 1.0; });
    CHECK(rel_err(total.value, 1.0) < 1e-9);
    // Stationary timer density integrates to 1.
    auto timer_total = d.expect_over_tau([](double) { return 1.0; });
    CHECK(rel_err(timer_total.value, 1.0) < 1e-8);
    // And its mean is <T^2> / (2 <T>).
    auto timer_mean = d.expect_over_tau([](double t) { return t; });
    CHECK(rel_err(timer_mean.value, d.raw_moment(2) / (2.0 * d.mean())) < 1e-8);
  }
}

TEST_CASE("deterministic law special cases", "[distribution]") {
  auto d = InterEventDistribution::deterministic(0.8);
  CHECK_THROWS_AS(d.pdf(0.5), DomainError);
  CHECK_THROWS_AS(d.hazard(0.5), DomainError);
  CHECK(d.survival(0.5) == 1.0);
  CHECK(d.survival(0.9) == 0.0);
  CHECK(rel_err(d.timer_pdf(0.5), 1.0 / 0.8) < 1e-15);
  CHECK(d.timer_pdf(1.0) == 0.0);
  auto r = d.expect_over_T([](double t) { return t * t; });
  CHECK(r.value == 0.8 * 0.8);
  CHECK(r.error == 0.0);
}

TEST_CASE("hazard equals pdf over survival", "[distribution]") {
  for (const auto& d : continuous_laws()) {
    for (double x : {0.2, 0.9, 1.7}) {
      CHECK(rel_err(d.hazard(x), d.pdf(x) / d.survival(x)) < 1e-12);
    }
  }
}

TEST_CASE("quantile inverts the cdf", "[distribution]") {
  auto laws = continuous_laws();
  laws.push_back(tabulated_gamma(3.0, 0.5));
  for (const auto& d : laws) {
    for (double u : {0.05, 0.3, 0.62, 0.95}) {
      CHECK(std::abs(d.cdf(d.quantile(u)) - u) < 1e-9);
    }
  }
}

TEST_CASE("sample_T follows the law", "[distribution]") {
  RngStream rng(2024, 0);
  auto d = InterEventDistribution::gamma(4.0, 0.25);
  std::vector<double> samples;
  for (int i = 0; i < 2000; ++i) samples.push_back(d.sample_T(rng));
  boost::math::gamma_distribution<double> ref(4.0, 0.25);
  auto ks = ks_against_cdf(samples, [&](double x) { return boost::math::cdf(ref, x); });
  INFO("KS statistic " << ks.statistic << " threshold " << ks.threshold);
  CHECK(ks.ok);
}

TEST_CASE("length-biased samples follow t f(t)/<T>", "[distribution]") {
  SECTION("gamma biases to shape + 1") {
    RngStream rng(11, 0);
    auto d = InterEventDistribution::gamma(4.0, 0.25);
    std::vector<double> samples;
    for (int i = 0; i < 2000; ++i) samples.push_back(d.sample_length_biased(rng));
    boost::math::gamma_distribution<double> ref(5.0, 0.25);
    auto ks = ks_against_cdf(samples, [&](double x) { return boost::math::cdf(ref, x); });
    INFO("KS statistic " << ks.statistic << " threshold " << ks.threshold);
    CHECK(ks.ok);
  }
  SECTION("exponential biases to gamma(2)") {
    RngStream rng(12, 0);
    auto d = InterEventDistribution::exponential(1.4);
    std::vector<double> samples;
    for (int i = 0; i < 2000; ++i) samples.push_back(d.sample_length_biased(rng));
    boost::math::gamma_distribution<double> ref(2.0, 1.0 / 1.4);
    auto ks = ks_against_cdf(samples, [&](double x) { return boost::math::cdf(ref, x); });
    CHECK(ks.ok);
  }
  SECTION("weibull via the closed-form warp") {
    RngStream rng(13, 0);
    auto d = InterEventDistribution::weibull(1.7, 1.1);
    std::vector<double> samples;
    for (int i = 0; i < 2000; ++i) samples.push_back(d.sample_length_biased(rng));
    // Length-biased CDF is int_0^x t f(t) dt / <T>; for weibull with shape k,
    // substituting u = (t/scale)^k gives a lower incomplete gamma at 1 + 1/k.
    auto cdf = [&](double x) {
      return boost::math::gamma_p(1.0 + 1.0 / 1.7, std::pow(x / 1.1, 1.7));
    };
    auto ks = ks_against_cdf(samples, cdf);
    CHECK(ks.ok);
  }
  SECTION("deterministic is its own length-biased law") {
    RngStream rng(14, 0);
    auto d = InterEventDistribution::deterministic(0.8);
    CHECK(d.sample_length_biased(rng) == 0.8);
  }
  SECTION("mean of the biased law is <T^2>/<T>") {
    RngStream rng(15, 0);
    auto d = InterEventDistribution::lognormal(-0.2, 0.5);
    double sum = 0.0, sumsq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double s = d.sample_length_biased(rng);
      sum += s;
      sumsq += s * s;
    }
    const double want = d.raw_moment(2) / d.mean();
    const double got = sum / n;
    const double se = std::sqrt((sumsq / n - got * got) / n);
    CHECK(std::abs(got - want) < 4.0 * se);
  }
}

TEST_CASE("matrix exponential expectations: fast paths equal quadrature", "[distribution]") {
  Matrix M(2, 2);
  M << -1.0, 0.4, 0.2, -0.7;
  auto quadrature_reference = [&](const InterEventDistribution& d) {
    return d.expect_over_T([&](double t) { return expm(Matrix(M * t)); }).value;
  };
  SECTION("gamma with integer shape") {
    auto d = InterEventDistribution::gamma(4.0, 0.25);
    CHECK(max_rel_err(d.expect_matrix_exp_T(M).value, quadrature_reference(d)) < 1e-8);
  }
  SECTION("gamma with fractional shape") {
    auto d = InterEventDistribution::gamma(2.5, 0.4);
    CHECK(max_rel_err(d.expect_matrix_exp_T(M).value, quadrature_reference(d)) < 1e-8);
  }
  SECTION("exponential resolvent") {
    auto d = InterEventDistribution::exponential(1.4);
    CHECK(max_rel_err(d.expect_matrix_exp_T(M).value, quadrature_reference(d)) < 1e-8);
  }
  SECTION("deterministic") {
    auto d = InterEventDistribution::deterministic(0.7);
    CHECK(max_rel_err(d.expect_matrix_exp_T(M).value, expm(Matrix(M * 0.7))) < 1e-13);
  }
  SECTION("scalar check against the gamma mgf") {
    auto d = InterEventDistribution::gamma(4.0, 0.25);
    const double s = -0.9;
    const double want = std::pow(1.0 - s * 0.25, -4.0);
    CHECK(rel_err(d.expect_matrix_exp_T(Matrix::Constant(1, 1, s)).value(0, 0), want) < 1e-12);
  }
}

TEST_CASE("timer-expectation identity equals direct quadrature", "[distribution]") {
  Matrix M(2, 2);
  M << -1.0, 0.4, 0.2, -0.7;
  for (const auto& d : continuous_laws()) {
    const Matrix via_identity = d.expect_matrix_exp_tau_identity(M).value;
    const Matrix via_quadrature =
        d.expect_over_tau([&](double t) { return expm(Matrix(M * t)); }).value;
    CHECK(max_rel_err(via_identity, via_quadrature) < 1e-8);
  }
}

TEST_CASE("scalar timer identity <e^{s tau}> = (<e^{s T}> - 1)/(s <T>)", "[distribution]") {
  const double s = -0.7;
  for (const auto& d : continuous_laws()) {
    const double lhs = d.expect_over_tau([&](double t) { return std::exp(s * t); }).value;
    const double mgf = d.expect_over_T([&](double t) { return std::exp(s * t); }).value;
    CHECK(rel_err(lhs, (mgf - 1.0) / (s * d.mean())) < 1e-8);
  }
}

TEST_CASE("singular generators are rejected by the identity path", "[distribution]") {
  auto d = InterEventDistribution::gamma(4.0, 0.25);
  // Rank 1 with eigenvalues {0, 1.25}, inside the gamma convergence region.
  Matrix singular(2, 2);
  singular << 0.25, 0.5, 0.5, 1.0;
  CHECK_THROWS_AS(d.expect_matrix_exp_tau_identity(singular), NumericalError);
  // The dispatching form falls back to quadrature instead.
  const Matrix got = d.expect_matrix_exp_tau(singular).value;
  const Matrix want = d.expect_over_tau([&](double t) { return expm(Matrix(singular * t)); }).value;
  CHECK(max_rel_err(got, want) < 1e-8);
}

TEST_CASE("divergent matrix expectations are detected up front", "[distribution]") {
  SECTION("exponential tail loses to exp growth") {
    auto d = InterEventDistribution::exponential(1.0);
    CHECK_THROWS_AS(d.expect_matrix_exp_T(Matrix::Constant(1, 1, 2.0)), DivergenceError);
    CHECK_THROWS_AS(d.expect_matrix_exp_T(Matrix::Constant(1, 1, 1.0)), DivergenceError);
    CHECK(d.expect_matrix_exp_T(Matrix::Constant(1, 1, 0.9)).value(0, 0) > 0.0);
  }
  SECTION("gamma tail") {
    auto d = InterEventDistribution::gamma(2.0, 1.0);
    CHECK_THROWS_AS(d.expect_matrix_exp_T(Matrix::Constant(1, 1, 1.0)), DivergenceError);
  }
  SECTION("heavier-than-exponential decay always converges") {
    auto d = InterEventDistribution::weibull(2.0, 1.0);
    CHECK(std::isfinite(d.expect_matrix_exp_T(Matrix::Constant(1, 1, 1.5)).value(0, 0)));
  }
}

TEST_CASE("inadmissible parameters are rejected", "[distribution]") {
  CHECK_THROWS_AS(InterEventDistribution::exponential(0.0), DomainError);
  CHECK_THROWS_AS(InterEventDistribution::gamma(-1.0, 0.5), DomainError);
  CHECK_THROWS_AS(InterEventDistribution::deterministic(0.0), DomainError);
  CHECK_THROWS_AS(InterEventDistribution::lognormal(0.0, -1.0), DomainError);
  CHECK_THROWS_AS(InterEventDistribution::weibull(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(InterEventDistribution::tabulated({0.0, 1.0}, {1.0, -1.0}), DomainError);
  CHECK_THROWS_AS(InterEventDistribution::tabulated({1.0, 0.5}, {1.0, 1.0}), DomainError);
}
