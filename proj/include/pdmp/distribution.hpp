#pragma once

// Inter-event time distributions for the renewal reset family, with the exact
// functionals the stationary solver consumes: raw moments, expectations over
// the interval T, matrix exponentials E[exp(M T)], and expectations under the
// stationary age law whose density is survival(t)/mean ("timer" law).
//
// Every expectation functional returns its value together with an achieved
// error estimate. Sampling is by CDF inversion throughout, so one stream draw
// maps to one variate and trajectories are reproducible draw-for-draw.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/weibull.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "pdmp/constants.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/interp.hpp"
#include "pdmp/linalg.hpp"
#include "pdmp/quadrature.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

enum class DistributionKind { Exponential, Gamma, Deterministic, LogNormal, Weibull, Tabulated };

inline const char* to_string(DistributionKind k) {
  switch (k) {
    case DistributionKind::Exponential: return "exponential";
    case DistributionKind::Gamma: return "gamma";
    case DistributionKind::Deterministic: return "deterministic";
    case DistributionKind::LogNormal: return "lognormal";
    case DistributionKind::Weibull: return "weibull";
    case DistributionKind::Tabulated: return "tabulated";
  }
  return "unknown";
}

class InterEventDistribution {
 public:
  static InterEventDistribution exponential(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate))
      throw DomainError("exponential: rate must be positive and finite");
    return InterEventDistribution(DistributionKind::Exponential, rate, 0.0);
  }

  static InterEventDistribution gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale))
      throw DomainError("gamma: shape and scale must be positive and finite");
    return InterEventDistribution(DistributionKind::Gamma, shape, scale);
  }

  static InterEventDistribution deterministic(double value) {
    if (!(value > 0.0) || !std::isfinite(value))
      throw DomainError("deterministic: value must be positive and finite");
    return InterEventDistribution(DistributionKind::Deterministic, value, 0.0);
  }

  static InterEventDistribution lognormal(double mu, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma))
      throw DomainError("lognormal: sigma must be positive, parameters finite");
    return InterEventDistribution(DistributionKind::LogNormal, mu, sigma);
  }

  static InterEventDistribution weibull(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale))
      throw DomainError("weibull: shape and scale must be positive and finite");
    return InterEventDistribution(DistributionKind::Weibull, shape, scale);
  }

  // Density samples (t_i, w_i) on a strictly increasing nonnegative grid. The
  // CDF is the renormalized trapezoid integral of the samples, smoothed by a
  // monotone cubic; pdf and quantile derive from that interpolant, so the
  // three stay mutually consistent.
  static InterEventDistribution tabulated(std::vector<double> ts, std::vector<double> ws) {
    validate_table(ts, ws);
    InterEventDistribution d(DistributionKind::Tabulated, 0.0, 0.0);
    d.build_table(ts, ws);
    d.length_biased_ = std::make_shared<InterEventDistribution>(
        make_length_biased_table(ts, d.table_ws_, d.moments_[0]));
    return d;
  }

  DistributionKind kind() const { return kind_; }
  // Meaning depends on kind: rate | shape | value | mu | shape.
  double param_a() const { return a_; }
  // Meaning depends on kind: unused | scale | unused | sigma | scale.
  double param_b() const { return b_; }
  const std::vector<double>& table_times() const { return table_ts_; }
  const std::vector<double>& table_weights() const { return table_ws_; }

  double mean() const { return raw_moment(1); }

  double raw_moment(int order) const {
    if (order < 1 || order > 3)
      throw DomainError("raw_moment: order must be 1, 2, or 3");
    return moment_impl(order);
  }

  // Fourth moment; kept separate from raw_moment because only series
  // expansions of downstream models consume it.
  double raw_moment4() const { return moment_impl(4); }

  double pdf(double t) const {
    switch (kind_) {
      case DistributionKind::Exponential:
        return t < 0 ? 0.0 : boost::math::pdf(boost::math::exponential_distribution<>(a_), t);
      case DistributionKind::Gamma:
        return t < 0 ? 0.0 : boost::math::pdf(boost::math::gamma_distribution<>(a_, b_), t);
      case DistributionKind::Deterministic:
        throw DomainError("pdf: deterministic interval has no density");
      case DistributionKind::LogNormal:
        return t <= 0 ? 0.0 : boost::math::pdf(boost::math::lognormal_distribution<>(a_, b_), t);
      case DistributionKind::Weibull:
        return t < 0 ? 0.0 : boost::math::pdf(boost::math::weibull_distribution<>(a_, b_), t);
      case DistributionKind::Tabulated:
        return cdf_interp_->derivative(t);
    }
    throw DomainError("pdf: unknown kind");
  }

  double cdf(double t) const {
    if (t <= 0) return 0.0;
    switch (kind_) {
      case DistributionKind::Exponential:
        return boost::math::cdf(boost::math::exponential_distribution<>(a_), t);
      case DistributionKind::Gamma:
        return boost::math::cdf(boost::math::gamma_distribution<>(a_, b_), t);
      case DistributionKind::Deterministic:
        return t >= a_ ? 1.0 : 0.0;
      case DistributionKind::LogNormal:
        return boost::math::cdf(boost::math::lognormal_distribution<>(a_, b_), t);
      case DistributionKind::Weibull:
        return boost::math::cdf(boost::math::weibull_distribution<>(a_, b_), t);
      case DistributionKind::Tabulated:
        return (*cdf_interp_)(t);
    }
    throw DomainError("cdf: unknown kind");
  }

  double survival(double t) const {
    if (t <= 0) return 1.0;
    using boost::math::complement;
    switch (kind_) {
      case DistributionKind::Exponential:
        return boost::math::cdf(complement(boost::math::exponential_distribution<>(a_), t));
      case DistributionKind::Gamma:
        return boost::math::cdf(complement(boost::math::gamma_distribution<>(a_, b_), t));
      case DistributionKind::Deterministic:
        return t >= a_ ? 0.0 : 1.0;
      case DistributionKind::LogNormal:
        return boost::math::cdf(complement(boost::math::lognormal_distribution<>(a_, b_), t));
      case DistributionKind::Weibull:
        return boost::math::cdf(complement(boost::math::weibull_distribution<>(a_, b_), t));
      case DistributionKind::Tabulated:
        return 1.0 - (*cdf_interp_)(t);
    }
    throw DomainError("survival: unknown kind");
  }

  double hazard(double t) const {
    if (kind_ == DistributionKind::Deterministic)
      throw DomainError("hazard: undefined for a deterministic interval");
    const double s = survival(t);
    if (s <= 0.0) throw DomainError("hazard: evaluated beyond the support");
    return pdf(t) / s;
  }

  // Density of the stationary elapsed-time-since-last-renewal ("age") law.
  double timer_pdf(double t) const {
    if (t < 0) return 0.0;
    return survival(t) / mean();
  }

  double quantile(double u) const {
    if (!(u >= 0.0) || !(u < 1.0)) throw DomainError("quantile: u must lie in [0, 1)");
    switch (kind_) {
      case DistributionKind::Exponential:
        return u == 0.0 ? 0.0
                        : boost::math::quantile(boost::math::exponential_distribution<>(a_), u);
      case DistributionKind::Gamma:
        return u == 0.0 ? 0.0 : boost::math::quantile(boost::math::gamma_distribution<>(a_, b_), u);
      case DistributionKind::Deterministic:
        return a_;
      case DistributionKind::LogNormal:
        return u == 0.0 ? 0.0
                        : boost::math::quantile(boost::math::lognormal_distribution<>(a_, b_), u);
      case DistributionKind::Weibull:
        return u == 0.0 ? 0.0 : boost::math::quantile(boost::math::weibull_distribution<>(a_, b_), u);
      case DistributionKind::Tabulated:
        return cdf_interp_->inverse(u);
    }
    throw DomainError("quantile: unknown kind");
  }

  double sample_T(RngStream& rng) const {
    if (kind_ == DistributionKind::Deterministic) return a_;
    return quantile(rng.uniform_open());
  }

  // Draw from the length-biased interval law t f(t)/mean: the distribution of
  // the renewal interval covering a fixed stationary time point. Closed form
  // per kind; tabulated falls back to a reweighted grid.
  double sample_length_biased(RngStream& rng) const {
    switch (kind_) {
      case DistributionKind::Exponential:
        // t rate^2 exp(-rate t) is gamma(2, 1/rate)
        return boost::math::quantile(boost::math::gamma_distribution<>(2.0, 1.0 / a_),
                                     rng.uniform_open());
      case DistributionKind::Gamma:
        return boost::math::quantile(boost::math::gamma_distribution<>(a_ + 1.0, b_),
                                     rng.uniform_open());
      case DistributionKind::Deterministic:
        return a_;
      case DistributionKind::LogNormal:
        // t times a lognormal density is lognormal with mu shifted by sigma^2
        return boost::math::quantile(boost::math::lognormal_distribution<>(a_ + b_ * b_, b_),
                                     rng.uniform_open());
      case DistributionKind::Weibull: {
        // T = scale Z^(1/shape) with Z unit exponential; biasing by t maps Z
        // to gamma(1 + 1/shape, 1).
        const double g = boost::math::quantile(
            boost::math::gamma_distribution<>(1.0 + 1.0 / a_, 1.0), rng.uniform_open());
        return b_ * std::pow(g, 1.0 / a_);
      }
      case DistributionKind::Tabulated:
        return length_biased_->sample_T(rng);
    }
    throw DomainError("sample_length_biased: unknown kind");
  }

  // Upper integration limit: quantile at 1 - tail_mass, exact endpoint for
  // bounded supports.
  double upper_truncation(const Tolerances& tol = default_tolerances()) const {
    using boost::math::complement;
    switch (kind_) {
      case DistributionKind::Exponential:
        return boost::math::quantile(
            complement(boost::math::exponential_distribution<>(a_), tol.tail_mass));
      case DistributionKind::Gamma:
        return boost::math::quantile(
            complement(boost::math::gamma_distribution<>(a_, b_), tol.tail_mass));
      case DistributionKind::Deterministic:
        return a_;
      case DistributionKind::LogNormal:
        return boost::math::quantile(
            complement(boost::math::lognormal_distribution<>(a_, b_), tol.tail_mass));
      case DistributionKind::Weibull:
        return boost::math::quantile(
            complement(boost::math::weibull_distribution<>(a_, b_), tol.tail_mass));
      case DistributionKind::Tabulated:
        return table_ts_.back();
    }
    throw DomainError("upper_truncation: unknown kind");
  }

  // E[g(T)] by adaptive quadrature against the density, exact for the
  // deterministic point mass. g may return double, Vector, or Matrix.
  template <class F>
  auto expect_over_T(F&& g, const Tolerances& tol = default_tolerances()) const
      -> QuadratureResult<detail::plain_value_t<decltype(g(0.0))>> {
    using Value = detail::plain_value_t<decltype(g(0.0))>;
    if (kind_ == DistributionKind::Deterministic) return {g(a_), 0.0, 0};
    // The explicit return type materializes g's result while its temporaries
    // are still alive; a lazy product here would reference destroyed storage.
    auto integrand = [&](double t) -> Value { return g(t) * pdf(t); };
    return integrate_adaptive(integrand, 0.0, upper_truncation(tol),
                              QuadratureOptions::from(tol), quad_breakpoints());
  }

  // E[g(tau)] with tau distributed by timer_pdf.
  template <class F>
  auto expect_over_tau(F&& g, const Tolerances& tol = default_tolerances()) const
      -> QuadratureResult<detail::plain_value_t<decltype(g(0.0))>> {
    using Value = detail::plain_value_t<decltype(g(0.0))>;
    const double m = mean();
    auto integrand = [&](double t) -> Value { return g(t) * (survival(t) / m); };
    return integrate_adaptive(integrand, 0.0, upper_truncation(tol),
                              QuadratureOptions::from(tol), quad_breakpoints());
  }

  // Same expectation through the interchange identity
  //   E[g(tau)] = E[ int_0^T g(u) du ] / mean,
  // nested quadrature. Slower; exists as an independent code path to check
  // expect_over_tau against.
  template <class F>
  auto expect_over_tau_nested(F&& g, const Tolerances& tol = default_tolerances()) const
      -> QuadratureResult<detail::plain_value_t<decltype(g(0.0))>> {
    auto inner = [&](double t) {
      return integrate_adaptive(g, 0.0, t, QuadratureOptions::from(tol)).value;
    };
    auto outer = expect_over_T(inner, tol);
    const double m = mean();
    return {outer.value * (1.0 / m), outer.error / m, outer.panels};
  }

  // E[exp(M T)] with closed forms where the kind admits one:
  //   exponential: rate (rate I - M)^-1
  //   gamma:       (I - scale M)^-shape
  //   deterministic: exp(M value)
  // and matrix-valued adaptive quadrature otherwise. Throws DivergenceError
  // when the expectation does not exist for this M (interval tail heavier
  // than the decay of exp(M t)).
  QuadratureResult<Matrix> expect_matrix_exp_T(const Matrix& M,
                                               const Tolerances& tol = default_tolerances()) const {
    if (M.rows() != M.cols()) throw DimensionError("expect_matrix_exp_T: M must be square");
    const auto n = M.rows();
    const Matrix eye = Matrix::Identity(n, n);
    guard_divergence(spectral_abscissa(M), tol);
    switch (kind_) {
      case DistributionKind::Exponential: {
        Matrix out = (eye - M / a_).partialPivLu().solve(eye);
        return {out, analytic_error(out), 0};
      }
      case DistributionKind::Gamma: {
        const Matrix C = eye - b_ * M;
        const double kround = std::round(a_);
        if (std::abs(a_ - kround) < 1e-12 * std::max(1.0, a_) && kround >= 1.0) {
          Matrix Cinv = C.partialPivLu().solve(eye);
          Matrix out = matrix_power(Cinv, static_cast<uint64_t>(kround));
          return {out, analytic_error(out), 0};
        }
        Matrix out;
        if (fractional_inverse_power(C, a_, out)) return {out, analytic_error(out), 0};
        break;  // ill-conditioned eigenbasis: integrate instead
      }
      case DistributionKind::Deterministic: {
        Matrix out = expm(M * a_);
        return {out, analytic_error(out), 0};
      }
      default:
        break;
    }
    return expect_over_T([&](double t) { return expm(M * t); }, tol);
  }

  // E[exp(M tau)] under the timer law. Uses the renewal identity
  //   E[exp(M tau)] = M^-1 (E[exp(M T)] - I) / mean
  // when M is safely invertible, falling back to quadrature against timer_pdf
  // otherwise.
  QuadratureResult<Matrix> expect_matrix_exp_tau(
      const Matrix& M, const Tolerances& tol = default_tolerances()) const {
    if (M.rows() != M.cols()) throw DimensionError("expect_matrix_exp_tau: M must be square");
    if (invertible_for_identity(M)) return expect_matrix_exp_tau_identity(M, tol);
    return expect_over_tau([&](double t) { return expm(M * t); }, tol);
  }

  // The identity path by itself; throws NumericalError when M is singular.
  QuadratureResult<Matrix> expect_matrix_exp_tau_identity(
      const Matrix& M, const Tolerances& tol = default_tolerances()) const {
    if (M.rows() != M.cols())
      throw DimensionError("expect_matrix_exp_tau_identity: M must be square");
    auto big = expect_matrix_exp_T(M, tol);
    const Matrix rhs = big.value - Matrix::Identity(M.rows(), M.cols());
    Eigen::FullPivLU<Matrix> lu(M);
    if (!lu.isInvertible())
      throw NumericalError("expect_matrix_exp_tau_identity: M is singular, use expect_over_tau");
    const double m = mean();
    Matrix out = lu.solve(rhs) / m;
    const double amplification = lu.inverse().cwiseAbs().rowwise().sum().maxCoeff();
    return {out, big.error * amplification / m, big.panels};
  }

 private:
  InterEventDistribution(DistributionKind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}

  static double analytic_error(const Matrix& out) {
    return 1e-15 * (1.0 + detail::value_norm(out));
  }

  static bool invertible_for_identity(const Matrix& M) {
    Eigen::FullPivLU<Matrix> lu(M);
    if (!lu.isInvertible()) return false;
    // Reject nearly singular inputs where the identity would amplify the
    // E[exp(MT)] error catastrophically.
    const auto& lumat = lu.matrixLU();
    double maxp = 0.0, minp = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < lumat.rows(); ++i) {
      const double p = std::abs(lumat(i, i));
      maxp = std::max(maxp, p);
      minp = std::min(minp, p);
    }
    return minp > 1e-13 * maxp;
  }

  static void validate_table(const std::vector<double>& ts, const std::vector<double>& ws) {
    if (ts.size() < 2 || ts.size() != ws.size())
      throw DomainError("tabulated: need two or more (time, weight) pairs");
    if (!(ts.front() >= 0.0)) throw DomainError("tabulated: times must be nonnegative");
    double mass = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) {
      if (!std::isfinite(ts[i]) || !std::isfinite(ws[i]) || ws[i] < 0.0)
        throw DomainError("tabulated: weights must be finite and nonnegative");
      if (i + 1 < ts.size()) {
        if (!(ts[i + 1] > ts[i])) throw DomainError("tabulated: times must be strictly increasing");
        mass += 0.5 * (ws[i] + ws[i + 1]) * (ts[i + 1] - ts[i]);
      }
    }
    if (!(mass > 0.0)) throw DomainError("tabulated: total mass must be positive");
  }

  void build_table(const std::vector<double>& ts, const std::vector<double>& ws) {
    std::vector<double> cdf(ts.size(), 0.0);
    for (size_t i = 1; i < ts.size(); ++i)
      cdf[i] = cdf[i - 1] + 0.5 * (ws[i] + ws[i - 1]) * (ts[i] - ts[i - 1]);
    const double mass = cdf.back();
    for (double& c : cdf) c /= mass;
    cdf.back() = 1.0;
    table_ts_ = ts;
    table_ws_ = ws;
    for (double& w : table_ws_) w /= mass;
    cdf_interp_ = std::make_shared<MonotoneCubic>(ts, std::move(cdf));
    // Moments of the smoothed density, frozen at construction.
    for (int order = 1; order <= 4; ++order) {
      auto integrand = [&](double t) { return std::pow(t, order) * cdf_interp_->derivative(t); };
      moments_[order - 1] =
          integrate_adaptive(integrand, ts.front(), ts.back(), QuadratureOptions{}, ts).value;
    }
    if (!(moments_[0] > 0.0)) throw DomainError("tabulated: mean must be positive");
  }

  static InterEventDistribution make_length_biased_table(const std::vector<double>& ts,
                                                         const std::vector<double>& ws,
                                                         double mean) {
    std::vector<double> biased(ws.size());
    for (size_t i = 0; i < ws.size(); ++i) biased[i] = ts[i] * ws[i] / mean;
    validate_table(ts, biased);
    InterEventDistribution d(DistributionKind::Tabulated, 0.0, 0.0);
    d.build_table(ts, biased);
    return d;
  }

  double moment_impl(int order) const {
    const double n = order;
    switch (kind_) {
      case DistributionKind::Exponential: {
        double m = 1.0;
        for (int j = 1; j <= order; ++j) m *= j / a_;
        return m;
      }
      case DistributionKind::Gamma: {
        double m = 1.0;
        for (int j = 0; j < order; ++j) m *= b_ * (a_ + j);
        return m;
      }
      case DistributionKind::Deterministic:
        return std::pow(a_, n);
      case DistributionKind::LogNormal:
        return std::exp(n * a_ + 0.5 * n * n * b_ * b_);
      case DistributionKind::Weibull:
        return std::pow(b_, n) * boost::math::tgamma(1.0 + n / a_);
      case DistributionKind::Tabulated:
        return moments_[order - 1];
    }
    throw DomainError("raw_moment: unknown kind");
  }

  std::vector<double> quad_breakpoints() const {
    if (kind_ == DistributionKind::Tabulated) return table_ts_;
    return {};
  }

  void guard_divergence(double alpha, const Tolerances& tol) const {
    switch (kind_) {
      case DistributionKind::Exponential:
        if (alpha >= a_)
          throw DivergenceError("expect_matrix_exp_T: spectral abscissa " + std::to_string(alpha) +
                                " >= exponential rate " + std::to_string(a_));
        return;
      case DistributionKind::Gamma:
        if (alpha >= 1.0 / b_)
          throw DivergenceError("expect_matrix_exp_T: spectral abscissa " + std::to_string(alpha) +
                                " >= 1/scale " + std::to_string(1.0 / b_));
        return;
      case DistributionKind::LogNormal:
        if (alpha > tol.stability_margin)
          throw DivergenceError(
              "expect_matrix_exp_T: lognormal intervals have no exponential moments "
              "(spectral abscissa " +
              std::to_string(alpha) + " > 0)");
        return;
      case DistributionKind::Weibull:
        if (a_ < 1.0 && alpha > tol.stability_margin)
          throw DivergenceError(
              "expect_matrix_exp_T: weibull with shape < 1 has a heavier than exponential "
              "tail (spectral abscissa " +
              std::to_string(alpha) + " > 0)");
        if (a_ == 1.0 && alpha >= 1.0 / b_)
          throw DivergenceError("expect_matrix_exp_T: spectral abscissa " + std::to_string(alpha) +
                                " >= 1/scale " + std::to_string(1.0 / b_));
        return;
      case DistributionKind::Deterministic:
      case DistributionKind::Tabulated:
        return;  // bounded support
    }
  }

  static bool fractional_inverse_power(const Matrix& C, double kappa, Matrix& out) {
    Eigen::EigenSolver<Matrix> es(C);
    if (es.info() != Eigen::Success) return false;
    const Eigen::MatrixXcd V = es.eigenvectors();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(V);
    if (!lu.isInvertible()) return false;
    const Eigen::MatrixXcd Vinv = lu.inverse();
    const double cond =
        V.cwiseAbs().maxCoeff() * Vinv.cwiseAbs().maxCoeff() * static_cast<double>(V.rows());
    if (!(cond < 1e8)) return false;
    Eigen::VectorXcd d = es.eigenvalues();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      // Principal branch; eigenvalues sit in the right half plane whenever the
      // divergence guard has passed.
      d(i) = std::exp(-kappa * std::log(d(i)));
    }
    Eigen::MatrixXcd R = V * d.asDiagonal() * Vinv;
    out = R.real();
    return all_finite(out);
  }

  DistributionKind kind_;
  double a_ = 0.0, b_ = 0.0;
  std::vector<double> table_ts_, table_ws_;
  std::shared_ptr<MonotoneCubic> cdf_interp_;
  std::shared_ptr<InterEventDistribution> length_biased_;
  double moments_[4] = {0.0, 0.0, 0.0, 0.0};
};

}  // namespace pdmp
