#pragma once

// Event-exact Monte Carlo simulation of the PDMP. Between events the state
// advances by the closed-form affine flow; Poisson families keep persistent
// exponential clocks (memorylessness makes redrawing only the fired clock
// exact); the renewal family redraws its interval from the inter-event law at
// each general reset. No discretization error enters anywhere.
//
// The stationary estimator runs each trajectory for a burn-in number of
// renewal cycles and then observes at a uniform position inside one final
// length-biased interval. The covering interval at a stationary time point is
// length-biased (long intervals are proportionally more likely to cover it),
// so this final draw makes the observed timer age an exact stationary sample.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/constants.hpp"
#include "pdmp/distribution.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/linalg.hpp"
#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/solver.hpp"

namespace pdmp {

enum class GeneralSamplerKind { AffineDeterministic, MomentMatchedGaussian, BinomialPartition };
enum class PoissonOffsetKind { DeterministicMean, MomentMatchedGaussian };

struct SamplerConfig {
  GeneralSamplerKind general = GeneralSamplerKind::MomentMatchedGaussian;
  // Moment-matched by default: dropping the declared offset variance would
  // bias second moments whenever R1_second > R1_mean R1_mean^T.
  PoissonOffsetKind poisson_offsets = PoissonOffsetKind::MomentMatchedGaussian;
  double binomial_p = 0.5;
  // Clamping negative gaussian draws to zero biases the reset moments; off by
  // default so closed-form/MC agreement is a true test.
  bool clamp_gaussian_at_zero = false;
};

struct TrajectoryEvent {
  double time = 0.0;
  int kind = -1;  // index of the Poisson family, or -1 for the general reset
  Vector state_before;
  Vector state_after;
};

struct Trajectory {
  uint64_t seed = 0;
  std::vector<TrajectoryEvent> events;
  std::vector<double> observation_times;
  std::vector<Vector> observations;
  Vector final_state;
  double final_time = 0.0;
};

struct EnsembleStats {
  int64_t n_traj = 0;
  double mean_observation_time = 0.0;
  Vector mean;            // ensemble mean of the observed state
  Vector mean_se;
  Matrix second_moment;   // ensemble mean of x x^T
  Matrix second_moment_se;
  Vector cv2;             // per-coordinate (second - mean^2)/mean^2
  Vector cv2_se;          // delta-method standard error
  std::vector<double> timer_samples;  // observed stationary ages, for KS checks
  std::vector<std::string> warnings;
};

namespace detail {

// Square root factor of a symmetric matrix with negative eigenvalues clipped
// to zero; gaussian reset covariances can be slightly indefinite at extreme
// states and clipping is the closest valid covariance.
inline Matrix psd_sqrt(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericalError("psd_sqrt: eigendecomposition failed");
  Vector lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal();
}

struct PoissonOffsetSampler {
  Vector mean;
  Matrix sqrt_cov;  // empty when offsets are deterministic
  Vector draw(RngStream& rng) const {
    if (sqrt_cov.size() == 0) return mean;
    Vector z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return mean + sqrt_cov * z;
  }
};

class TrajectoryEngine {
 public:
  TrajectoryEngine(const PDMPModel& m, const SamplerConfig& cfg, RngStream& rng)
      : model_(m), cfg_(cfg), rng_(rng), n_(m.dim()) {
    if (cfg.general == GeneralSamplerKind::BinomialPartition) {
      if (n_ != 1)
        throw DomainError("binomial-partition sampler requires a one-dimensional state");
      if (!(cfg.binomial_p >= 0.0) || !(cfg.binomial_p <= 1.0))
        throw DomainError("binomial-partition: p must lie in [0, 1]");
      // Binomial(x, p) has conditional mean p x and variance p(1-p) x; the
      // model must declare exactly those moments or the run would silently
      // contradict the closed forms it is supposed to validate.
      const auto& g = m.general_family;
      const double p = cfg.binomial_p;
      const double declared_b = 2.0 * g.B2(0, 0) * g.C2(0);
      const bool mean_ok =
          std::abs(g.J2(0, 0) - p) <= 1e-12 && std::abs(g.R2(0)) <= 1e-12;
      const bool var_ok = std::abs(declared_b - p * (1.0 - p)) <= 1e-12 &&
                          g.Q2.cwiseAbs().maxCoeff() == 0.0 &&
                          g.D2.cwiseAbs().maxCoeff() == 0.0;
      if (!mean_ok || !var_ok)
        throw DomainError(
            "binomial-partition sampler: model must declare J2 = p, R2 = 0, and "
            "conditional variance b x with b = p(1-p)");
    }
    scalar_flow_ = (n_ == 1);
    if (scalar_flow_) {
      flow_a_ = m.dynamics.A(0, 0);
      flow_c_ = m.dynamics.a_hat(0);
    }
    for (const auto& f : m.poisson_families) {
      PoissonOffsetSampler s;
      s.mean = f.R1_mean;
      if (cfg.poisson_offsets == PoissonOffsetKind::MomentMatchedGaussian) {
        const Matrix cov = f.R1_second - f.R1_mean * f.R1_mean.transpose();
        if (cov.cwiseAbs().maxCoeff() > 0.0) s.sqrt_cov = psd_sqrt(cov);
      }
      offsets_.push_back(std::move(s));
    }
  }

  double time() const { return t_; }
  const Vector& state() const { return x_; }

  void reset_state(Vector x0, double t0) {
    x_ = std::move(x0);
    t_ = t0;
    next_poisson_.clear();
    for (const auto& f : model_.poisson_families)
      next_poisson_.push_back(t_ + rng_.exponential(f.rate));
  }

  // Advance to target time, processing every Poisson event on the way.
  // Observer::on_event(time, kind, before, after) is called per event.
  template <class Observer>
  void advance_to(double target, Observer&& obs) {
    while (true) {
      int next_family = -1;
      double next_time = target;
      for (size_t i = 0; i < next_poisson_.size(); ++i) {
        if (next_poisson_[i] < next_time) {
          next_time = next_poisson_[i];
          next_family = static_cast<int>(i);
        }
      }
      flow(next_time - t_);
      t_ = next_time;
      if (next_family < 0) return;
      const auto& fam = model_.poisson_families[static_cast<size_t>(next_family)];
      Vector before = x_;
      x_ = fam.J1 * x_ + offsets_[static_cast<size_t>(next_family)].draw(rng_);
      check_finite();
      obs(t_, next_family, before, x_);
      next_poisson_[static_cast<size_t>(next_family)] = t_ + rng_.exponential(fam.rate);
    }
  }

  // Apply the configured general-reset sampler in place.
  template <class Observer>
  void apply_general_reset(Observer&& obs) {
    const auto& g = model_.general_family;
    Vector before = x_;
    switch (cfg_.general) {
      case GeneralSamplerKind::AffineDeterministic:
        x_ = g.J2 * x_ + g.R2;
        break;
      case GeneralSamplerKind::MomentMatchedGaussian: {
        Vector mean = g.J2 * x_ + g.R2;
        Matrix cov = g.Q2 * x_ * x_.transpose() * g.Q2.transpose() +
                     g.B2 * x_ * g.C2.transpose() + g.C2 * x_.transpose() * g.B2.transpose() +
                     g.D2;
        if (n_ == 1) {
          const double v = std::max(cov(0, 0), 0.0);
          x_(0) = mean(0) + std::sqrt(v) * rng_.normal();
        } else {
          Vector z(n_);
          for (Eigen::Index i = 0; i < n_; ++i) z(i) = rng_.normal();
          x_ = mean + psd_sqrt(cov) * z;
        }
        if (cfg_.clamp_gaussian_at_zero) x_ = x_.cwiseMax(0.0);
        break;
      }
      case GeneralSamplerKind::BinomialPartition: {
        const long long count = std::max(0ll, std::llround(x_(0)));
        x_(0) = static_cast<double>(rng_.binomial(count, cfg_.binomial_p));
        break;
      }
    }
    check_finite();
    obs(t_, -1, before, x_);
  }

 private:
  void flow(double dt) {
    if (dt < 0)
      throw NumericalError("trajectory: time went backwards (dt = " + std::to_string(dt) + ")");
    if (dt == 0) return;
    if (scalar_flow_) {
      // x(t+dt) = e^{a dt} x + c (e^{a dt} - 1)/a, organized around expm1 so
      // the a -> 0 limit is exact.
      if (flow_a_ == 0.0) {
        x_(0) += flow_c_ * dt;
      } else {
        const double e = std::expm1(flow_a_ * dt);
        x_(0) += e * x_(0) + flow_c_ * (e / flow_a_);
      }
    } else {
      const Flow fl = flow_with_integral(model_.dynamics.A, model_.dynamics.a_hat, dt);
      x_ = fl.transition * x_ + fl.integral;
    }
    check_finite();
  }

  void check_finite() {
    if (!x_.allFinite())
      throw NumericalError("trajectory diverged to non-finite state at t = " +
                           std::to_string(t_));
  }

  const PDMPModel& model_;
  const SamplerConfig& cfg_;
  RngStream& rng_;
  Eigen::Index n_;
  bool scalar_flow_ = false;
  double flow_a_ = 0.0, flow_c_ = 0.0;
  Vector x_;
  double t_ = 0.0;
  std::vector<double> next_poisson_;
  std::vector<PoissonOffsetSampler> offsets_;
};

}  // namespace detail

// Independent random stream for one trajectory; same (seed, index) always
// yields the same draw sequence on every platform.
inline RngStream rng_stream(uint64_t seed, uint64_t trajectory_index) {
  return RngStream(seed, trajectory_index);
}

// Simulate on [0, t_end] from x0 with a full event log; the renewal clock
// starts fresh at t = 0. observe_at times must be nondecreasing.
inline Trajectory simulate_trajectory(const PDMPModel& m, const SamplerConfig& samplers,
                                      const Vector& x0, double t_end, uint64_t seed,
                                      const std::vector<double>& observe_at = {}) {
  require_valid(m);
  if (!(t_end > 0)) throw DomainError("simulate_trajectory: t_end must be positive");
  for (size_t i = 0; i + 1 < observe_at.size(); ++i)
    if (observe_at[i + 1] < observe_at[i])
      throw DomainError("simulate_trajectory: observation times must be nondecreasing");
  if (x0.size() != m.dim()) throw DimensionError("simulate_trajectory: x0 has wrong dimension");

  RngStream rng = rng_stream(seed, 0);
  detail::TrajectoryEngine engine(m, samplers, rng);
  engine.reset_state(x0, 0.0);

  Trajectory traj;
  traj.seed = seed;
  auto log_event = [&](double t, int kind, const Vector& before, const Vector& after) {
    traj.events.push_back({t, kind, before, after});
  };

  size_t next_obs = 0;
  double renewal_at = m.general_family.dist.sample_T(rng);
  while (true) {
    const double target = std::min(renewal_at, t_end);
    // Record observations that fall before the next reset or the horizon.
    while (next_obs < observe_at.size() && observe_at[next_obs] <= target &&
           observe_at[next_obs] <= t_end) {
      engine.advance_to(observe_at[next_obs], log_event);
      traj.observation_times.push_back(observe_at[next_obs]);
      traj.observations.push_back(engine.state());
      ++next_obs;
    }
    engine.advance_to(target, log_event);
    if (target >= t_end) break;
    engine.apply_general_reset(log_event);
    renewal_at += m.general_family.dist.sample_T(rng);
  }
  traj.final_state = engine.state();
  traj.final_time = engine.time();
  return traj;
}

// Stationary-moment estimation: per trajectory, burn in n_cycles_burnin full
// renewal cycles from x0 = 0, then observe at a uniform position inside one
// length-biased interval. Results are reduced sequentially from an indexed
// per-trajectory buffer, so they are identical regardless of how the
// trajectory loop would be scheduled.
inline EnsembleStats estimate_stationary_moments(const PDMPModel& m,
                                                 const SamplerConfig& samplers, int64_t n_traj,
                                                 int n_cycles_burnin, uint64_t seed,
                                                 const Tolerances& tol = default_tolerances()) {
  require_valid(m);
  if (n_traj < 100) throw DomainError("estimate_stationary_moments: need at least 100 trajectories");
  if (n_cycles_burnin < 0) throw DomainError("estimate_stationary_moments: negative burn-in");
  const Eigen::Index n = m.dim();

  EnsembleStats stats;
  stats.n_traj = n_traj;
  try {
    const auto rep1 = check_stability(m, 1, tol);
    if (!rep1.stable)
      stats.warnings.push_back("order-1 spectral radius " + std::to_string(rep1.spectral_radius) +
                               " is not inside the unit circle; estimates will not stabilize");
    else {
      const auto rep2 = check_stability(m, 2, tol);
      if (!rep2.stable)
        stats.warnings.push_back("order-2 spectral radius " + std::to_string(rep2.spectral_radius) +
                                 " is not inside the unit circle; second moments will not stabilize");
    }
  } catch (const DivergenceError& e) {
    stats.warnings.push_back(std::string("stability undetermined: ") + e.what());
  }

  // Indexed buffers: slot i belongs to trajectory i regardless of run order.
  std::vector<Vector> states(static_cast<size_t>(n_traj));
  std::vector<double> ages(static_cast<size_t>(n_traj));
  std::vector<double> times(static_cast<size_t>(n_traj));
  auto noop = [](double, int, const Vector&, const Vector&) {};
  for (int64_t i = 0; i < n_traj; ++i) {
    RngStream rng = rng_stream(seed, static_cast<uint64_t>(i));
    detail::TrajectoryEngine engine(m, samplers, rng);
    engine.reset_state(Vector::Zero(n), 0.0);
    double t = 0.0;
    for (int c = 0; c < n_cycles_burnin; ++c) {
      t += m.general_family.dist.sample_T(rng);
      engine.advance_to(t, noop);
      engine.apply_general_reset(noop);
    }
    const double covering = m.general_family.dist.sample_length_biased(rng);
    const double age = rng.uniform() * covering;
    engine.advance_to(t + age, noop);
    states[static_cast<size_t>(i)] = engine.state();
    ages[static_cast<size_t>(i)] = age;
    times[static_cast<size_t>(i)] = t + age;
  }

  // Sequential reduction in index order.
  Vector sum = Vector::Zero(n);
  Matrix sum2 = Matrix::Zero(n, n);
  Matrix sum2sq = Matrix::Zero(n, n);  // elementwise squares of x x^T, for SEs
  Vector sum_sq = Vector::Zero(n), sum_cube = Vector::Zero(n), sum_quart = Vector::Zero(n);
  double time_sum = 0.0;
  for (int64_t i = 0; i < n_traj; ++i) {
    const Vector& x = states[static_cast<size_t>(i)];
    sum += x;
    const Matrix outer = x * x.transpose();
    sum2 += outer;
    sum2sq += outer.cwiseProduct(outer);
    sum_sq += x.cwiseProduct(x);
    sum_cube += x.cwiseProduct(x).cwiseProduct(x);
    sum_quart += x.cwiseProduct(x).cwiseProduct(x).cwiseProduct(x);
    time_sum += times[static_cast<size_t>(i)];
  }
  const double N = static_cast<double>(n_traj);
  stats.mean = sum / N;
  stats.second_moment = sum2 / N;
  stats.mean_observation_time = time_sum / N;
  stats.timer_samples = std::move(ages);

  stats.mean_se = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double var = std::max(0.0, sum_sq(i) / N - stats.mean(i) * stats.mean(i));
    stats.mean_se(i) = std::sqrt(var / N);
  }
  stats.second_moment_se = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double m2 = stats.second_moment(i, j);
      const double var = std::max(0.0, sum2sq(i, j) / N - m2 * m2);
      stats.second_moment_se(i, j) = std::sqrt(var / N);
    }

  // CV^2 and its delta-method standard error from per-coordinate moments to
  // fourth order: cv2 = s/m^2 - 1 with (m, s) the sample first two moments.
  stats.cv2 = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
  stats.cv2_se = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m1 = stats.mean(i);
    if (m1 == 0.0) continue;
    const double m2 = sum_sq(i) / N, m3 = sum_cube(i) / N, m4 = sum_quart(i) / N;
    stats.cv2(i) = m2 / (m1 * m1) - 1.0;
    const double var_m = m2 - m1 * m1;
    const double var_s = m4 - m2 * m2;
    const double cov_ms = m3 - m1 * m2;
    const double dm = -2.0 * m2 / (m1 * m1 * m1);
    const double ds = 1.0 / (m1 * m1);
    const double v = dm * dm * var_m + 2.0 * dm * ds * cov_ms + ds * ds * var_s;
    stats.cv2_se(i) = std::sqrt(std::max(v, 0.0) / N);
  }
  return stats;
}

}  // namespace pdmp
