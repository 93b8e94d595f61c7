#pragma once

// Monotone cubic (Fritsch-Carlson) interpolation of a nondecreasing data set.
// Used for tabulated CDFs: the interpolant preserves monotonicity, so its
// derivative is a valid (nonnegative) density and inversion is well posed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "pdmp/errors.hpp"

namespace pdmp {

class MonotoneCubic {
 public:
  MonotoneCubic() = default;

  // x strictly increasing, y nondecreasing, sizes equal and >= 2.
  MonotoneCubic(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    const size_t n = x_.size();
    if (n < 2 || y_.size() != n)
      throw DomainError("MonotoneCubic: need two or more matching knots");
    for (size_t i = 0; i + 1 < n; ++i) {
      if (!(x_[i + 1] > x_[i])) throw DomainError("MonotoneCubic: x must be strictly increasing");
      if (y_[i + 1] < y_[i]) throw DomainError("MonotoneCubic: y must be nondecreasing");
    }
    slopes_.resize(n);
    std::vector<double> delta(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    slopes_[0] = delta[0];
    slopes_[n - 1] = delta[n - 2];
    for (size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) {
        slopes_[i] = 0.0;  // local extremum or flat: flat tangent keeps monotonicity
      } else {
        // Harmonic mean of neighbouring secants (Fritsch-Butland form) is
        // automatically inside the Fritsch-Carlson monotonicity region.
        const double w1 = 2.0 * (x_[i + 1] - x_[i]) + (x_[i] - x_[i - 1]);
        const double w2 = (x_[i + 1] - x_[i]) + 2.0 * (x_[i] - x_[i - 1]);
        slopes_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
    // Endpoint tangents: clamp one-sided secants into the monotone region.
    for (size_t i : {size_t{0}, n - 1}) {
      const double d = (i == 0) ? delta[0] : delta[n - 2];
      if (d == 0.0)
        slopes_[i] = 0.0;
      else
        slopes_[i] = std::clamp(slopes_[i], 0.0, 3.0 * d);
    }
  }

  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }

  double operator()(double x) const {
    if (x <= x_.front()) return y_.front();
    if (x >= x_.back()) return y_.back();
    const size_t i = segment(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * y_[i] + h * h10 * slopes_[i] + h01 * y_[i + 1] + h * h11 * slopes_[i + 1];
  }

  // Derivative of the interpolant; nonnegative by construction.
  double derivative(double x) const {
    if (x < x_.front() || x > x_.back()) return 0.0;
    const size_t i = segment(std::min(x, x_.back()));
    const double h = x_[i + 1] - x_[i];
    const double t = std::clamp((x - x_[i]) / h, 0.0, 1.0);
    const double t2 = t * t;
    const double dh00 = (6 * t2 - 6 * t) / h, dh10 = 3 * t2 - 4 * t + 1;
    const double dh01 = (-6 * t2 + 6 * t) / h, dh11 = 3 * t2 - 2 * t;
    const double d = dh00 * y_[i] + dh10 * slopes_[i] + dh01 * y_[i + 1] + dh11 * slopes_[i + 1];
    return std::max(d, 0.0);
  }

  // Solve f(x) = y on [x_min, x_max] by bisection refined with Newton steps.
  // Requires y within the data range; flat stretches return their left edge.
  double inverse(double y) const {
    if (y <= y_.front()) return x_.front();
    if (y >= y_.back()) return x_.back();
    size_t i = static_cast<size_t>(
        std::upper_bound(y_.begin(), y_.end(), y) - y_.begin());
    if (i > 0) --i;
    while (i + 2 < x_.size() && y_[i + 1] <= y) ++i;
    double lo = x_[i], hi = x_[i + 1];
    double x = 0.5 * (lo + hi);
    for (int iter = 0; iter < 80; ++iter) {
      const double fx = (*this)(x);
      if (fx > y)
        hi = x;
      else
        lo = x;
      const double d = derivative(x);
      double next = (d > 0.0) ? x - (fx - y) / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) < 1e-15 * (1.0 + std::abs(x))) return next;
      x = next;
    }
    return x;
  }

  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }

 private:
  size_t segment(double x) const {
    size_t i = static_cast<size_t>(
        std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
    if (i > 0) --i;
    return std::min(i, x_.size() - 2);
  }

  std::vector<double> x_, y_;
  std::vector<double> slopes_;
};

}  // namespace pdmp
