#pragma once

// Shared assertions for the test suites: relative-error helpers and a
// Kolmogorov-Smirnov distance for checking samplers against reference CDFs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pdmp/linalg.hpp"

namespace testsupport {

inline double rel_err(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

inline double max_rel_err(const pdmp::Matrix& got, const pdmp::Matrix& want) {
  const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-300);
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

inline double max_rel_err(const pdmp::Vector& got, const pdmp::Vector& want) {
  const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-300);
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

struct KsResult {
  double statistic = 0.0;
  double threshold = 0.0;
  bool ok = false;
};

// One-sample KS test at significance ~0.01 (critical constant 1.63/sqrt(n)).
// Seeds are fixed throughout the suite, so this is deterministic.
inline KsResult ks_against_cdf(std::vector<double> samples,
                               const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max(d, std::abs(F - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - F));
  }
  KsResult r;
  r.statistic = d;
  r.threshold = 1.63 / std::sqrt(n);
  r.ok = d < r.threshold;
  return r;
}

}  // namespace testsupport
