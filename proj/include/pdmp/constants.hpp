#pragma once

// Central record of every numerical tolerance the library uses. Callers that
// need different accuracy pass a modified copy down; nothing else in the
// library hard-codes a threshold.

namespace pdmp {

struct Tolerances {
  // Relative accuracy target of the dense algebraic kernels (expm, flow,
  // linear solves). Also the agreement expected from closed-form fast paths.
  double algebraic_rel = 1e-10;

  // Adaptive quadrature stops when the error estimate drops below
  // abs + rel * |value|.
  double quadrature_rel = 1e-10;
  double quadrature_abs = 1e-10;
  int quadrature_max_panels = 4000;

  // Expectations over an unbounded support integrate up to quantile(1 - tail_mass).
  double tail_mass = 1e-12;

  // Stationarity requires the per-cycle contraction radius < 1 - stability_margin.
  double stability_margin = 1e-9;

  // Below this times the state scale, a mean entry counts as zero and its CV^2
  // is reported as undefined.
  double mean_floor_rel = 1e-12;

  // Closed-form case-study expressions switch to their series-in-gamma branch
  // when gamma * <T> falls below this (the direct forms lose all digits to
  // cancellation near gamma = 0).
  double small_gamma_switch = 1e-4;
};

inline const Tolerances& default_tolerances() {
  static const Tolerances t{};
  return t;
}

}  // namespace pdmp
