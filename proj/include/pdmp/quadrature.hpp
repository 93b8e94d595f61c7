#pragma once

// Adaptive Gauss-Kronrod 15(7) integration, templated over the value type so
// matrix-valued integrands (expectations of matrix exponentials) integrate in
// one pass with one error model. Subdivision is error-greedy; the returned
// error is the sum of per-panel Kronrod-Gauss discrepancies.

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <type_traits>
#include <vector>

#include "pdmp/constants.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/linalg.hpp"

namespace pdmp {

namespace detail {

inline double value_norm(double v) { return std::abs(v); }
inline double value_norm(const Matrix& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }
inline double value_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

inline bool value_finite(double v) { return std::isfinite(v); }
inline bool value_finite(const Matrix& v) { return v.allFinite(); }
inline bool value_finite(const Vector& v) { return v.allFinite(); }

// Maps Eigen expression templates to their plain storage type (Matrix or
// Vector) so integrands may return lazy expressions; scalars pass through.
template <class T, class = void>
struct plain_value { using type = std::decay_t<T>; };
template <class T>
struct plain_value<T, std::void_t<typename std::decay_t<T>::PlainObject>> {
  using type = typename std::decay_t<T>::PlainObject;
};
template <class T>
using plain_value_t = typename plain_value<T>::type;

// QUADPACK dqk15 abscissae/weights (positive half; node 7 is the midpoint).
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kGk15Weights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// 7-point Gauss weights, applied at nodes 1, 3, 5, 7 of the table above.
inline constexpr double kG7Weights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
struct PanelResult {
  using Value = plain_value_t<decltype(std::declval<F&>()(0.0))>;
  Value kronrod;
  double error;
};

template <class F>
PanelResult<F> gk15_panel(F& f, double a, double b) {
  using Value = typename PanelResult<F>::Value;
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  Value fc = f(mid);
  Value kron = kGk15Weights[7] * fc;
  Value gauss = kG7Weights[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kGk15Nodes[j];
    Value lo = f(mid - dx);
    Value hi = f(mid + dx);
    Value sum = lo + hi;
    kron += kGk15Weights[j] * sum;
    if (j % 2 == 1) gauss += kG7Weights[j / 2] * sum;
  }
  kron *= half;
  gauss *= half;
  if (!value_finite(kron))
    throw NumericalError("quadrature: integrand produced non-finite values in [" +
                         std::to_string(a) + ", " + std::to_string(b) + "]");
  return PanelResult<F>{kron, value_norm(Value(kron - gauss))};
}

}  // namespace detail

template <class Value>
struct QuadratureResult {
  Value value;
  double error;    // accumulated error estimate
  int panels;
};

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_panels = 4000;

  static QuadratureOptions from(const Tolerances& tol) {
    return QuadratureOptions{tol.quadrature_abs, tol.quadrature_rel, tol.quadrature_max_panels};
  }
};

// Integrate f over [a, b]. `breakpoints` seeds the initial subdivision (used to
// align panels with interpolation knots); values outside (a, b) are ignored.
template <class F>
auto integrate_adaptive(F&& f, double a, double b, const QuadratureOptions& opts = {},
                        const std::vector<double>& breakpoints = {})
    -> QuadratureResult<detail::plain_value_t<decltype(f(0.0))>> {
  using Value = detail::plain_value_t<decltype(f(0.0))>;
  if (!(b >= a) || !std::isfinite(a) || !std::isfinite(b))
    throw DomainError("integrate_adaptive: invalid interval");

  struct Panel {
    double a, b, error;
    Value value;
    bool operator<(const Panel& o) const { return error < o.error; }
  };

  std::vector<double> edges;
  edges.push_back(a);
  for (double x : breakpoints)
    if (x > a && x < b) edges.push_back(x);
  edges.push_back(b);
  std::sort(edges.begin(), edges.end());

  std::priority_queue<Panel> panels;
  Value total{};
  bool first = true;
  double total_err = 0.0;
  int n_panels = 0;
  auto push_panel = [&](double lo, double hi) {
    auto r = detail::gk15_panel(f, lo, hi);
    if (first) {
      total = r.kronrod;
      first = false;
    } else {
      total += r.kronrod;
    }
    total_err += r.error;
    panels.push(Panel{lo, hi, r.error, r.kronrod});
    ++n_panels;
  };
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    if (edges[i + 1] > edges[i]) push_panel(edges[i], edges[i + 1]);
  if (first) return {Value{}, 0.0, 0};  // zero-length interval

  auto tolerance = [&] { return opts.abs_tol + opts.rel_tol * detail::value_norm(total); };
  while (total_err > tolerance() && n_panels < opts.max_panels) {
    Panel worst = panels.top();
    panels.pop();
    total -= worst.value;
    total_err -= worst.error;
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // Interval at floating-point resolution; keep its estimate as-is.
      total += worst.value;
      total_err += worst.error;
      break;
    }
    --n_panels;  // replaced by two children
    push_panel(worst.a, mid);
    push_panel(mid, worst.b);
  }
  if (total_err > tolerance())
    throw QuadratureError("integrate_adaptive: error " + std::to_string(total_err) +
                              " above tolerance after " + std::to_string(n_panels) + " panels",
                          total_err);
  return {total, total_err, n_panels};
}

}  // namespace pdmp
