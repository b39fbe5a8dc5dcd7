#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

namespace rmkit {

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  int intervals = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gauss_kronrod_15(F&& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * pair;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * pair;
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::fabs(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature over the union of the
/// consecutive intervals given by `breakpoints` (at least two, increasing).
/// The interval with the largest error estimate is bisected until the total
/// estimate drops below max(abs_tol, rel_tol * |value|). Endpoints are never
/// evaluated, so integrable endpoint singularities are tolerated.
template <class F>
QuadratureResult integrate_adaptive(F&& f, std::span<const double> breakpoints, double abs_tol,
                                    double rel_tol = 0.0, int max_intervals = 4000) {
  if (breakpoints.size() < 2) {
    throw std::invalid_argument("integrate_adaptive: need at least two breakpoints");
  }
  std::priority_queue<detail::Segment> heap;
  double total = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i] < breakpoints[i + 1])) {
      throw std::invalid_argument("integrate_adaptive: breakpoints must increase");
    }
    auto seg = detail::gauss_kronrod_15(f, breakpoints[i], breakpoints[i + 1]);
    total += seg.value;
    error += seg.error;
    heap.push(seg);
  }
  QuadratureResult out;
  while (error > std::max(abs_tol, rel_tol * std::fabs(total)) &&
         static_cast<int>(heap.size()) < max_intervals) {
    const auto worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;  // interval exhausted at double resolution
    heap.pop();
    const auto left = detail::gauss_kronrod_15(f, worst.a, mid);
    const auto right = detail::gauss_kronrod_15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Recompute sums to shed accumulated cancellation error.
  out.intervals = static_cast<int>(heap.size());
  out.value = 0.0;
  out.abs_error = 0.0;
  while (!heap.empty()) {
    out.value += heap.top().value;
    out.abs_error += heap.top().error;
    heap.pop();
  }
  out.converged = out.abs_error <= std::max(abs_tol, rel_tol * std::fabs(out.value));
  return out;
}

template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double abs_tol,
                                    double rel_tol = 0.0, int max_intervals = 4000) {
  const std::array<double, 2> pts{a, b};
  return integrate_adaptive(std::forward<F>(f), std::span<const double>(pts), abs_tol, rel_tol,
                            max_intervals);
}

}  // namespace rmkit
