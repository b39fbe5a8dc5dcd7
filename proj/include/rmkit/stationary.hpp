#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rmkit/model.hpp"
#include "rmkit/quadrature.hpp"
#include "rmkit/special.hpp"

namespace rmkit {

/// Point beyond which the Gamma law carries less than `tail_mass`.
inline double gamma_tail_cutoff(const GammaStationary& g, double tail_mass = 1e-12) {
  double x = std::max(g.mean() + std::sqrt(g.variance()), g.scale());
  while (gamma_q(g.shape(), x / g.scale()) > tail_mass) x *= 1.25;
  return x;
}

/// Integral of f against the stationary Gamma law, truncated where the
/// remaining mass is below `tail_mass`.
///
/// For k < 1 the head [0, theta] is integrated in the variable u = x^k,
/// which absorbs the x^(k-1) singularity into a bounded integrand. The rest
/// of the range is split at mean + j*sd so sharply peaked laws (small eps)
/// are resolved from the first pass.
template <class F>
QuadratureResult expect_under_gamma(const GammaStationary& g, F&& f, double abs_tol = 1e-11,
                                    double tail_mass = 1e-12) {
  const double k = g.shape();
  const double th = g.scale();
  const double cut = gamma_tail_cutoff(g, tail_mass);
  QuadratureResult head{};
  double body_start = 0.0;
  if (k < 1.0) {
    body_start = std::min(th, 0.5 * cut);
    const double log_c = -std::lgamma(k) - k * std::log(th) - std::log(k);
    auto in_u = [&](double u) {
      const double x = std::pow(u, 1.0 / k);
      return f(x) * std::exp(log_c - x / th);
    };
    head = integrate_adaptive(in_u, 0.0, std::pow(body_start, k), 0.5 * abs_tol);
  }
  std::vector<double> pts{body_start};
  const double mean = g.mean();
  const double sd = std::sqrt(g.variance());
  for (int j = -40; j <= 40; ++j) {
    const double x = mean + j * sd;
    if (x > pts.back() && x < cut) pts.push_back(x);
  }
  pts.push_back(cut);
  auto in_x = [&](double x) { return f(x) * std::exp(g.log_density(x)); };
  auto body = integrate_adaptive(in_x, std::span<const double>(pts), 0.5 * abs_tol);
  return {head.value + body.value, head.abs_error + body.abs_error,
          head.intervals + body.intervals, (k >= 1.0 || head.converged) && body.converged};
}

}  // namespace rmkit
