#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmkit/integrate.hpp"
#include "rmkit/model.hpp"
#include "rmkit/special.hpp"

namespace rmkit {

/// One histogram axis: a zero-boundary bin [0, lo), `count` log-spaced bins
/// on [lo, hi) and an overflow bin [hi, inf).
struct LogAxis {
  double lo = 1e-6;
  double hi = 1e2;
  int count = 256;

  std::size_t bins() const { return static_cast<std::size_t>(count) + 2; }

  std::size_t index(double x) const {
    if (x < lo) return 0;
    if (x >= hi) return bins() - 1;
    const auto i = static_cast<std::size_t>(count * std::log(x / lo) / std::log(hi / lo));
    return 1 + std::min<std::size_t>(i, static_cast<std::size_t>(count) - 1);
  }

  double lower(std::size_t i) const {
    if (i == 0) return 0.0;
    if (i == bins() - 1) return hi;
    return lo * std::pow(hi / lo, static_cast<double>(i - 1) / count);
  }

  double upper(std::size_t i) const {
    if (i == 0) return lo;
    if (i == bins() - 1) return std::numeric_limits<double>::infinity();
    return lo * std::pow(hi / lo, static_cast<double>(i) / count);
  }

  friend bool operator==(const LogAxis&, const LogAxis&) = default;
};

/// Time spent per 2-D bin: a discretized occupation measure. Histograms
/// over the same axes form a commutative monoid under `merge`.
class OccupationHistogram {
 public:
  explicit OccupationHistogram(LogAxis x1_axis = {}, LogAxis x2_axis = {})
      : ax1_(x1_axis), ax2_(x2_axis), weights_(ax1_.bins() * ax2_.bins(), 0.0) {}

  void add(const State2& s, double weight) {
    const std::size_t i = ax1_.index(s.x1);
    const std::size_t j = ax2_.index(s.x2);
    weights_[i * ax2_.bins() + j] += weight;
    total_ += weight;
    if (i == ax1_.bins() - 1 || j == ax2_.bins() - 1) {
      overflow_ += weight;
      ++overflow_visits_;
    }
  }

  void merge(const OccupationHistogram& other) {
    if (!(ax1_ == other.ax1_ && ax2_ == other.ax2_)) {
      throw std::invalid_argument("merge: histogram axes differ");
    }
    for (std::size_t k = 0; k < weights_.size(); ++k) weights_[k] += other.weights_[k];
    total_ += other.total_;
    overflow_ += other.overflow_;
    overflow_visits_ += other.overflow_visits_;
  }

  const LogAxis& x1_axis() const { return ax1_; }
  const LogAxis& x2_axis() const { return ax2_; }
  double weight(std::size_t i, std::size_t j) const { return weights_[i * ax2_.bins() + j]; }
  const std::vector<double>& weights() const { return weights_; }
  double total_time() const { return total_; }
  double overflow_time() const { return overflow_; }
  std::size_t overflow_visits() const { return overflow_visits_; }
  bool empty() const { return !(total_ > 0.0); }

  /// Prey marginal (time per x1 bin).
  std::vector<double> x1_marginal() const {
    std::vector<double> out(ax1_.bins(), 0.0);
    for (std::size_t i = 0; i < ax1_.bins(); ++i) {
      for (std::size_t j = 0; j < ax2_.bins(); ++j) out[i] += weight(i, j);
    }
    return out;
  }

 private:
  LogAxis ax1_;
  LogAxis ax2_;
  std::vector<double> weights_;
  double total_ = 0.0;
  double overflow_ = 0.0;
  std::size_t overflow_visits_ = 0;
};

/// Left-endpoint accumulation: state i is credited with t[i+1] - t[i].
inline void accumulate(OccupationHistogram& hist, const Trajectory& tr, double burn_in = 0.0) {
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    if (tr.times[i] < burn_in) continue;
    hist.add(tr.states[i], tr.times[i + 1] - tr.times[i]);
  }
}

/// Simulates and accumulates in one pass without storing the trajectory.
/// Returns false if the run hit the divergence guard.
inline bool accumulate_run(OccupationHistogram& hist, const ModelParams& p, const State2& x0,
                           const BrownianPath& path, Scheme scheme = Scheme::LogSpace,
                           double burn_in = 0.0) {
  const double dt = path.dt();
  State2 prev = x0;
  return simulate_em_observe(p, x0, path, scheme, [&](std::size_t i, double t, const State2& s) {
    if (i > 0 && t - dt >= burn_in) hist.add(prev, dt);
    prev = s;
  });
}

struct Rect {
  double x1_lo, x1_hi, x2_lo, x2_hi;
};

/// Normalized mass of the union of rectangles. Bins that intersect a
/// rectangle count in full (outward rounding); each bin counts once.
inline double fraction_in(const OccupationHistogram& hist, const std::vector<Rect>& region) {
  if (hist.empty()) throw std::invalid_argument("fraction_in: empty histogram");
  const auto& a1 = hist.x1_axis();
  const auto& a2 = hist.x2_axis();
  double mass = 0.0;
  for (std::size_t i = 0; i < a1.bins(); ++i) {
    for (std::size_t j = 0; j < a2.bins(); ++j) {
      const double w = hist.weight(i, j);
      if (w == 0.0) continue;
      const bool hit = std::any_of(region.begin(), region.end(), [&](const Rect& r) {
        return a1.lower(i) <= r.x1_hi && a1.upper(i) > r.x1_lo && a2.lower(j) <= r.x2_hi &&
               a2.upper(j) > r.x2_lo;
      });
      if (hit) mass += w;
    }
  }
  return mass / hist.total_time();
}

inline Rect everything() {
  const double inf = std::numeric_limits<double>::infinity();
  return {0.0, inf, 0.0, inf};
}

/// sup over x1 bin edges of |empirical prey CDF - Gamma(k, theta) CDF|.
inline double ks_to_gamma_marginal(const OccupationHistogram& hist, const GammaStationary& g) {
  if (hist.empty()) throw std::invalid_argument("ks_to_gamma_marginal: empty histogram");
  const auto marginal = hist.x1_marginal();
  const auto& ax = hist.x1_axis();
  double cum = 0.0;
  double ks = 0.0;
  for (std::size_t i = 0; i + 1 < ax.bins(); ++i) {
    cum += marginal[i];
    const double emp = cum / hist.total_time();
    ks = std::max(ks, std::fabs(emp - gamma_cdf(g.shape(), g.scale(), ax.upper(i))));
  }
  return std::min(ks, 1.0);
}

/// Total variation between the prey-marginal histogram and the Gamma law
/// binned on the same edges. Diagnostic only.
inline double grid_tv_to_gamma_marginal(const OccupationHistogram& hist,
                                        const GammaStationary& g) {
  if (hist.empty()) throw std::invalid_argument("grid_tv_to_gamma_marginal: empty histogram");
  const auto marginal = hist.x1_marginal();
  const auto& ax = hist.x1_axis();
  double tv = 0.0;
  double prev_cdf = 0.0;
  for (std::size_t i = 0; i < ax.bins(); ++i) {
    const double up = ax.upper(i);
    const double cdf = std::isinf(up) ? 1.0 : gamma_cdf(g.shape(), g.scale(), up);
    tv += std::fabs(marginal[i] / hist.total_time() - (cdf - prev_cdf));
    prev_cdf = cdf;
  }
  return 0.5 * tv;
}

/// Left-endpoint time average (1/T) sum f(x_i) dt_i.
template <class F>
double time_average(const Trajectory& tr, F&& f, double burn_in = 0.0) {
  if (tr.size() < 2) throw std::invalid_argument("time_average: trajectory needs two points");
  double acc = 0.0;
  double span = 0.0;
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    if (tr.times[i] < burn_in) continue;
    const double v = f(tr.states[i]);
    if (!std::isfinite(v)) {
      throw std::domain_error("time_average: non-finite value at t=" +
                              std::to_string(tr.times[i]));
    }
    const double dt = tr.times[i + 1] - tr.times[i];
    acc += v * dt;
    span += dt;
  }
  if (!(span > 0.0)) throw std::invalid_argument("time_average: burn-in covers the trajectory");
  return acc / span;
}

/// Streaming counterpart of `time_average` for runs too long to store.
template <class F>
double time_average_run(const ModelParams& p, const State2& x0, const BrownianPath& path, F&& f,
                        Scheme scheme = Scheme::LogSpace, double burn_in = 0.0) {
  const double dt = path.dt();
  double acc = 0.0;
  double span = 0.0;
  State2 prev = x0;
  const bool ok =
      simulate_em_observe(p, x0, path, scheme, [&](std::size_t i, double t, const State2& s) {
        if (i > 0 && t - dt >= burn_in) {
          const double v = f(prev);
          if (!std::isfinite(v)) {
            throw std::domain_error("time_average: non-finite value at t=" + std::to_string(t - dt));
          }
          acc += v * dt;
          span += dt;
        }
        prev = s;
      });
  if (!ok) throw std::runtime_error("time_average: trajectory diverged");
  if (!(span > 0.0)) throw std::invalid_argument("time_average: burn-in covers the run");
  return acc / span;
}

struct LogRateEstimate {
  double slope = 0.0;
  double std_err = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

/// Least-squares slope of log(coordinate) against t over the second half of
/// each trajectory, averaged over the ensemble. Paths whose coordinate hits
/// numeric zero in the window are excluded and counted.
inline LogRateEstimate log_rate_estimate(const std::vector<Trajectory>& ensemble, int coordinate) {
  if (coordinate != 1 && coordinate != 2) {
    throw std::invalid_argument("log_rate_estimate: coordinate must be 1 or 2");
  }
  if (ensemble.size() < 30) {
    throw std::invalid_argument("log_rate_estimate: need at least 30 trajectories");
  }
  auto pick = [coordinate](const State2& s) { return coordinate == 1 ? s.x1 : s.x2; };
  LogRateEstimate out;
  std::vector<double> slopes;
  for (const auto& tr : ensemble) {
    if (tr.size() < 4 || !(pick(tr.states.front()) > 0.0)) {
      throw std::invalid_argument("log_rate_estimate: coordinate must start positive");
    }
    const double half = 0.5 * tr.times.back();
    double st = 0, sy = 0, stt = 0, sty = 0;
    std::size_t m = 0;
    bool zero = false;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      if (tr.times[i] < half) continue;
      const double v = pick(tr.states[i]);
      if (!(v > 0.0)) {
        zero = true;
        break;
      }
      const double t = tr.times[i];
      const double y = std::log(v);
      st += t;
      sy += y;
      stt += t * t;
      sty += t * y;
      ++m;
    }
    if (zero || m < 2) {
      ++out.excluded;
      continue;
    }
    const double dm = static_cast<double>(m);
    slopes.push_back((dm * sty - st * sy) / (dm * stt - st * st));
  }
  out.used = slopes.size();
  if (slopes.empty()) return out;
  double mean = 0.0;
  for (double s : slopes) mean += s;
  mean /= static_cast<double>(slopes.size());
  double var = 0.0;
  for (double s : slopes) var += (s - mean) * (s - mean);
  if (slopes.size() > 1) var /= static_cast<double>(slopes.size() - 1);
  out.slope = mean;
  out.std_err = std::sqrt(var / static_cast<double>(slopes.size()));
  return out;
}

}  // namespace rmkit
