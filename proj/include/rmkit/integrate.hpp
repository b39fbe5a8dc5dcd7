#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmkit/model.hpp"
#include "rmkit/random.hpp"

namespace rmkit {

/// Gaussian increments of a standard Brownian motion on a uniform grid.
///
/// Generated paths are lazy: increment i is a pure function of (seed, i),
/// so a 10^7-step path costs no memory. Paths built from explicit
/// increments (for instance by coarsening) store them.
class BrownianPath {
 public:
  BrownianPath(std::uint64_t seed, double dt, std::size_t n_steps)
      : seed_(seed), dt_(dt), n_steps_(n_steps), sqrt_dt_(std::sqrt(dt)), normal_(seed) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be > 0");
    if (n_steps == 0) throw std::invalid_argument("n_steps must be >= 1");
  }

  static BrownianPath from_increments(double dt, std::vector<double> increments,
                                      std::uint64_t seed = 0) {
    BrownianPath p(seed, dt, increments.size());
    p.stored_ = std::move(increments);
    return p;
  }

  /// All increments zero: the deterministic reduction.
  static BrownianPath zero(double dt, std::size_t n_steps) {
    return from_increments(dt, std::vector<double>(n_steps, 0.0));
  }

  double increment(std::size_t i) const {
    if (stored_) return (*stored_)[i];
    return sqrt_dt_ * normal_.normal(i);
  }

  /// Path on a grid `factor` times coarser, driven by the same Brownian motion.
  BrownianPath coarsen(std::size_t factor) const {
    if (factor == 0 || n_steps_ % factor != 0) {
      throw std::invalid_argument("coarsen: factor must divide the number of steps");
    }
    std::vector<double> out(n_steps_ / factor, 0.0);
    for (std::size_t i = 0; i < n_steps_; ++i) out[i / factor] += increment(i);
    return from_increments(dt_ * static_cast<double>(factor), std::move(out), seed_);
  }

  std::vector<double> materialize() const {
    std::vector<double> out(n_steps_);
    for (std::size_t i = 0; i < n_steps_; ++i) out[i] = increment(i);
    return out;
  }

  std::uint64_t seed() const { return seed_; }
  double dt() const { return dt_; }
  std::size_t size() const { return n_steps_; }
  double horizon() const { return dt_ * static_cast<double>(n_steps_); }

 private:
  std::uint64_t seed_;
  double dt_;
  std::size_t n_steps_;
  double sqrt_dt_;
  CounterNormal normal_;
  std::optional<std::vector<double>> stored_;
};

inline BrownianPath brownian_path(std::uint64_t seed, double dt, std::size_t n_steps) {
  return {seed, dt, n_steps};
}

inline std::size_t steps_for(double horizon, double dt) {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

struct Trajectory {
  std::vector<double> times;
  std::vector<State2> states;
  bool diverged = false;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }
};

struct ScalarTrajectory {
  std::vector<double> times;
  std::vector<double> values;
  bool diverged = false;

  std::size_t size() const { return times.size(); }
};

enum class Scheme { LogSpace, Plain };

inline std::string to_string(Scheme s) { return s == Scheme::LogSpace ? "logspace" : "plain"; }

inline Scheme parse_scheme(const std::string& name) {
  if (name == "logspace" || name == "log") return Scheme::LogSpace;
  if (name == "plain") return Scheme::Plain;
  throw std::invalid_argument("unknown scheme: " + name);
}

inline constexpr double kDivergenceBound = 1e12;

/// Step callback: (grid index, time, state).
using StateObserver = std::function<void(std::size_t, double, const State2&)>;

/// Euler-Maruyama integration of the 2-D system, streaming every grid
/// state (starting with x0) to `observe`. Returns false if the run was
/// truncated by the divergence guard.
///
/// LogSpace steps log x1 by (F1 - eps^2/2) dt + eps dB and log x2 by F2 dt,
/// so zero coordinates stay zero and positive ones stay positive. Plain is
/// the classical scheme with negative excursions clamped to 0.
template <class Observer>
bool simulate_em_observe(const ModelParams& p, const State2& x0, const BrownianPath& path,
                         Scheme scheme, Observer&& observe) {
  if (!x0.valid()) throw std::invalid_argument("simulate_em: invalid initial state");
  const double dt = path.dt();
  const double eps = p.epsilon();
  const double ito = 0.5 * p.epsilon_sq();
  State2 x = x0;
  double y1 = x.x1 > 0.0 ? std::log(x.x1) : 0.0;
  double y2 = x.x2 > 0.0 ? std::log(x.x2) : 0.0;
  const bool alive1 = x.x1 > 0.0;
  const bool alive2 = x.x2 > 0.0;
  observe(std::size_t{0}, 0.0, x);
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double db = path.increment(i);
    const double f1 = prey_growth_rate(p, x.x1, x.x2);
    const double f2 = predator_growth_rate(p, x.x1);
    State2 next;
    if (scheme == Scheme::LogSpace) {
      if (alive1) {
        y1 += (f1 - ito) * dt + eps * db;
        next.x1 = std::exp(y1);
      }
      if (alive2) {
        y2 += f2 * dt;
        next.x2 = std::exp(y2);
      }
    } else {
      next.x1 = std::max(0.0, x.x1 + x.x1 * f1 * dt + eps * x.x1 * db);
      next.x2 = std::max(0.0, x.x2 + x.x2 * f2 * dt);
    }
    if (!(next.x1 <= kDivergenceBound && next.x2 <= kDivergenceBound)) return false;
    x = next;
    observe(i + 1, static_cast<double>(i + 1) * dt, x);
  }
  return true;
}

struct SimOptions {
  Scheme scheme = Scheme::LogSpace;
  std::size_t record_stride = 1;  // keep every k-th grid point (the final one always)
};

inline Trajectory simulate_em(const ModelParams& p, const State2& x0, const BrownianPath& path,
                              SimOptions opts = {}) {
  if (opts.record_stride == 0) throw std::invalid_argument("record_stride must be >= 1");
  Trajectory tr;
  const std::size_t n = path.size();
  tr.times.reserve(n / opts.record_stride + 2);
  tr.states.reserve(n / opts.record_stride + 2);
  const bool ok = simulate_em_observe(p, x0, path, opts.scheme,
                                      [&](std::size_t i, double t, const State2& s) {
                                        if (i % opts.record_stride == 0 || i == n) {
                                          tr.times.push_back(t);
                                          tr.states.push_back(s);
                                        }
                                      });
  tr.diverged = !ok;
  return tr;
}

/// Euler-Maruyama for the 1-D logistic SDE dz = z[(1 - z/kappa) dt + eps dB].
inline ScalarTrajectory simulate_logistic_em(const ModelParams& p, double z0,
                                             const BrownianPath& path,
                                             Scheme scheme = Scheme::LogSpace) {
  if (!(z0 >= 0.0) || !std::isfinite(z0)) throw std::invalid_argument("z0 must be >= 0");
  ScalarTrajectory tr;
  tr.times.reserve(path.size() + 1);
  tr.values.reserve(path.size() + 1);
  const bool ok = simulate_em_observe(p, State2{z0, 0.0}, path, scheme,
                                      [&](std::size_t, double t, const State2& s) {
                                        tr.times.push_back(t);
                                        tr.values.push_back(s.x1);
                                      });
  tr.diverged = !ok;
  return tr;
}

/// Closed-form solution of the logistic SDE on the path's grid:
///   z_t = z0 g_t / (1 + (z0/kappa) int_0^t g_s ds),  g_t = exp((1 - eps^2/2) t + eps B_t),
/// with the time integral by the trapezoidal rule. Evaluated through the
/// ratio J_t = int_0^t g_s ds / g_t, which stays finite on long horizons.
inline ScalarTrajectory exact_logistic(const ModelParams& p, double z0, const BrownianPath& path) {
  if (!(z0 >= 0.0) || !std::isfinite(z0)) throw std::invalid_argument("z0 must be >= 0");
  const double dt = path.dt();
  const double mu = 1.0 - 0.5 * p.epsilon_sq();
  ScalarTrajectory tr;
  tr.times.reserve(path.size() + 1);
  tr.values.reserve(path.size() + 1);
  tr.times.push_back(0.0);
  tr.values.push_back(z0);
  double log_g = 0.0;
  double ratio = 0.0;  // J_t
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double step = mu * dt + p.epsilon() * path.increment(i);
    const double back = std::exp(-step);  // g_t / g_{t+dt}
    ratio = ratio * back + 0.5 * dt * (back + 1.0);
    log_g += step;
    const double z = z0 == 0.0 ? 0.0 : z0 / (std::exp(-log_g) + (z0 / p.kappa()) * ratio);
    tr.times.push_back(static_cast<double>(i + 1) * dt);
    tr.values.push_back(z);
  }
  return tr;
}

struct CouplingResult {
  Trajectory system;
  ScalarTrajectory logistic;
  std::size_t violations = 0;
};

/// Runs the 2-D system and the logistic SDE started at z0 = x0.x1 on the
/// same noise, and counts grid points where x1 > z + tol_rel * (1 + z).
inline CouplingResult coupled_compare(const ModelParams& p, const State2& x0,
                                      const BrownianPath& path, double tol_rel = 1e-9,
                                      Scheme scheme = Scheme::LogSpace) {
  if (!(x0.x1 > 0.0)) throw std::invalid_argument("coupled_compare: x0.x1 must be > 0");
  CouplingResult out;
  out.system = simulate_em(p, x0, path, {scheme, 1});
  out.logistic = simulate_logistic_em(p, x0.x1, path, scheme);
  const std::size_t n = std::min(out.system.size(), out.logistic.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double z = out.logistic.values[i];
    if (out.system.states[i].x1 > z + tol_rel * (1.0 + z)) ++out.violations;
  }
  return out;
}

inline ScalarTrajectory prey_of(const Trajectory& tr) {
  ScalarTrajectory out;
  out.times = tr.times;
  out.values.reserve(tr.size());
  for (const auto& s : tr.states) out.values.push_back(s.x1);
  out.diverged = tr.diverged;
  return out;
}

/// Predator density reconstructed from a prey path:
///   x2(t) = x2(0) exp(-alpha t + int_0^t x1/(1+x1) ds), trapezoidal in time.
inline ScalarTrajectory predator_from_prey(const ModelParams& p, double x2_0,
                                           const ScalarTrajectory& prey) {
  if (!(x2_0 >= 0.0)) throw std::invalid_argument("x2_0 must be >= 0");
  if (prey.size() == 0) throw std::invalid_argument("empty prey trajectory");
  ScalarTrajectory out;
  out.times = prey.times;
  out.values.reserve(prey.size());
  out.values.push_back(x2_0);
  double integral = 0.0;
  auto h = [](double u) { return u / (1.0 + u); };
  for (std::size_t i = 1; i < prey.size(); ++i) {
    const double dt = prey.times[i] - prey.times[i - 1];
    integral += 0.5 * dt * (h(prey.values[i - 1]) + h(prey.values[i]));
    out.values.push_back(x2_0 == 0.0 ? 0.0
                                     : x2_0 * std::exp(-p.alpha() * prey.times[i] + integral));
  }
  return out;
}

}  // namespace rmkit
