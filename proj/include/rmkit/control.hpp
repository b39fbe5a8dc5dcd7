#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmkit/integrate.hpp"
#include "rmkit/model.hpp"

namespace rmkit {

/// Controlled field y' = (y1 (F1(y) + v), y2 F2(y)): the noise channel of
/// the prey replaced by a deterministic control v.
inline Vec2 control_field(const ModelParams& p, double v, const State2& s) {
  return {s.x1 * (prey_growth_rate(p, s.x1, s.x2) + v), s.x2 * predator_growth_rate(p, s.x1)};
}

/// The curve P_v = {F1 + v = 0}: x2 = (1 + v - x1/kappa)(1 + x1).
inline double parabola_x2(const ModelParams& p, double v, double x1) {
  return (1.0 + v - x1 / p.kappa()) * (1.0 + x1);
}

inline State2 parabola_vertex(const ModelParams& p, double v) {
  const double k = p.kappa();
  State2 s;
  s.x1 = 0.5 * (k * v - 1.0 + k);
  s.x2 = (k * (v + 1.0) + 1.0) * (k * (v + 1.0) + 1.0) / (4.0 * k);
  return s;
}

namespace detail {

inline bool vstar_ok(const ModelParams& p, const State2& z, double v, double margin) {
  const double line = predator_nullcline(p);
  return parabola_vertex(p, v).x1 > (1.0 + margin) * line &&
         parabola_x2(p, v, z.x1) > (1.0 + margin) * z.x2;
}

}  // namespace detail

/// Smallest v (to 1e-9 relative) with z strictly below P_v and the vertex
/// strictly right of the predator nullcline, both with a 10% margin.
/// Both conditions are monotone in v: bracket by doubling, then bisect.
inline double choose_vstar(const ModelParams& p, const State2& z, double margin = 0.1) {
  if (!z.interior()) throw std::invalid_argument("choose_vstar: z must be strictly positive");
  if (!p.alpha_admissible()) throw std::invalid_argument("choose_vstar: needs alpha < 1");
  double lo = 0.0;
  double hi = 1.0;
  while (!detail::vstar_ok(p, z, hi, margin)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw std::runtime_error("choose_vstar: no admissible v found");
  }
  if (lo == 0.0 && detail::vstar_ok(p, z, 1e-9, margin)) return 1e-9;
  while (hi - lo > 1e-9 * hi) {
    const double mid = 0.5 * (lo + hi);
    (detail::vstar_ok(p, z, mid, margin) ? hi : lo) = mid;
  }
  return hi;
}

struct ReachOptions {
  double r0 = 0.15;
  double r_z = 0.15;
  double R = 10.0;
  double ode_dt = 1e-3;
  std::optional<double> vstar;  // auto-chosen when absent
  double max_time = 500.0;      // per phase
  double R_cap = 1e6;
  int max_attempts = 40;
};

struct PhaseRecord {
  double v = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  bool predicate_met = false;
  std::string predicate;
};

struct ReachResult {
  Trajectory trajectory;
  std::vector<int> phase_of;  // phase index (1..3) of each trajectory point; 0 for the start
  bool success = false;
  int failed_phase = 0;  // 0 when successful
  std::string diagnostic;
  std::array<PhaseRecord, 3> phases{};
  double vstar = 0.0;
  double R = 0.0;
  double r0 = 0.0;
  double r_z = 0.0;
  int attempts = 0;
};

namespace detail {

inline State2 rk4_step(const ModelParams& p, double v, const State2& s, double h) {
  auto f = [&](double a, double b) {
    State2 t;
    t.x1 = a;
    t.x2 = b;
    return control_field(p, v, t);
  };
  const Vec2 k1 = f(s.x1, s.x2);
  const Vec2 k2 = f(s.x1 + 0.5 * h * k1.a, s.x2 + 0.5 * h * k1.b);
  const Vec2 k3 = f(s.x1 + 0.5 * h * k2.a, s.x2 + 0.5 * h * k2.b);
  const Vec2 k4 = f(s.x1 + h * k3.a, s.x2 + h * k3.b);
  State2 out;
  out.x1 = s.x1 + h / 6.0 * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
  out.x2 = s.x2 + h / 6.0 * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b);
  return out;
}

inline double dist(const State2& a, const State2& b) {
  return std::hypot(a.x1 - b.x1, a.x2 - b.x2);
}

struct Leg {
  std::vector<double> times;
  std::vector<State2> states;
  bool met = false;
};

// Integrates with constant control from (t0, s0) until `stop(prev, next)`
// returns a fraction tau in (0, 1] of the last step; the last step is then
// redone with length tau*h so the leg ends on the predicate.
template <class Stop>
Leg run_leg(const ModelParams& p, double v, double t0, const State2& s0, double h,
            double max_time, Stop&& stop) {
  Leg leg;
  State2 s = s0;
  double t = t0;
  const auto n_max = static_cast<std::size_t>(std::ceil(max_time / h));
  for (std::size_t i = 0; i < n_max; ++i) {
    State2 next = rk4_step(p, v, s, h);
    if (!(next.x1 > 0.0 && next.x2 > 0.0) || !std::isfinite(next.x1) ||
        !std::isfinite(next.x2)) {
      return leg;
    }
    if (const std::optional<double> tau = stop(s, next)) {
      const double hh = std::clamp(*tau, 0.0, 1.0) * h;
      if (hh > 0.0) {
        next = rk4_step(p, v, s, hh);
        leg.times.push_back(t + hh);
        leg.states.push_back(next);
      }
      leg.met = true;
      return leg;
    }
    s = next;
    t += h;
    leg.times.push_back(t);
    leg.states.push_back(s);
  }
  return leg;
}

// Fraction along [a, b] where the affine interpolant of g reaches 0.
inline double crossing_fraction(double ga, double gb) {
  if (ga == gb) return 1.0;
  return ga / (ga - gb);
}

}  // namespace detail

/// Three-phase piecewise-constant control steering x into B_{r_z}(z):
///   1. v = -1 until the state enters B_{r0}(0);
///   2. v = v* until x2 crosses z2 after the trajectory has crossed P_{v*};
///   3. v = -R until the state enters B_{r_z}(z).
/// On an overshoot in phase 2 (P crossed above z2) r0 is halved; when the
/// z2 crossing lands left of z1, v* is doubled; when phase 3 leaves the
/// band |x2 - z2| <= r_z/2 or misses the ball, R is doubled up to R_cap.
inline ReachResult reach(const ModelParams& p, const State2& x, const State2& z,
                         ReachOptions opt = {}) {
  if (!x.interior() || !z.interior()) {
    throw std::invalid_argument("reach: x and z must be strictly positive");
  }
  if (!(opt.r0 > 0.0) || !(opt.r_z > 0.0) || !(opt.R > 0.0) || !(opt.ode_dt > 0.0)) {
    throw std::invalid_argument("reach: radii, R and ode_dt must be > 0");
  }
  if (!p.alpha_admissible()) throw std::invalid_argument("reach: needs alpha < 1");

  ReachResult res;
  res.r_z = opt.r_z;
  res.r0 = opt.r0;
  res.R = opt.R;
  res.vstar = opt.vstar ? *opt.vstar : choose_vstar(p, z);
  res.phases[0] = {-1.0, 0.0, 0.0, false, "enter B(0, r0)"};
  res.phases[1] = {res.vstar, 0.0, 0.0, false, "cross x2 = z2 after crossing P_v*"};
  res.phases[2] = {-res.R, 0.0, 0.0, false, "enter B(z, r_z)"};
  res.trajectory.times = {0.0};
  res.trajectory.states = {x};
  res.phase_of = {0};

  if (detail::dist(x, z) < opt.r_z) {
    for (auto& ph : res.phases) ph.predicate_met = true;
    res.success = true;
    return res;
  }

  const double h = opt.ode_dt;
  const double line = predator_nullcline(p);
  double r0 = opt.r0;
  double vstar = res.vstar;
  double R = opt.R;
  Trajectory last = res.trajectory;
  std::vector<int> last_phase_of = res.phase_of;

  for (int attempt = 1; attempt <= opt.max_attempts; ++attempt) {
    res.attempts = attempt;
    res.r0 = r0;
    res.vstar = vstar;
    res.R = R;
    Trajectory tr;
    tr.times = {0.0};
    tr.states = {x};
    std::vector<int> phase_of = {0};
    auto append = [&](const detail::Leg& leg, int phase) {
      tr.times.insert(tr.times.end(), leg.times.begin(), leg.times.end());
      tr.states.insert(tr.states.end(), leg.states.begin(), leg.states.end());
      phase_of.insert(phase_of.end(), leg.times.size(), phase);
    };
    auto finish_failure = [&](int phase, std::string why) {
      res.trajectory = tr;
      res.phase_of = phase_of;
      res.failed_phase = phase;
      res.diagnostic = std::move(why);
      res.success = false;
    };

    // Phase 1.
    const State2 origin;
    res.phases[0] = {-1.0, 0.0, 0.0, false, "enter B(0, r0)"};
    if (detail::dist(x, origin) < r0) {
      res.phases[0].predicate_met = true;
    } else {
      const auto leg = detail::run_leg(
          p, -1.0, 0.0, x, h, opt.max_time,
          [&](const State2& a, const State2& b) -> std::optional<double> {
            const double ga = detail::dist(a, origin) - r0;
            const double gb = detail::dist(b, origin) - r0;
            if (gb < 0.0) return detail::crossing_fraction(ga, gb);
            return std::nullopt;
          });
      append(leg, 1);
      res.phases[0].t_end = tr.times.back();
      if (!leg.met) {
        finish_failure(1, "phase 1 timed out before entering B(0, r0)");
        return res;
      }
      res.phases[0].predicate_met = true;
      // Land strictly inside the ball.
      if (detail::dist(tr.states.back(), origin) >= r0) {
        const State2 nudged = detail::rk4_step(p, -1.0, tr.states.back(), h);
        tr.times.push_back(tr.times.back() + h);
        tr.states.push_back(nudged);
        phase_of.push_back(1);
        res.phases[0].t_end = tr.times.back();
      }
    }

    // Phase 2.
    const double t2 = tr.times.back();
    res.phases[1] = {vstar, t2, t2, false, "cross x2 = z2 after crossing P_v*"};
    bool crossed_p = false;
    double x2_at_p = 0.0;
    const auto leg2 = detail::run_leg(
        p, vstar, t2, tr.states.back(), h, opt.max_time,
        [&](const State2& a, const State2& b) -> std::optional<double> {
          if (!crossed_p) {
            const double ga = parabola_x2(p, vstar, a.x1) - a.x2;
            const double gb = parabola_x2(p, vstar, b.x1) - b.x2;
            if (gb <= 0.0 && ga > 0.0) {
              crossed_p = true;
              x2_at_p = b.x2;
              if (x2_at_p >= z.x2) return 1.0;  // overshoot, handled below
            }
            return std::nullopt;
          }
          const double ga = a.x2 - z.x2;
          const double gb = b.x2 - z.x2;
          if ((ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0)) {
            return detail::crossing_fraction(ga, gb);
          }
          return std::nullopt;
        });
    append(leg2, 2);
    res.phases[1].t_end = tr.times.back();
    if (!leg2.met) {
      if (crossed_p) {
        vstar *= 2.0;
        last = tr;
        last_phase_of = phase_of;
        continue;
      }
      finish_failure(2, "phase 2 timed out");
      return res;
    }
    const State2 c = tr.states.back();
    const double x2_start = tr.states[tr.size() - leg2.times.size() - 1].x2;
    if (x2_at_p >= z.x2 || (!(c.x1 > z.x1) && x2_start >= 0.5 * z.x2)) {
      r0 *= 0.5;  // overshoot: phase 2 started too high
      last = tr;
      last_phase_of = phase_of;
      continue;
    }
    if (!(c.x1 > z.x1) || !(c.x1 > line)) {
      vstar *= 2.0;
      last = tr;
      last_phase_of = phase_of;
      continue;
    }
    res.phases[1].predicate_met = true;

    // Phase 3.
    const double t3 = tr.times.back();
    const double h3 = std::min(h, 0.02 / R);
    res.phases[2] = {-R, t3, t3, false, "enter B(z, r_z)"};
    bool band_ok = true;
    bool passed = false;
    const auto leg3 = detail::run_leg(
        p, -R, t3, c, h3, opt.max_time,
        [&](const State2& a, const State2& b) -> std::optional<double> {
          if (std::fabs(b.x2 - z.x2) > 0.5 * opt.r_z) band_ok = false;
          if (b.x1 < z.x1 - opt.r_z) passed = true;
          const double ga = detail::dist(a, z) - opt.r_z;
          const double gb = detail::dist(b, z) - opt.r_z;
          if (gb < 0.0) return detail::crossing_fraction(ga, gb);
          if (!band_ok || passed) return 1.0;
          return std::nullopt;
        });
    append(leg3, 3);
    res.phases[2].t_end = tr.times.back();
    const bool inside = detail::dist(tr.states.back(), z) < opt.r_z;
    if (!(leg3.met && inside && band_ok)) {
      if (R * 2.0 > opt.R_cap) {
        finish_failure(3, "phase 3: R cap reached without entering B(z, r_z)");
        return res;
      }
      R *= 2.0;
      last = tr;
      last_phase_of = phase_of;
      continue;
    }
    res.phases[2].predicate_met = true;
    res.trajectory = std::move(tr);
    res.phase_of = std::move(phase_of);
    res.success = true;
    res.failed_phase = 0;
    res.diagnostic.clear();
    return res;
  }
  res.trajectory = std::move(last);
  res.phase_of = std::move(last_phase_of);
  res.failed_phase = 2;
  res.success = false;
  res.diagnostic = "attempt budget exhausted";
  return res;
}

inline ReachResult reach(const ModelParams& p, const State2& x, const State2& z, double r0,
                         double r_z, double R, double ode_dt) {
  ReachOptions opt;
  opt.r0 = r0;
  opt.r_z = r_z;
  opt.R = R;
  opt.ode_dt = ode_dt;
  return reach(p, x, z, opt);
}

struct InvariantReport {
  std::size_t phase1_monotone = 0;  // violation counts
  std::size_t phase2_geometry = 0;
  std::size_t parabola_sign = 0;
  std::size_t positivity = 0;

  bool ok() const {
    return phase1_monotone == 0 && phase2_geometry == 0 && parabola_sign == 0 && positivity == 0;
  }
};

/// Checks the four sign invariants pointwise on a returned trajectory:
/// x1 strictly decreasing in phase 1; in phase 2, x2 nonincreasing left of
/// the nullcline and nondecreasing right of it; the sign of the controlled
/// x1-velocity matches the side of P_v; all coordinates strictly positive.
inline InvariantReport check_reach_invariants(const ModelParams& p, const ReachResult& r) {
  InvariantReport rep;
  const auto& tr = r.trajectory;
  const double line = predator_nullcline(p);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const State2& s = tr.states[i];
    if (!(s.x1 > 0.0 && s.x2 > 0.0)) ++rep.positivity;
    const int ph = r.phase_of[i];
    if (ph >= 1) {
      const double v = r.phases[static_cast<std::size_t>(ph - 1)].v;
      const double gap = parabola_x2(p, v, s.x1) - s.x2;
      const double vel = control_field(p, v, s).a;
      if (std::fabs(gap) > 1e-9 * (1.0 + std::fabs(s.x2)) &&
          ((gap > 0.0) != (vel > 0.0))) {
        ++rep.parabola_sign;
      }
    }
    if (i == 0) continue;
    const State2& a = tr.states[i - 1];
    if (ph == 1 && !(s.x1 < a.x1)) ++rep.phase1_monotone;
    if (ph == 2 && r.phase_of[i - 1] == 2) {
      const double tol = 1e-12 * (1.0 + a.x2);
      if (a.x1 < line && s.x1 < line && s.x2 > a.x2 + tol) ++rep.phase2_geometry;
      if (a.x1 > line && s.x1 > line && s.x2 < a.x2 - tol) ++rep.phase2_geometry;
    }
  }
  return rep;
}

}  // namespace rmkit
