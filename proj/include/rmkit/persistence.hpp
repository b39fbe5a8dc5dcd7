#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmkit/model.hpp"
#include "rmkit/stationary.hpp"

namespace rmkit {

// ---------------------------------------------------------------------------
// Invasion rate of the predator against the prey-only stationary law.

/// Lambda(eps, alpha, kappa) = E_gamma[x/(1+x)] - alpha. Defined only for
/// eps^2 < 2. Absolute error is below `abs_tol` plus the 1e-12 tail cut.
inline double lambda_invasion(const ModelParams& p, double abs_tol = 1e-10) {
  if (!p.noise_subcritical() || p.is_noiseless()) {
    throw std::domain_error("Lambda is undefined for epsilon^2 >= 2");
  }
  const GammaStationary g(p);
  const auto r = expect_under_gamma(g, [](double x) { return x / (1.0 + x); }, abs_tol);
  return r.value - p.alpha();
}

using LambdaFn = std::function<double(const ModelParams&)>;

enum class Regime { Persistence, PredatorExtinction, TotalExtinction, Critical };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::Persistence: return "persistence";
    case Regime::PredatorExtinction: return "predator_extinction";
    case Regime::TotalExtinction: return "total_extinction";
    case Regime::Critical: return "critical";
  }
  return "unknown";
}

struct RateBound {
  std::string quantity;
  double bound = 0.0;
  bool exact = false;
};

struct RegimeReport {
  Regime regime = Regime::Critical;
  std::optional<double> lambda;
  std::vector<RateBound> rate_bounds;
};

inline constexpr double kCriticalBand = 1e-6;

/// Classification from a precomputed Lambda (ignored when eps^2 >= 2).
inline RegimeReport classify_regime_from(const ModelParams& p, std::optional<double> lambda,
                                         double tol = kCriticalBand) {
  RegimeReport rep;
  const double e2 = p.epsilon_sq();
  if (e2 > 2.0) {
    rep.regime = Regime::TotalExtinction;
    rep.rate_bounds = {{"x1_log_rate", 1.0 - 0.5 * e2, false}, {"x2_log_rate", -p.alpha(), false}};
    return rep;
  }
  if (e2 == 2.0) {
    rep.regime = Regime::Critical;
    return rep;
  }
  if (!lambda) throw std::invalid_argument("classify_regime_from: Lambda required for eps^2 < 2");
  rep.lambda = lambda;
  if (std::fabs(*lambda) <= tol) {
    rep.regime = Regime::Critical;
  } else if (*lambda > 0.0) {
    rep.regime = Regime::Persistence;
  } else {
    rep.regime = Regime::PredatorExtinction;
    rep.rate_bounds = {{"x2_log_rate", *lambda, true}};
  }
  return rep;
}

/// Regime of the stochastic system. |Lambda| <= tol is reported as Critical.
inline RegimeReport classify_regime(const ModelParams& p, double tol = kCriticalBand,
                                    const LambdaFn& lambda_fn = {}) {
  std::optional<double> lambda;
  if (p.noise_subcritical()) lambda = lambda_fn ? lambda_fn(p) : lambda_invasion(p);
  return classify_regime_from(p, lambda, tol);
}

/// Asymptotic log-rate bounds in the extinction regimes.
inline std::vector<RateBound> extinction_rate_bounds(const ModelParams& p,
                                                     double tol = kCriticalBand) {
  const auto rep = classify_regime(p, tol);
  if (rep.regime == Regime::Persistence) {
    throw std::domain_error("extinction_rate_bounds: parameters are in the persistence regime");
  }
  if (rep.regime == Regime::Critical) {
    throw std::domain_error("extinction_rate_bounds: critical case has no rate bound");
  }
  return rep.rate_bounds;
}

/// Pointwise invasion rate lambda_i = F_i - a_ii/2, with a_11 = eps^2 and a_22 = 0.
inline double invasion_rate_at(const ModelParams& p, int species, const State2& s) {
  if (species == 1) return prey_growth_rate(p, s.x1, s.x2) - 0.5 * p.epsilon_sq();
  if (species == 2) return predator_growth_rate(p, s.x1);
  throw std::invalid_argument("invasion_rate_at: species must be 1 or 2");
}

// ---------------------------------------------------------------------------
// Hofbauer weights.

struct HofbauerWeights {
  double p1 = 0.0;
  double p2 = 0.0;
  double at_origin = 0.0;    // p1 lambda1(0,0) + p2 lambda2(0,0)
  double at_prey_law = 0.0;  // p1 mu(lambda1) + p2 mu(lambda2), mu = gamma x delta_0
};

/// Positive weights with p . mu(lambda) > 0 on both boundary ergodic
/// measures, or nothing outside the persistence regime. p2 = 1 and p1 is
/// twice the threshold alpha / (1 - eps^2/2).
inline std::optional<HofbauerWeights> hofbauer_weights(const ModelParams& p,
                                                       double tol = kCriticalBand) {
  if (!p.noise_subcritical() || p.is_noiseless()) return std::nullopt;
  const double lambda = lambda_invasion(p);
  if (!(lambda > tol)) return std::nullopt;
  HofbauerWeights w;
  w.p2 = 1.0;
  w.p1 = 2.0 * p.alpha() / (1.0 - 0.5 * p.epsilon_sq());
  const State2 origin{0.0, 0.0};
  w.at_origin = w.p1 * invasion_rate_at(p, 1, origin) + w.p2 * invasion_rate_at(p, 2, origin);
  const GammaStationary g(p);
  const double mu1 =
      expect_under_gamma(g, [&](double x) { return invasion_rate_at(p, 1, State2{x, 0.0}); })
          .value;
  const double mu2 =
      expect_under_gamma(g, [&](double x) { return invasion_rate_at(p, 2, State2{x, 0.0}); })
          .value;
  w.at_prey_law = w.p1 * mu1 + w.p2 * mu2;
  if (!(w.at_origin > 0.0 && w.at_prey_law > 0.0)) return std::nullopt;
  return w;
}

// ---------------------------------------------------------------------------
// Lyapunov certificates.

/// Sampling grid for certificate checks: {0} plus `points` log-spaced
/// values in [x_min, x_max] on each axis.
struct SampleSpec {
  double x_max = 50.0;
  double x_min = 1e-3;
  int points = 96;

  std::vector<double> axis() const {
    std::vector<double> out{0.0};
    const double lo = std::log(x_min);
    const double hi = std::log(x_max);
    for (int i = 0; i < points; ++i) {
      out.push_back(std::exp(lo + (hi - lo) * i / std::max(1, points - 1)));
    }
    out.back() = x_max;
    return out;
  }
  SampleSpec refined() const { return {x_max, x_min, 2 * points}; }
  /// Points far enough out that the drift condition must hold without b.
  bool in_shell(const State2& s) const { return std::max(s.x1, s.x2) >= 0.5 * x_max; }
};

enum class LyapunovKind { Exponential, Polynomial };

/// U = exp(theta (x1 + x2)) or U = 1 + (x1 + x2)^n.
struct LyapunovFamily {
  LyapunovKind kind = LyapunovKind::Exponential;
  double param = 1.0;  // theta or n

  static LyapunovFamily exponential(double theta) { return {LyapunovKind::Exponential, theta}; }
  static LyapunovFamily polynomial(double n) { return {LyapunovKind::Polynomial, n}; }

  double value(const State2& s) const {
    const double sum = s.x1 + s.x2;
    return kind == LyapunovKind::Exponential ? std::exp(param * sum) : 1.0 + std::pow(sum, param);
  }
  // dU/dx_i / U (equal for both coordinates).
  double grad_over_u(const State2& s) const {
    const double sum = s.x1 + s.x2;
    if (kind == LyapunovKind::Exponential) return param;
    return param * std::pow(sum, param - 1.0) / (1.0 + std::pow(sum, param));
  }
  // d^2U/dx1^2 / U.
  double hess11_over_u(const State2& s) const {
    const double sum = s.x1 + s.x2;
    if (kind == LyapunovKind::Exponential) return param * param;
    return param * (param - 1.0) * std::pow(sum, param - 2.0) / (1.0 + std::pow(sum, param));
  }
  std::string name() const {
    return kind == LyapunovKind::Exponential ? "exponential" : "polynomial";
  }
};

/// LU / U for the generator of the 2-D system.
inline double generator_over_u(const ModelParams& p, const LyapunovFamily& u, const State2& s) {
  const auto d = drift(p, s);
  return u.grad_over_u(s) * (d.a + d.b) + 0.5 * p.epsilon_sq() * s.x1 * s.x1 * u.hess11_over_u(s);
}

/// Carre du champ over U^2: eps^2 x1^2 (dU/dx1)^2 / U^2.
inline double carre_du_champ_over_u2(const ModelParams& p, const LyapunovFamily& u,
                                     const State2& s) {
  const double g = u.grad_over_u(s);
  return p.epsilon_sq() * s.x1 * s.x1 * g * g;
}

inline double abs_growth_rates(const ModelParams& p, const State2& s) {
  return std::fabs(prey_growth_rate(p, s.x1, s.x2)) + std::fabs(predator_growth_rate(p, s.x1));
}

struct CheckResult {
  std::string name;
  bool passed = false;
  double bound = 0.0;  // b for drift conditions, sup ratio for ratio conditions
  State2 witness;
  double witness_value = 0.0;
};

struct LyapunovReport {
  LyapunovFamily family;
  double a = 0.0;
  double b = 0.0;
  std::optional<double> c;
  bool verified = false;
  State2 witness;
  double witness_value = 0.0;
  std::vector<CheckResult> checks;
  std::map<std::string, double> constants;
};

namespace detail {

// Drift condition ratio(s) <= -decay on the shell, and the smallest b with
// U(s) (ratio(s) + decay) <= b on every sample. The witness is the worst
// shell point when the shell check fails, else the point attaining b
// (first in grid order on ties).
template <class Ratio>
CheckResult drift_condition(const std::string& name, const LyapunovFamily& u, double decay,
                            const SampleSpec& spec, Ratio&& ratio) {
  CheckResult out{name, true, 0.0, {}, -std::numeric_limits<double>::infinity()};
  double worst_shell = -std::numeric_limits<double>::infinity();
  State2 shell_witness;
  const auto axis = spec.axis();
  for (double x1 : axis) {
    for (double x2 : axis) {
      const State2 s{x1, x2};
      const double r = ratio(s) + decay;
      if (spec.in_shell(s) && r > worst_shell) {
        worst_shell = r;
        shell_witness = s;
      }
      const double excess = r > 0.0 ? u.value(s) * r : 0.0;
      if (excess > out.bound) {
        out.bound = excess;
        out.witness = s;
        out.witness_value = excess;
      }
    }
  }
  if (worst_shell > 0.0) {
    out.passed = false;
    out.witness = shell_witness;
    out.witness_value = worst_shell;
  }
  return out;
}

// sup of ratio(s) over samples must stay below `limit`.
template <class Ratio>
CheckResult ratio_condition(const std::string& name, double limit, const SampleSpec& spec,
                            Ratio&& ratio) {
  CheckResult out{name, true, -std::numeric_limits<double>::infinity(), {}, 0.0};
  const auto axis = spec.axis();
  for (double x1 : axis) {
    for (double x2 : axis) {
      const State2 s{x1, x2};
      const double r = ratio(s);
      if (r > out.bound) {
        out.bound = r;
        out.witness = s;
        out.witness_value = r;
      }
    }
  }
  out.passed = out.bound <= limit;
  return out;
}

// Runs a check on the grid and on its 2x refinement; both must pass.
template <class Check>
CheckResult with_refinement(const SampleSpec& spec, Check&& check) {
  auto coarse = check(spec);
  auto fine = check(spec.refined());
  if (!coarse.passed) return coarse;
  if (!fine.passed) return fine;
  return fine.bound >= coarse.bound ? fine : coarse;
}

}  // namespace detail

/// Gamma(U) <= c U^2 on the samples (and on the 2x refinement).
inline CheckResult check_carre_du_champ(const ModelParams& p, const LyapunovFamily& u, double c,
                                        const SampleSpec& spec = {}) {
  return detail::with_refinement(spec, [&](const SampleSpec& sp) {
    return detail::ratio_condition("carre_du_champ", c, sp,
                                   [&](const State2& s) { return carre_du_champ_over_u2(p, u, s); });
  });
}

inline double exp_theta_star(const ModelParams& p) { return 2.0 / (p.kappa() * p.epsilon_sq()); }

/// Sampled check of LU <= -aU + b for U = exp(theta (x1 + x2)).
///
/// a is half the one-dimensional decay constant 4 theta kappa / (2 - eps^2 theta kappa),
/// valid for theta < theta* = 2/(kappa eps^2). Beyond theta* the quadratic
/// term wins along the prey axis; a nominal a = theta is used and the shell
/// check fails there.
inline LyapunovReport lyapunov_exp_check(const ModelParams& p, double theta,
                                         const SampleSpec& spec = {}) {
  if (!(theta > 0.0)) throw std::invalid_argument("lyapunov_exp_check: theta must be > 0");
  const double theta_star = exp_theta_star(p);
  const double denom = 2.0 - p.epsilon_sq() * theta * p.kappa();
  LyapunovReport rep;
  rep.family = LyapunovFamily::exponential(theta);
  rep.a = theta < theta_star ? 0.5 * 4.0 * theta * p.kappa() / denom : theta;
  auto check = detail::with_refinement(spec, [&](const SampleSpec& sp) {
    return detail::drift_condition("drift", rep.family, rep.a, sp, [&](const State2& s) {
      return generator_over_u(p, rep.family, s);
    });
  });
  rep.b = check.bound;
  rep.verified = check.passed && theta < theta_star;
  rep.witness = check.witness;
  rep.witness_value = check.witness_value;
  rep.checks.push_back(check);
  rep.constants = {{"theta", theta}, {"theta_star", theta_star}, {"a", rep.a}, {"b", rep.b}};
  return rep;
}

/// Sampled check of the strengthened conditions for U = 1 + (x1 + x2)^n:
///   (a) LU <= -aU + b with a = alpha n / 2,
///   (b) Gamma(U) <= c U^2 with c = eps^2 n^2,
///   (c) |F1| + |F2| <= C U with C above 2 + 1/kappa + alpha,
///   (d) LU + p0 (|F1| + |F2|) <= -delta U + b' with delta = a/2, p0 < (a - delta)/C.
/// Pass p0 <= 0 to use p0 = (a - delta) / (2C).
inline LyapunovReport lyapunov_poly_check(const ModelParams& p, double n, double p0 = 0.0,
                                          const SampleSpec& spec = {}) {
  if (!(n > 2.0)) throw std::invalid_argument("lyapunov_poly_check: n must be > 2");
  LyapunovReport rep;
  rep.family = LyapunovFamily::polynomial(n);
  const auto& u = rep.family;
  rep.a = 0.5 * p.alpha() * n;
  rep.c = p.epsilon_sq() * n * n;

  auto drift_a = detail::with_refinement(spec, [&](const SampleSpec& sp) {
    return detail::drift_condition("drift", u, rep.a, sp,
                                   [&](const State2& s) { return generator_over_u(p, u, s); });
  });
  auto cdc = check_carre_du_champ(p, u, *rep.c, spec);

  const double c_floor = 2.0 + 1.0 / p.kappa() + p.alpha();
  auto growth_sup = detail::with_refinement(spec, [&](const SampleSpec& sp) {
    return detail::ratio_condition("growth_bound", std::numeric_limits<double>::infinity(), sp,
                                   [&](const State2& s) {
                                     return abs_growth_rates(p, s) / u.value(s);
                                   });
  });
  const double big_c = 1.05 * std::max(c_floor, growth_sup.bound);
  growth_sup.passed = growth_sup.bound <= big_c;

  const double delta = 0.5 * rep.a;
  const double p0_limit = (rep.a - delta) / big_c;
  const double p0_used = p0 > 0.0 ? p0 : 0.5 * p0_limit;
  auto drift_f = detail::with_refinement(spec, [&](const SampleSpec& sp) {
    return detail::drift_condition("drift_with_growth", u, delta, sp, [&](const State2& s) {
      return generator_over_u(p, u, s) + p0_used * abs_growth_rates(p, s) / u.value(s);
    });
  });
  if (!(p0_used < p0_limit)) drift_f.passed = false;

  rep.b = drift_a.bound;
  rep.checks = {drift_a, cdc, growth_sup, drift_f};
  rep.verified = std::all_of(rep.checks.begin(), rep.checks.end(),
                             [](const CheckResult& c) { return c.passed; });
  const auto worst = std::find_if(rep.checks.begin(), rep.checks.end(),
                                  [](const CheckResult& c) { return !c.passed; });
  const auto& w = worst == rep.checks.end() ? drift_a : *worst;
  rep.witness = w.witness;
  rep.witness_value = w.witness_value;
  rep.constants = {{"n", n},           {"a", rep.a},         {"b", rep.b},
                   {"c", *rep.c},      {"C", big_c},         {"C_floor", c_floor},
                   {"delta", delta},   {"p0", p0_used},      {"p0_limit", p0_limit},
                   {"b_growth", drift_f.bound}, {"d0", 1.0}};
  return rep;
}

// ---------------------------------------------------------------------------
// Stationary Fokker-Planck identity for the logistic SDE.

/// max over the grid of |-(d/dz)[z(1-z/kappa) g] + (eps^2/2)(d2/dz2)[z^2 g]|
/// divided by max g, with both derivatives expanded analytically through
/// g'/g = (k-1)/z - 1/theta.
inline double fokker_planck_residual(const ModelParams& p, const std::vector<double>& grid) {
  const GammaStationary g(p);
  const double k = g.shape();
  const double th = g.scale();
  const double kap = p.kappa();
  double worst = 0.0;
  double peak = 0.0;
  for (double z : grid) {
    if (!(z > 0.0)) throw std::invalid_argument("fokker_planck_residual: grid points must be > 0");
    const double dens = gamma_density(g, z);
    const double l1 = (k - 1.0) / z - 1.0 / th;
    const double l2 = l1 * l1 - (k - 1.0) / (z * z);
    const double flux = (1.0 - 2.0 * z / kap) + (z - z * z / kap) * l1;
    const double diff = 2.0 + 4.0 * z * l1 + z * z * l2;
    worst = std::max(worst, std::fabs(dens * (-flux + 0.5 * p.epsilon_sq() * diff)));
    peak = std::max(peak, dens);
  }
  return peak > 0.0 ? worst / peak : worst;
}

// ---------------------------------------------------------------------------
// Hoermander bracket.

/// det([S0, S1], S1) = eps^2 x1^2 x2 / (1 + x1)^2 for the Stratonovich fields.
inline double hormander_det(const ModelParams& p, const State2& s) {
  const double d = 1.0 + s.x1;
  return p.epsilon_sq() * s.x1 * s.x1 * s.x2 / (d * d);
}

namespace detail {

template <class Field>
std::array<Vec2, 2> jacobian_fd(Field&& f, const State2& s, double rel_step) {
  std::array<Vec2, 2> cols;  // cols[k] = dField/dx_k
  for (int k = 0; k < 2; ++k) {
    const double base = k == 0 ? s.x1 : s.x2;
    const double h = rel_step * std::max(1.0, std::fabs(base));
    State2 lo = s, hi = s;
    (k == 0 ? hi.x1 : hi.x2) += h;
    (k == 0 ? lo.x1 : lo.x2) -= h;
    const Vec2 fh = f(hi);
    const Vec2 fl = f(lo);
    cols[k] = {(fh.a - fl.a) / (2.0 * h), (fh.b - fl.b) / (2.0 * h)};
  }
  return cols;
}

}  // namespace detail

/// Same determinant computed numerically: S1 is the noise field, S0 the
/// Ito drift with the Stratonovich correction -1/2 (DS1) S1, and the
/// bracket [S0, S1] = DS1 S0 - DS0 S1, all Jacobians by central differences.
inline double hormander_det_numeric(const ModelParams& p, const State2& s, double rel_step = 1e-5) {
  auto noise = [&](const State2& x) { return diffusion(p, x); };
  auto strat_drift = [&](const State2& x) {
    const auto ds1 = detail::jacobian_fd(noise, x, rel_step);
    const Vec2 s1 = noise(x);
    const Vec2 d = drift(p, x);
    return Vec2{d.a - 0.5 * (ds1[0].a * s1.a + ds1[1].a * s1.b),
                d.b - 0.5 * (ds1[0].b * s1.a + ds1[1].b * s1.b)};
  };
  const auto ds1 = detail::jacobian_fd(noise, s, rel_step);
  const auto ds0 = detail::jacobian_fd(strat_drift, s, rel_step);
  const Vec2 s0 = strat_drift(s);
  const Vec2 s1 = noise(s);
  const Vec2 bracket{ds1[0].a * s0.a + ds1[1].a * s0.b - (ds0[0].a * s1.a + ds0[1].a * s1.b),
                     ds1[0].b * s0.a + ds1[1].b * s0.b - (ds0[0].b * s1.a + ds0[1].b * s1.b)};
  return bracket.a * s1.b - bracket.b * s1.a;
}

// ---------------------------------------------------------------------------
// Polynomial convergence-rate exponents.

enum class RateBranch { Q0, Shifted };

struct RateExponents {
  double n = 0.0;
  double a = 0.0;       // alpha n / 2
  double c = 0.0;       // eps^2 n^2
  double q0 = 0.0;      // 1 + alpha / (eps^2 n)
  double q_max = 0.0;   // min{q0, (q0 + 2)/2}
  RateBranch split_branch = RateBranch::Q0;
  double split_bound = 0.0;  // q0 if alpha/eps^2 < n/2, else 3/2 + alpha/(2 eps^2 n)
  double q = 0.0;             // chosen exponent (1 + q_max)/2
  double lambda_tv = 0.0;     // q - 1
  double beta_min = 1.0;
  double beta_max = 0.0;      // q
  std::string weight;         // W_q
};

/// Exponents of the polynomial total-variation rate for U = 1 + (x1 + x2)^n.
///
/// q_max is the admissible bound min{q0, (q0+2)/2}; the two-branch closed
/// form split at alpha/eps^2 = n/2 is reported separately in split_bound.
inline RateExponents rate_exponents(const ModelParams& p, double n, const LambdaFn& lambda_fn = {}) {
  if (!(n > 2.0)) throw std::invalid_argument("rate_exponents: n must be > 2");
  const auto rep = classify_regime(p, kCriticalBand, lambda_fn);
  if (rep.regime != Regime::Persistence) {
    throw std::domain_error("rate_exponents: requires the persistence regime, got " +
                            to_string(rep.regime));
  }
  const double e2 = p.epsilon_sq();
  RateExponents r;
  r.n = n;
  r.a = 0.5 * p.alpha() * n;
  r.c = e2 * n * n;
  r.q0 = 1.0 + 2.0 * r.a / r.c;
  r.q_max = std::min(r.q0, 0.5 * (r.q0 + 2.0));
  if (p.alpha() / e2 > 0.5 * n) {
    r.split_branch = RateBranch::Shifted;
    r.split_bound = 1.5 + p.alpha() / (2.0 * e2 * n);
  } else {
    r.split_branch = RateBranch::Q0;
    r.split_bound = r.q0;
  }
  r.q = 0.5 * (1.0 + r.q_max);
  r.lambda_tv = r.q - 1.0;
  r.beta_max = r.q;
  r.weight = r.q <= 2.0 ? "V^q + C U^q" : "V^q + C U^(2q-2)";
  return r;
}

}  // namespace rmkit
