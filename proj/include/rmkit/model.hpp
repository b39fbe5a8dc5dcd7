#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace rmkit {

/// Parameters of the stochastic Rosenzweig-MacArthur system.
///
/// `epsilon` scales the environmental noise on the prey, `alpha` is the
/// predator per-capita mortality and `kappa` the prey carrying capacity.
/// All three must be strictly positive. `alpha >= 1` is accepted but
/// flagged through `alpha_admissible()`.
class ModelParams {
 public:
  ModelParams(double epsilon, double alpha, double kappa)
      : epsilon_(epsilon), alpha_(alpha), kappa_(kappa) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw std::invalid_argument("epsilon must be > 0");
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      throw std::invalid_argument("alpha must be > 0");
    }
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
      throw std::invalid_argument("kappa must be > 0");
    }
  }

  /// The zero-noise reduction (eps = 0), used for deterministic overlays.
  /// Only the simulation and drift paths accept it.
  static ModelParams noiseless(double alpha, double kappa) {
    ModelParams p(1.0, alpha, kappa);
    p.epsilon_ = 0.0;
    return p;
  }

  double epsilon() const { return epsilon_; }
  double alpha() const { return alpha_; }
  double kappa() const { return kappa_; }
  double epsilon_sq() const { return epsilon_ * epsilon_; }

  bool noise_subcritical() const { return epsilon_sq() < 2.0; }
  bool is_noiseless() const { return epsilon_ == 0.0; }
  bool alpha_admissible() const { return alpha_ < 1.0; }

  /// Same model with a different noise intensity. Used for zero-noise
  /// overlays and parameter sweeps.
  ModelParams with_epsilon(double epsilon) const {
    if (epsilon == 0.0) return noiseless(alpha_, kappa_);
    return {epsilon, alpha_, kappa_};
  }
  ModelParams with_alpha(double alpha) const {
    if (is_noiseless()) return noiseless(alpha, kappa_);
    return {epsilon_, alpha, kappa_};
  }

 private:
  double epsilon_;
  double alpha_;
  double kappa_;
};

/// Nonnegative (prey, predator) densities.
struct State2 {
  double x1 = 0.0;
  double x2 = 0.0;

  State2() = default;
  State2(double prey, double predator) : x1(prey), x2(predator) {
    if (!valid()) {
      throw std::invalid_argument("State2 coordinates must be finite and >= 0");
    }
  }

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(x2) && x1 >= 0.0 && x2 >= 0.0;
  }
  bool interior() const { return x1 > 0.0 && x2 > 0.0; }

  friend bool operator==(const State2&, const State2&) = default;
};

/// A plain 2-vector (velocities, noise coefficients, Lie brackets).
struct Vec2 {
  double a = 0.0;
  double b = 0.0;
};

// Per-capita growth rates F1, F2.
inline double prey_growth_rate(const ModelParams& p, double x1, double x2) {
  return 1.0 - x1 / p.kappa() - x2 / (1.0 + x1);
}

inline double predator_growth_rate(const ModelParams& p, double x1) {
  return -p.alpha() + x1 / (1.0 + x1);
}

/// Deterministic part of the Kolmogorov system: (x1 F1, x2 F2).
inline Vec2 drift(const ModelParams& p, const State2& s) {
  return {s.x1 * prey_growth_rate(p, s.x1, s.x2), s.x2 * predator_growth_rate(p, s.x1)};
}

/// Noise coefficient. Only the prey is driven, so the second entry is
/// identically zero.
inline Vec2 diffusion(const ModelParams& p, const State2& s) {
  return {p.epsilon() * s.x1, 0.0};
}

/// Abscissa of the vertical line on which the predator is stationary.
inline double predator_nullcline(const ModelParams& p) {
  return p.alpha() / (1.0 - p.alpha());
}

/// Drift and noise coefficient of the one-dimensional logistic SDE.
inline std::pair<double, double> logistic_drift_diffusion(const ModelParams& p, double z) {
  if (!(z >= 0.0)) throw std::invalid_argument("logistic state must be >= 0");
  return {z * (1.0 - z / p.kappa()), p.epsilon() * z};
}

/// Gamma(k, theta) law of the prey in the absence of predators, with
/// shape k = 2/eps^2 - 1 and scale theta = eps^2 kappa / 2.
class GammaStationary {
 public:
  explicit GammaStationary(const ModelParams& p) {
    const double e2 = p.epsilon_sq();
    if (p.is_noiseless()) throw std::domain_error("stationary Gamma law requires epsilon > 0");
    if (!(e2 < 2.0)) {
      throw std::domain_error("stationary Gamma law requires epsilon^2 < 2");
    }
    shape_ = 2.0 / e2 - 1.0;
    scale_ = 0.5 * e2 * p.kappa();
    log_norm_ = std::lgamma(shape_) + shape_ * std::log(scale_);
  }

  double shape() const { return shape_; }
  double scale() const { return scale_; }
  double mean() const { return shape_ * scale_; }
  double variance() const { return shape_ * scale_ * scale_; }

  /// log of the density at x > 0.
  double log_density(double x) const {
    return (shape_ - 1.0) * std::log(x) - x / scale_ - log_norm_;
  }

 private:
  double shape_ = 0.0;
  double scale_ = 0.0;
  double log_norm_ = 0.0;
};

/// Gamma density. At x = 0 the value is 1/theta for k = 1, 0 for k > 1 and
/// +infinity for k < 1 (the singularity is integrable; quadrature callers
/// are expected to treat the origin themselves).
inline double gamma_density(const GammaStationary& g, double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("gamma_density: x must be >= 0");
  if (x == 0.0) {
    if (g.shape() < 1.0) return std::numeric_limits<double>::infinity();
    if (g.shape() == 1.0) return 1.0 / g.scale();
    return 0.0;
  }
  return std::exp(g.log_density(x));
}

struct GammaMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Closed-form moments: kappa (1 - eps^2/2) and (kappa^2 eps^2 / 2)(1 - eps^2/2).
inline GammaMoments gamma_moments(const GammaStationary& g) {
  return {g.mean(), g.variance()};
}

enum class DeterministicTag { PredatorExtinctEquilibrium, StableCoexistence, LimitCycle };

inline std::string to_string(DeterministicTag t) {
  switch (t) {
    case DeterministicTag::PredatorExtinctEquilibrium: return "predator_extinct_equilibrium";
    case DeterministicTag::StableCoexistence: return "stable_coexistence";
    case DeterministicTag::LimitCycle: return "limit_cycle";
  }
  return "unknown";
}

struct DeterministicRegime {
  DeterministicTag tag;
  std::optional<State2> equilibrium;
};

/// Positive equilibrium of the zero-noise flow, present iff alpha < kappa/(kappa+1).
inline std::optional<State2> positive_equilibrium(const ModelParams& p) {
  const double a = p.alpha();
  const double k = p.kappa();
  if (!(a < k / (k + 1.0))) return std::nullopt;
  const double om = 1.0 - a;
  return State2{a / om, (k - (k + 1.0) * a) / (k * om * om)};
}

/// Classification of the eps = 0 dynamics. Ties follow the printed
/// inequalities: alpha >= kappa/(1+kappa) is predator extinction and
/// alpha >= (kappa-1)/(1+kappa) is stable coexistence.
inline DeterministicRegime deterministic_regime(const ModelParams& p) {
  const double a = p.alpha();
  const double k = p.kappa();
  if (a >= k / (1.0 + k)) {
    return {DeterministicTag::PredatorExtinctEquilibrium, std::nullopt};
  }
  auto eq = positive_equilibrium(p);
  if (a < (k - 1.0) / (1.0 + k)) return {DeterministicTag::LimitCycle, eq};
  return {DeterministicTag::StableCoexistence, eq};
}

}  // namespace rmkit
