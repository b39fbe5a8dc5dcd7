#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmkit/control.hpp"
#include "rmkit/integrate.hpp"
#include "rmkit/model.hpp"
#include "rmkit/occupation.hpp"
#include "rmkit/parallel.hpp"
#include "rmkit/persistence.hpp"
#include "rmkit/random.hpp"
#include "rmkit/stationary.hpp"

namespace rmkit {

enum class ValidationLevel { Fast, Full };

inline ValidationLevel parse_level(const std::string& s) {
  if (s == "fast") return ValidationLevel::Fast;
  if (s == "full") return ValidationLevel::Full;
  throw std::invalid_argument("unknown validation level: " + s);
}

struct AcceptanceContext {
  LambdaFn lambda = [](const ModelParams& p) { return lambda_invasion(p); };
  unsigned threads = 0;  // 0: all cores
  std::uint64_t seed = 20240601;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string measured;
  double seconds = 0.0;
};

namespace acceptance {

inline std::uint64_t path_seed(std::uint64_t base, std::uint64_t salt, std::uint64_t i) {
  return mix64(base ^ mix64(salt * 0x9E3779B97F4A7C15ULL + i));
}

inline std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

struct Outcome {
  bool passed = true;
  std::ostringstream text;

  void expect(bool ok, const std::string& what) {
    passed = passed && ok;
    if (text.tellp() > 0) text << "; ";
    text << what << (ok ? "" : " [FAIL]");
  }
};

inline void lambda_reference_values(const AcceptanceContext& ctx, Outcome& out) {
  struct Row {
    double e, a, k, target;
  };
  for (const Row& r : {Row{0.6, 0.3, 2.5, 0.34}, Row{0.6, 0.9, 2.5, -0.26},
                       Row{1.35, 0.6, 4.5, -0.48}}) {
    const double v = ctx.lambda(ModelParams(r.e, r.a, r.k));
    out.expect(std::fabs(v - r.target) <= 0.01, "L(" + fmt(r.e) + "," + fmt(r.a) + "," +
                                                    fmt(r.k) + ")=" + fmt(v, 5));
  }
}

inline void lambda_limits(const AcceptanceContext& ctx, Outcome& out) {
  const double small = ctx.lambda(ModelParams(0.01, 0.3, 2.5));
  const double gap_small = std::fabs(small - (2.5 / 3.5 - 0.3));
  out.expect(gap_small < 0.002, "|L(0.01)-threshold|=" + fmt(gap_small, 3));
  const double near = ctx.lambda(ModelParams(1.41, 0.5, 2.5));
  out.expect(std::fabs(near + 0.5) < 0.02, "L(1.41)+alpha=" + fmt(near + 0.5, 3));
}

// Lambda(eps, 0, kappa) is E_gamma[x/(1+x)], integrated directly since
// alpha = 0 is outside the parameter domain.
inline void lambda_affinity(const AcceptanceContext& ctx, Outcome& out) {
  std::mt19937_64 rng(ctx.seed ^ 3);
  std::uniform_real_distribution<double> eps(0.05, 1.40);
  std::uniform_real_distribution<double> kap(0.2, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double e = eps(rng);
    const double k = kap(rng);
    const GammaStationary g(ModelParams(e, 0.5, k));
    const double base =
        expect_under_gamma(g, [](double x) { return x / (1.0 + x); }, 1e-11).value;
    for (double a : {0.1, 0.5, 0.9}) {
      worst = std::max(worst, std::fabs(ctx.lambda(ModelParams(e, a, k)) - base + a));
    }
  }
  out.expect(worst < 1e-6, "max deviation " + fmt(worst, 3));
}

inline void fokker_planck(const AcceptanceContext&, Outcome& out) {
  struct Row {
    double e, k;
  };
  for (const Row& r : {Row{1.0, 1.0}, Row{0.6, 2.5}, Row{1.35, 4.5}}) {
    const ModelParams p(r.e, 0.5, r.k);
    if (!p.noise_subcritical()) {
      out.expect(false, "eps^2 >= 2 for (" + fmt(r.e) + "," + fmt(r.k) + ")");
      continue;
    }
    const double top = std::max(20.0, 4.0 * r.k);
    std::vector<double> grid(1000);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = top * double(i + 1) / 1000.0;
    const double res = fokker_planck_residual(p, grid);
    out.expect(res < 1e-10, "(" + fmt(r.e) + "," + fmt(r.k) + "): " + fmt(res, 3));
  }
}

/// Log-log slope of the RMS strong error of plain Euler-Maruyama against the
/// closed-form logistic solution. The reference is evaluated on a 2^-16 grid
/// and each EM run uses the coarsened increments of the same path.
struct StrongOrderResult {
  std::vector<double> dts;
  std::vector<double> rms;
  double slope = 0.0;
};

inline StrongOrderResult strong_order(const ModelParams& p, double z0, Scheme scheme,
                                      std::size_t paths, std::uint64_t seed, unsigned threads) {
  constexpr int fine_pow = 16;
  const std::size_t fine_n = std::size_t{1} << fine_pow;
  const std::vector<int> pows = {6, 7, 8, 9, 10, 11, 12};
  auto per_path = parallel_map(paths, threads, [&](std::size_t i) {
    const BrownianPath fine(path_seed(seed, 5, i), 1.0 / double(fine_n), fine_n);
    const BrownianPath stored = BrownianPath::from_increments(fine.dt(), fine.materialize());
    const double exact = exact_logistic(p, z0, stored).values.back();
    std::vector<double> sq;
    for (int q : pows) {
      const auto coarse = stored.coarsen(std::size_t{1} << (fine_pow - q));
      const auto em = simulate_logistic_em(p, z0, coarse, scheme);
      const double d = em.values.back() - exact;
      sq.push_back(d * d);
    }
    return sq;
  });
  StrongOrderResult r;
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < pows.size(); ++j) {
    double s = 0.0;
    for (const auto& v : per_path) s += v[j];
    const double dt = std::ldexp(1.0, -pows[j]);
    r.dts.push_back(dt);
    r.rms.push_back(std::sqrt(s / double(paths)));
    lx.push_back(std::log(dt));
    ly.push_back(std::log(r.rms.back()));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / double(lx.size());
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / double(ly.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t j = 0; j < lx.size(); ++j) {
    sxy += (lx[j] - mx) * (ly[j] - my);
    sxx += (lx[j] - mx) * (lx[j] - mx);
  }
  r.slope = sxy / sxx;
  return r;
}

inline void strong_convergence(const AcceptanceContext& ctx, Outcome& out) {
  const auto r = strong_order(ModelParams(0.6, 0.3, 2.5), 1.0, Scheme::Plain, 200, ctx.seed,
                              ctx.threads);
  out.expect(r.slope >= 0.35 && r.slope <= 0.65, "slope " + fmt(r.slope, 4));
}

inline void pathwise_comparison(const AcceptanceContext& ctx, Outcome& out) {
  const ModelParams p(0.6, 0.3, 2.5);
  const double dt = 1e-3;
  const auto counts = parallel_map(50, ctx.threads, [&](std::size_t i) {
    const auto path = brownian_path(path_seed(ctx.seed, 6, i), dt, steps_for(100.0, dt));
    return coupled_compare(p, State2{0.75, 1.25}, path, 1e-9).violations;
  });
  const auto total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  out.expect(total == 0, "violations " + std::to_string(total) + " over 50 seeds");
}

inline std::vector<Trajectory> ensemble(const ModelParams& p, const State2& x0, double horizon,
                                        double dt, std::size_t count, std::uint64_t seed,
                                        std::uint64_t salt, unsigned threads,
                                        std::size_t stride = 100) {
  return parallel_map(count, threads, [&](std::size_t i) {
    const auto path = brownian_path(path_seed(seed, salt, i), dt, steps_for(horizon, dt));
    return simulate_em(p, x0, path, {Scheme::LogSpace, stride});
  });
}

inline void predator_extinction_rate(const AcceptanceContext& ctx, Outcome& out) {
  const ModelParams p(0.6, 0.9, 2.5);
  const double lambda = ctx.lambda(p);
  const auto runs = ensemble(p, {0.75, 1.25}, 500.0, 1e-3, 100, ctx.seed, 7, ctx.threads);
  const auto est = log_rate_estimate(runs, 2);
  out.expect(est.used >= 30, "paths used " + std::to_string(est.used));
  out.expect(std::fabs(est.slope - lambda) <= 0.05,
             "x2 rate " + fmt(est.slope, 4) + " +- " + fmt(est.std_err, 2) + " vs L " +
                 fmt(lambda, 4));
}

inline void total_extinction_rates(const AcceptanceContext& ctx, Outcome& out) {
  const ModelParams p(1.5, 0.6, 4.5);
  const auto runs = ensemble(p, {0.75, 1.25}, 300.0, 1e-3, 100, ctx.seed, 8, ctx.threads);
  const auto r1 = log_rate_estimate(runs, 1);
  const auto r2 = log_rate_estimate(runs, 2);
  out.expect(r1.used >= 30 && r1.slope <= 1.0 - 0.5 * p.epsilon_sq() + 0.05,
             "x1 rate " + fmt(r1.slope, 4) + " +- " + fmt(r1.std_err, 2));
  out.expect(r2.used >= 30 && r2.slope <= -p.alpha() + 0.05,
             "x2 rate " + fmt(r2.slope, 4) + " +- " + fmt(r2.std_err, 2));
}

inline void occupation_convergence(const AcceptanceContext& ctx, Outcome& out) {
  const ModelParams p(0.6, 0.9, 2.5);
  const double dt = 1e-3;
  constexpr std::size_t runs = 4;
  const auto hists = parallel_map(runs, ctx.threads, [&](std::size_t i) {
    OccupationHistogram h;
    const auto path = brownian_path(path_seed(ctx.seed, 9, i), dt, steps_for(1e4, dt));
    if (!accumulate_run(h, p, {0.75, 1.25}, path, Scheme::LogSpace, 1e3)) {
      throw std::runtime_error("occupation run diverged");
    }
    return h;
  });
  OccupationHistogram merged;
  for (const auto& h : hists) merged.merge(h);
  const GammaStationary g(p);
  double worst = 0.0;
  for (const auto& h : hists) worst = std::max(worst, ks_to_gamma_marginal(h, g));
  const double ks = ks_to_gamma_marginal(merged, g);
  out.expect(worst < 0.05, "KS per run max " + fmt(worst, 3));
  out.expect(ks < 0.05, "KS merged " + fmt(ks, 3));
}

inline void persistence_mass(const AcceptanceContext& ctx, Outcome& out) {
  const ModelParams p(0.6, 0.3, 2.5);
  const double dt = 1e-3;
  const double horizon = 1e4;
  const double theta = 0.5 * exp_theta_star(p);
  const auto path = brownian_path(path_seed(ctx.seed, 10, 0), dt, steps_for(2.0 * horizon, dt));
  OccupationHistogram h;
  double acc = 0.0;
  double acc_at_t = 0.0;
  State2 prev{0.75, 1.25};
  const std::size_t half = steps_for(horizon, dt);
  const bool ok = simulate_em_observe(
      p, prev, path, Scheme::LogSpace, [&](std::size_t i, double, const State2& s) {
        if (i > 0) {
          if (i <= half) h.add(prev, dt);
          acc += std::exp(theta * (prev.x1 + prev.x2)) * dt;
          if (i == half) acc_at_t = acc;
        }
        prev = s;
      });
  out.expect(ok, ok ? "no divergence" : "diverged");
  const double mass = fraction_in(h, {Rect{0.05, 20.0, 0.05, 20.0}});
  out.expect(mass >= 0.95, "mass in [0.05,20]^2 " + fmt(mass, 4));
  std::string nested = "nested [d,20]^2:";
  for (double d : {1e-2, 1e-3, 1e-4}) {
    nested += " d=" + fmt(d) + " " + fmt(fraction_in(h, {Rect{d, 20.0, d, 20.0}}), 4);
  }
  out.text << "; " << nested;
  const double avg_t = acc_at_t / horizon;
  const double avg_2t = acc / (2.0 * horizon);
  const double ratio = avg_2t / avg_t;
  out.expect(std::isfinite(avg_t) && std::isfinite(avg_2t) && ratio >= 0.5 && ratio <= 2.0,
             "exp moment T " + fmt(avg_t, 4) + ", 2T " + fmt(avg_2t, 4));
}

inline void certificates(const AcceptanceContext& ctx, Outcome& out) {
  const ModelParams p(0.6, 0.3, 2.5);
  const double ts = exp_theta_star(p);
  out.expect(lyapunov_exp_check(p, 0.5 * ts).verified, "exp U at theta*/2 verified");
  out.expect(!lyapunov_exp_check(p, 2.0 * ts).verified, "exp U at 2 theta* rejected");
  const auto poly = lyapunov_poly_check(p, 3.0);
  std::size_t passed = 0;
  for (const auto& c : poly.checks) passed += c.passed;
  out.expect(poly.verified && poly.checks.size() == 4,
             "poly n=3 " + std::to_string(passed) + "/4 checks");

  std::mt19937_64 rng(ctx.seed ^ 11);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const State2 s{u(rng), u(rng)};
    const double exact = hormander_det(p, s);
    worst = std::max(worst, std::fabs(hormander_det_numeric(p, s) - exact) / exact);
  }
  out.expect(worst < 1e-5, "bracket rel err " + fmt(worst, 3));

  int agree = 0;
  const std::vector<ModelParams> sets = {
      {0.6, 0.3, 2.5}, {0.6, 0.9, 2.5}, {1.35, 0.6, 4.5}, {1.5, 0.6, 4.5},
      {0.3, 0.2, 1.0}, {1.2, 0.1, 8.0}, {0.9, 0.7, 3.0},  {1.45, 0.05, 5.0}};
  for (const auto& q : sets) {
    const bool persist = classify_regime(q).regime == Regime::Persistence;
    agree += (hofbauer_weights(q).has_value() == persist);
  }
  out.expect(agree == int(sets.size()),
             "hofbauer iff persistence " + std::to_string(agree) + "/" +
                 std::to_string(sets.size()));
}

inline void rate_exponent_branches(const AcceptanceContext& ctx, Outcome& out) {
  struct Row {
    double a, e, n, k;
    RateBranch branch;
    double bound;
  };
  // kappa = 10 keeps both rows in the persistence regime.
  const Row rows[] = {
      {0.6, 0.6, 3.0, 10.0, RateBranch::Shifted, 1.5 + 0.6 / (2.0 * 0.36 * 3.0)},
      {0.3, 0.6, 3.0, 10.0, RateBranch::Q0, 1.0 + 0.3 / (0.36 * 3.0)},
  };
  for (const Row& r : rows) {
    const ModelParams p(r.e, r.a, r.k);
    const auto x = rate_exponents(p, r.n, ctx.lambda);
    const double q0 = 1.0 + r.a / (r.e * r.e * r.n);
    const bool ok = x.q0 == q0 && x.split_branch == r.branch &&
                    std::fabs(x.split_bound - r.bound) <= 1e-15 &&
                    x.q_max == std::min(q0, 0.5 * (q0 + 2.0)) && x.q_max > 1.0 &&
                    x.lambda_tv > 0.0;
    out.expect(ok, "alpha/eps^2=" + fmt(r.a / (r.e * r.e), 4) + ": q0 " + fmt(x.q0, 5) +
                       ", split bound " + fmt(x.split_bound, 5));
  }
}

inline void reachability(const AcceptanceContext& ctx, Outcome& out) {
  const ModelParams p(0.6, 0.3, 0.5);
  auto check = [&](const State2& x, const State2& z, std::optional<double> vstar) {
    ReachOptions opt;
    opt.vstar = vstar;
    const auto r = reach(p, x, z, opt);
    return r.success && check_reach_invariants(p, r).ok();
  };
  out.expect(check({0.3, 0.3}, {1.0, 2.0}, 3.0), "x=(0.3,0.3) z=(1,2) with v*=3");
  out.expect(check({0.3, 0.3}, {1.0, 2.0}, std::nullopt), "x=(0.3,0.3) z=(1,2) with auto v*");
  std::mt19937_64 rng(ctx.seed ^ 13);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::vector<std::pair<State2, State2>> pairs;
  for (int i = 0; i < 20; ++i) pairs.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
  const auto ok = parallel_map(pairs.size(), ctx.threads, [&](std::size_t i) {
    return int(check(pairs[i].first, pairs[i].second, std::nullopt));
  });
  const int n_ok = std::accumulate(ok.begin(), ok.end(), 0);
  out.expect(n_ok == 20, "random pairs " + std::to_string(n_ok) + "/20");
}

struct Criterion {
  int id;
  const char* name;
  bool fast;
  void (*run)(const AcceptanceContext&, Outcome&);
};

inline const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "lambda reference values", true, lambda_reference_values},
      {2, "lambda limits", true, lambda_limits},
      {3, "lambda affine in alpha", true, lambda_affinity},
      {4, "Fokker-Planck identity", true, fokker_planck},
      {5, "strong order of Euler-Maruyama", false, strong_convergence},
      {6, "pathwise comparison", false, pathwise_comparison},
      {7, "predator-extinction rate", false, predator_extinction_rate},
      {8, "total-extinction rates", false, total_extinction_rates},
      {9, "occupation measure vs Gamma", false, occupation_convergence},
      {10, "persistence mass and exp moment", false, persistence_mass},
      {11, "certificates", true, certificates},
      {12, "rate exponents", true, rate_exponent_branches},
      {13, "reachability", true, reachability},
  };
  return all;
}

}  // namespace acceptance

inline CriterionResult run_criterion(int id, const AcceptanceContext& ctx) {
  for (const auto& c : acceptance::criteria()) {
    if (c.id != id) continue;
    CriterionResult r{c.id, c.name, false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      acceptance::Outcome out;
      c.run(ctx, out);
      r.passed = out.passed;
      r.measured = out.text.str();
    } catch (const std::exception& e) {
      r.passed = false;
      r.measured = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }
  throw std::invalid_argument("no acceptance criterion " + std::to_string(id));
}

inline std::vector<int> criteria_for(ValidationLevel level) {
  std::vector<int> ids;
  for (const auto& c : acceptance::criteria()) {
    if (level == ValidationLevel::Full || c.fast) ids.push_back(c.id);
  }
  return ids;
}

/// Runs the criteria of `level`, printing one line per criterion as it
/// finishes when `log` is given.
inline std::vector<CriterionResult> run_acceptance(ValidationLevel level,
                                                   const AcceptanceContext& ctx = {},
                                                   std::ostream* log = nullptr) {
  std::vector<CriterionResult> out;
  for (int id : criteria_for(level)) {
    out.push_back(run_criterion(id, ctx));
    if (log) {
      const auto& r = out.back();
      *log << (r.passed ? "PASS" : "FAIL") << "  [" << std::setw(2) << r.id << "] "
           << r.name << "  (" << std::fixed << std::setprecision(2) << r.seconds << " s)  "
           << r.measured << '\n';
      log->unsetf(std::ios::floatfield);
      log->flush();
    }
  }
  return out;
}

}  // namespace rmkit
