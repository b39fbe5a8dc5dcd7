#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmkit/acceptance.hpp"
#include "rmkit/control.hpp"
#include "rmkit/integrate.hpp"
#include "rmkit/io.hpp"
#include "rmkit/model.hpp"
#include "rmkit/occupation.hpp"
#include "rmkit/parallel.hpp"
#include "rmkit/persistence.hpp"

namespace rmkit::cli {

/// Options shared by every subcommand. Model values left unset take the
/// subcommand's own defaults.
struct Common {
  std::optional<double> eps;
  std::optional<double> alpha;
  std::optional<double> kappa;
  std::optional<double> x1;
  std::optional<double> x2;
  std::optional<double> horizon;
  double dt = 1e-3;
  std::string scheme = "logspace";
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool json = false;
};

/// A usage or domain error: reported on stderr, exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline ModelParams make_params(double eps, double alpha, double kappa) {
  if (eps == 0.0) return ModelParams::noiseless(alpha, kappa);
  return {eps, alpha, kappa};
}

inline ModelParams resolve_params(const Common& c, double eps, double alpha, double kappa) {
  return make_params(c.eps.value_or(eps), c.alpha.value_or(alpha), c.kappa.value_or(kappa));
}

inline json params_json(const ModelParams& p) { return to_json(p); }

inline std::string stem_with(const std::string& path, const std::string& suffix) {
  const std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

inline std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

// ---------------------------------------------------------------------------

inline int cmd_lambda(const Common& c, std::ostream& out) {
  const ModelParams p = resolve_params(c, 0.6, 0.3, 2.5);
  if (p.is_noiseless()) throw UsageError("Lambda requires eps > 0");
  if (!p.noise_subcritical()) {
    const std::string regime = p.epsilon_sq() == 2.0 ? "critical" : "total_extinction";
    const std::string msg = "Lambda undefined for eps^2 >= 2; regime: " + regime;
    if (c.json) {
      out << json{{"lambda", nullptr}, {"regime", regime}, {"error", msg},
                  {"params", params_json(p)}}
                 .dump(2)
          << '\n';
      return 2;
    }
    throw UsageError(msg);
  }
  const auto rep = classify_regime(p);
  if (c.json) {
    out << json{{"lambda", *rep.lambda}, {"regime", to_string(rep.regime)},
                {"params", params_json(p)}}
               .dump(2)
        << '\n';
  } else {
    out << "Lambda(eps=" << p.epsilon() << ", alpha=" << p.alpha() << ", kappa=" << p.kappa()
        << ") = " << fixed(*rep.lambda, 10) << '\n'
        << "regime: " << to_string(rep.regime) << '\n';
  }
  return 0;
}

inline int cmd_classify(const Common& c, double tol, std::ostream& out) {
  const ModelParams p = resolve_params(c, 0.6, 0.3, 2.5);
  if (p.is_noiseless()) throw UsageError("classify requires eps > 0");
  const auto rep = classify_regime(p, tol);
  const auto det = deterministic_regime(p);
  json j = to_json(rep);
  j["params"] = params_json(p);
  j["alpha_admissible"] = p.alpha_admissible();
  j["deterministic"] = {{"tag", to_string(det.tag)},
                        {"equilibrium", det.equilibrium ? to_json(*det.equilibrium) : json()}};
  if (c.json) {
    out << j.dump(2) << '\n';
    return 0;
  }
  out << "regime: " << to_string(rep.regime) << '\n';
  if (rep.lambda) out << "lambda: " << fixed(*rep.lambda, 10) << '\n';
  for (const auto& b : rep.rate_bounds) {
    out << "rate bound: " << b.quantity << " <= " << fixed(b.bound, 10)
        << (b.exact ? " (exact)" : "") << '\n';
  }
  out << "deterministic: " << to_string(det.tag);
  if (det.equilibrium) {
    out << ", equilibrium (" << fixed(det.equilibrium->x1) << ", " << fixed(det.equilibrium->x2)
        << ")";
  }
  out << '\n';
  if (!p.alpha_admissible()) out << "warning: alpha >= 1\n";
  return 0;
}

struct SimulateOpts {
  std::string out = "trajectory.csv";
  std::string det_out;
  bool overlay = false;
  std::size_t stride = 1;
  std::string plot;
};

inline std::string trajectory_plot(const std::string& csv, const std::string& det_csv) {
  std::ostringstream gp;
  gp << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set xlabel 'x1 (prey)'\nset ylabel 'x2 (predator)'\n"
     << "plot '" << csv << "' using 2:3 with lines lc rgb 'black' title 'stochastic'";
  if (!det_csv.empty()) {
    gp << ", \\\n     '" << det_csv << "' using 2:3 with lines lc rgb 'red' title 'deterministic'";
  }
  gp << "\npause -1\n";
  return gp.str();
}

inline int cmd_simulate(const Common& c, const SimulateOpts& o, std::ostream& out) {
  const ModelParams p = resolve_params(c, 0.6, 0.3, 2.5);
  const State2 x0(c.x1.value_or(0.75), c.x2.value_or(1.25));
  const double horizon = c.horizon.value_or(50.0);
  const Scheme scheme = parse_scheme(c.scheme);
  if (o.stride == 0) throw UsageError("--stride must be >= 1");
  const json config = {{"command", "simulate"},       {"params", params_json(p)},
                       {"x0", to_json(x0)},           {"dt", c.dt},
                       {"horizon", horizon},          {"scheme", to_string(scheme)},
                       {"seed", c.seed},              {"stride", o.stride}};
  const auto meta = make_meta(config);
  const auto path = brownian_path(c.seed, c.dt, steps_for(horizon, c.dt));
  const auto tr = simulate_em(p, x0, path, {scheme, o.stride});
  std::ostringstream csv;
  write_trajectory_csv(csv, tr, meta);
  write_file(o.out, csv.str());

  json j = {{"config", config},  {"config_hash", meta.hash}, {"output", o.out},
            {"rows", tr.size()}, {"diverged", tr.diverged},  {"final", to_json(tr.states.back())}};
  std::string det_path;
  if (o.overlay) {
    det_path = o.det_out.empty() ? stem_with(o.out, "_deterministic") : o.det_out;
    const auto det = simulate_em(p.with_epsilon(0.0), x0, BrownianPath::zero(c.dt, path.size()),
                                 {Scheme::Plain, o.stride});
    std::ostringstream dcsv;
    write_trajectory_csv(dcsv, det, meta);
    write_file(det_path, dcsv.str());
    j["deterministic_output"] = det_path;
    j["deterministic_final"] = to_json(det.states.back());
  }
  if (!o.plot.empty()) {
    write_file(o.plot, trajectory_plot(o.out, det_path));
    j["plot"] = o.plot;
  }
  if (c.json) {
    out << j.dump(2) << '\n';
  } else {
    out << "wrote " << tr.size() << " rows to " << o.out << " (config " << meta.hash << ")\n";
    if (!det_path.empty()) out << "deterministic overlay: " << det_path << '\n';
    out << "final state: (" << fixed(tr.states.back().x1) << ", " << fixed(tr.states.back().x2)
        << ")" << (tr.diverged ? " [diverged]" : "") << '\n';
  }
  return 0;
}

inline int cmd_logistic(const Common& c, double z0, const std::string& path_out,
                        std::ostream& out) {
  const ModelParams p = resolve_params(c, 0.6, 0.3, 2.5);
  const double horizon = c.horizon.value_or(50.0);
  const Scheme scheme = parse_scheme(c.scheme);
  const json config = {{"command", "logistic"}, {"params", params_json(p)}, {"z0", z0},
                       {"dt", c.dt},            {"horizon", horizon},       {"scheme", to_string(scheme)},
                       {"seed", c.seed}};
  const auto meta = make_meta(config);
  const auto path = brownian_path(c.seed, c.dt, steps_for(horizon, c.dt));
  const auto em = simulate_logistic_em(p, z0, path, scheme);
  const auto ex = exact_logistic(p, z0, path);
  std::ostringstream csv;
  write_meta(csv, meta);
  full_precision(csv);
  csv << "t,z_em,z_exact\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < em.size(); ++i) {
    csv << em.times[i] << ',' << em.values[i] << ',' << ex.values[i] << '\n';
    worst = std::max(worst, std::fabs(em.values[i] - ex.values[i]));
  }
  write_file(path_out, csv.str());
  const json j = {{"config", config},          {"config_hash", meta.hash},
                  {"output", path_out},        {"rows", em.size()},
                  {"final_em", em.values.back()}, {"final_exact", ex.values.back()},
                  {"max_abs_diff", worst},     {"diverged", em.diverged}};
  if (c.json) {
    out << j.dump(2) << '\n';
  } else {
    out << "wrote " << em.size() << " rows to " << path_out << "\n"
        << "z(T): em " << fixed(em.values.back()) << ", exact " << fixed(ex.values.back())
        << ", max |diff| " << fixed(worst, 3) << '\n';
  }
  return 0;
}

struct OccupationOpts {
  std::size_t seeds = 4;
  std::vector<std::uint64_t> seed_list;
  bool seed_list_given = false;
  double burn_in = 1e3;
  std::string out = "occupation.csv";
  double compact_lo = 0.05;
  double compact_hi = 20.0;
};

inline int cmd_occupation(const Common& c, const OccupationOpts& o, std::ostream& out) {
  const ModelParams p = resolve_params(c, 0.6, 0.9, 2.5);
  const State2 x0(c.x1.value_or(0.75), c.x2.value_or(1.25));
  const double horizon = c.horizon.value_or(1e4);
  const Scheme scheme = parse_scheme(c.scheme);
  std::vector<std::uint64_t> seeds = o.seed_list;
  if (!o.seed_list_given) {
    for (std::size_t i = 0; i < o.seeds; ++i) seeds.push_back(c.seed + i);
  }
  if (seeds.empty()) throw UsageError("occupation needs at least one seed");
  if (!(o.burn_in >= 0.0) || !(o.burn_in < horizon)) {
    throw UsageError("--burn-in must lie in [0, horizon)");
  }
  const json config = {{"command", "occupation"}, {"params", params_json(p)},
                       {"x0", to_json(x0)},       {"dt", c.dt},
                       {"horizon", horizon},      {"burn_in", o.burn_in},
                       {"scheme", to_string(scheme)}, {"seeds", seeds}};
  const auto meta = make_meta(config);
  const auto hists = parallel_map(seeds.size(), c.threads, [&](std::size_t i) {
    OccupationHistogram h;
    const auto path = brownian_path(seeds[i], c.dt, steps_for(horizon, c.dt));
    accumulate_run(h, p, x0, path, scheme, o.burn_in);
    return h;
  });
  OccupationHistogram hist;
  for (const auto& h : hists) hist.merge(h);
  std::ostringstream csv;
  write_histogram_csv(csv, hist, meta);
  write_file(o.out, csv.str());

  const double inf = std::numeric_limits<double>::infinity();
  json diag = {
      {"total_time", hist.total_time()},
      {"overflow_time", hist.overflow_time()},
      {"overflow_visits", hist.overflow_visits()},
      {"compact", {o.compact_lo, o.compact_hi}},
      {"compact_mass",
       fraction_in(hist, {Rect{o.compact_lo, o.compact_hi, o.compact_lo, o.compact_hi}})},
      {"predator_mass_above_0.05", fraction_in(hist, {Rect{0.0, inf, 0.05, inf}})},
  };
  if (!p.is_noiseless() && p.noise_subcritical()) {
    const GammaStationary g(p);
    diag["ks_to_gamma"] = ks_to_gamma_marginal(hist, g);
    diag["grid_tv_to_gamma"] = grid_tv_to_gamma_marginal(hist, g);
    diag["regime"] = to_string(classify_regime(p).regime);
  }
  const json j = {{"config", config}, {"config_hash", meta.hash}, {"output", o.out},
                  {"diagnostics", diag}};
  if (c.json) {
    out << j.dump(2) << '\n';
  } else {
    out << "wrote histogram to " << o.out << " (" << seeds.size() << " runs, config "
        << meta.hash << ")\n";
    for (const auto& [k, v] : diag.items()) out << k << ": " << v.dump() << '\n';
  }
  return 0;
}

struct PhaseOpts {
  std::string sweep = "eps-kappa";
  std::optional<double> fixed;
  std::optional<double> p1_min, p1_max;
  std::size_t p1_n = 32;
  double p2_min = 0.5;
  double p2_max = 10.0;
  std::size_t p2_n = 32;
  std::string out = "phase.csv";
  std::string plot;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw UsageError("grid needs at least one point per axis");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1);
  }
  return v;
}

inline int cmd_phase(const Common& c, const PhaseOpts& o, std::ostream& out) {
  const bool eps_sweep = o.sweep == "eps-kappa";
  if (!eps_sweep && o.sweep != "alpha-kappa") {
    throw UsageError("--sweep must be eps-kappa or alpha-kappa");
  }
  const double fixed_value = o.fixed.value_or(eps_sweep ? 0.5 : 0.6);
  const auto p1 = linspace(o.p1_min.value_or(eps_sweep ? 0.05 : 0.05),
                           o.p1_max.value_or(eps_sweep ? 1.6 : 0.95), o.p1_n);
  const auto p2 = linspace(o.p2_min, o.p2_max, o.p2_n);
  struct Cell {
    std::optional<double> lambda;
    std::string regime;
  };
  const auto cells = parallel_map(p1.size() * p2.size(), c.threads, [&](std::size_t idx) {
    const double a = p1[idx / p2.size()];
    const double k = p2[idx % p2.size()];
    const ModelParams p = eps_sweep ? ModelParams(a, fixed_value, k) : ModelParams(fixed_value, a, k);
    const auto rep = classify_regime(p);
    return Cell{rep.lambda, to_string(rep.regime)};
  });
  const json config = {{"command", "phase"}, {"sweep", o.sweep}, {"fixed", fixed_value},
                       {"p1", p1},           {"p2", p2}};
  const auto meta = make_meta(
      config, {eps_sweep ? "p1=epsilon p2=kappa alpha=" + fixed(fixed_value)
                         : "p1=alpha p2=kappa epsilon=" + fixed(fixed_value)});
  std::ostringstream csv;
  write_meta(csv, meta);
  full_precision(csv);
  csv << "p1,p2,lambda,regime\n";
  std::map<std::string, int> counts;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    csv << p1[i / p2.size()] << ',' << p2[i % p2.size()] << ',';
    if (cells[i].lambda) csv << *cells[i].lambda;
    csv << ',' << cells[i].regime << '\n';
    ++counts[cells[i].regime];
  }
  write_file(o.out, csv.str());
  if (!o.plot.empty()) {
    std::ostringstream gp;
    gp << "set datafile separator ','\n"
       << "set xlabel '" << (eps_sweep ? "epsilon" : "alpha") << "'\nset ylabel 'kappa'\n"
       << "set view map\nset contour base\nset cntrparam levels discrete 0\n"
       << "set dgrid3d " << p2.size() << "," << p1.size() << "\n"
       << "splot '" << o.out << "' using 1:2:3 every ::1 with pm3d notitle\n"
       << "pause -1\n";
    write_file(o.plot, gp.str());
  }
  json j = {{"config", config}, {"config_hash", meta.hash}, {"output", o.out},
            {"cells", cells.size()}, {"regime_counts", counts}};
  if (cells.size() == 1 && cells[0].lambda) j["lambda"] = *cells[0].lambda;
  if (c.json) {
    out << j.dump(2) << '\n';
  } else {
    out << "wrote " << cells.size() << " cells to " << o.out << '\n';
    for (const auto& [k, v] : counts) out << k << ": " << v << '\n';
    if (cells.size() == 1 && cells[0].lambda) out << "lambda: " << fixed(*cells[0].lambda, 10) << '\n';
  }
  return 0;
}

struct ReachOpts {
  double z1 = 1.0;
  double z2 = 2.0;
  std::optional<double> vstar;
  double r0 = 0.15;
  double r_z = 0.15;
  double R = 10.0;
  double ode_dt = 1e-3;
  std::size_t count = 0;
  std::string out = "reach.csv";
  std::string plan = "reach_plan.json";
  std::string plot;
};

inline int cmd_reach(const Common& c, const ReachOpts& o, std::ostream& out) {
  const ModelParams p = resolve_params(c, 0.6, 0.3, 0.5);
  const double x1 = c.x1.value_or(0.3);
  const double x2 = c.x2.value_or(0.3);
  if (!(x1 > 0.0 && x2 > 0.0 && o.z1 > 0.0 && o.z2 > 0.0)) {
    throw UsageError("reach needs x and z strictly inside the positive quadrant");
  }
  ReachOptions ro;
  ro.r0 = o.r0;
  ro.r_z = o.r_z;
  ro.R = o.R;
  ro.ode_dt = o.ode_dt;
  ro.vstar = o.vstar;

  if (o.count > 0) {
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    std::vector<std::pair<State2, State2>> pairs;
    for (std::size_t i = 0; i < o.count; ++i) pairs.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
    const auto results = parallel_map(pairs.size(), c.threads, [&](std::size_t i) {
      const auto r = reach(p, pairs[i].first, pairs[i].second, ro);
      json rec = to_json(r);
      rec["x"] = to_json(pairs[i].first);
      rec["z"] = to_json(pairs[i].second);
      rec["invariants_ok"] = check_reach_invariants(p, r).ok();
      return rec;
    });
    std::size_t ok = 0;
    for (const auto& r : results) ok += r["success"].get<bool>() && r["invariants_ok"].get<bool>();
    const json j = {{"params", params_json(p)}, {"count", o.count}, {"successes", ok},
                    {"runs", results}};
    if (c.json) {
      out << j.dump(2) << '\n';
    } else {
      out << ok << "/" << o.count << " success\n";
    }
    return ok == o.count ? 0 : 1;
  }

  const State2 x(x1, x2), z(o.z1, o.z2);
  const auto r = reach(p, x, z, ro);
  const auto inv = check_reach_invariants(p, r);
  const json config = {{"command", "reach"}, {"params", params_json(p)}, {"x", to_json(x)},
                       {"z", to_json(z)},    {"r0", o.r0},               {"r_z", o.r_z},
                       {"R", o.R},           {"ode_dt", o.ode_dt},
                       {"vstar", o.vstar ? json(*o.vstar) : json()}};
  const auto meta = make_meta(config);
  std::ostringstream csv;
  write_trajectory_csv(csv, r.trajectory, meta);
  write_file(o.out, csv.str());
  json plan = to_json(r);
  plan["config"] = config;
  plan["config_hash"] = meta.hash;
  plan["invariants"] = {{"phase1_monotone", inv.phase1_monotone},
                        {"phase2_geometry", inv.phase2_geometry},
                        {"parabola_sign", inv.parabola_sign},
                        {"positivity", inv.positivity}};
  plan["vertex"] = to_json(parabola_vertex(p, r.vstar));
  plan["nullcline_x1"] = predator_nullcline(p);
  write_file(o.plan, plan.dump(2) + "\n");
  if (!o.plot.empty()) {
    std::ostringstream gp;
    gp << "set datafile separator ','\nset key autotitle columnhead\n"
       << "set xlabel 'x1'\nset ylabel 'x2'\n"
       << "P(x) = (1 + " << r.vstar << " - x/" << p.kappa() << ")*(1 + x)\n"
       << "set arrow from " << predator_nullcline(p) << ", graph 0 to " << predator_nullcline(p)
       << ", graph 1 nohead dt 2 lc rgb 'blue'\n"
       << "set object circle at " << z.x1 << "," << z.x2 << " size " << o.r_z << "\n"
       << "plot '" << o.out << "' using 2:3 with lines lc rgb 'orange' title 'control path', "
       << "P(x) lc rgb 'blue' title 'P_v*'\npause -1\n";
    write_file(o.plot, gp.str());
  }
  if (c.json) {
    out << plan.dump(2) << '\n';
  } else {
    out << (r.success ? "success" : "failure") << ": v*=" << fixed(r.vstar) << " R=" << r.R
        << " r0=" << r.r0 << ", " << r.trajectory.size() << " points\n";
    for (std::size_t i = 0; i < 3; ++i) {
      out << "phase " << i + 1 << ": v=" << fixed(r.phases[i].v) << " t=[" << fixed(r.phases[i].t_start)
          << ", " << fixed(r.phases[i].t_end) << "] "
          << (r.phases[i].predicate_met ? "met" : "not met") << '\n';
    }
    if (!r.success) out << "diagnostic: " << r.diagnostic << '\n';
    out << "invariants: " << (inv.ok() ? "ok" : "violated") << '\n';
  }
  return r.success && inv.ok() ? 0 : 1;
}

struct CertifyOpts {
  std::string what = "all";
  std::optional<double> theta;
  double n = 3.0;
  double x_max = 50.0;
  int points = 96;
};

inline int cmd_certify(const Common& c, const CertifyOpts& o, std::ostream& out) {
  const ModelParams p = resolve_params(c, 0.6, 0.3, 2.5);
  if (p.is_noiseless()) throw UsageError("certify requires eps > 0");
  const std::vector<std::string> known = {"all", "exp", "poly", "hormander", "hofbauer",
                                          "exponents"};
  if (std::find(known.begin(), known.end(), o.what) == known.end()) {
    throw UsageError("--what must be one of all, exp, poly, hormander, hofbauer, exponents");
  }
  auto want = [&](const char* k) { return o.what == "all" || o.what == k; };
  SampleSpec spec;
  spec.x_max = o.x_max;
  spec.points = o.points;
  json j = {{"params", params_json(p)}};
  if (want("exp")) {
    const double theta = o.theta.value_or(0.5 * exp_theta_star(p));
    j["lyapunov_exponential"] = to_json(lyapunov_exp_check(p, theta, spec));
  }
  if (want("poly")) j["lyapunov_polynomial"] = to_json(lyapunov_poly_check(p, o.n, 0.0, spec));
  if (want("hormander")) {
    const State2 s(c.x1.value_or(1.0), c.x2.value_or(1.0));
    j["hormander"] = {{"point", to_json(s)},
                      {"det", hormander_det(p, s)},
                      {"det_numeric", hormander_det_numeric(p, s)}};
  }
  if (want("hofbauer")) {
    const auto w = hofbauer_weights(p);
    j["hofbauer"] = w ? to_json(*w) : json();
  }
  if (want("exponents")) {
    try {
      j["rate_exponents"] = to_json(rate_exponents(p, o.n));
    } catch (const std::domain_error& e) {
      j["rate_exponents"] = {{"error", e.what()}};
    }
  }
  if (c.json) {
    out << j.dump(2) << '\n';
    return 0;
  }
  for (const auto& [k, v] : j.items()) {
    if (k == "params") continue;
    out << k << ":\n";
    if (v.is_object()) {
      for (const auto& [kk, vv] : v.items()) {
        if (kk == "checks") {
          for (const auto& chk : vv) {
            out << "  check " << chk["name"].get<std::string>() << ": "
                << (chk["passed"].get<bool>() ? "pass" : "FAIL") << '\n';
          }
        } else {
          out << "  " << kk << ": " << vv.dump() << '\n';
        }
      }
    } else {
      out << "  none\n";
    }
  }
  return 0;
}

inline int cmd_validate(const Common& c, const std::string& level, double lambda_offset,
                        std::ostream& out) {
  AcceptanceContext ctx;
  ctx.threads = c.threads;
  if (lambda_offset != 0.0) {
    ctx.lambda = [lambda_offset](const ModelParams& p) {
      return lambda_invasion(p) + lambda_offset;
    };
  }
  const auto lvl = parse_level(level);
  const auto results = run_acceptance(lvl, ctx, c.json ? nullptr : &out);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed;
  if (c.json) {
    json arr = json::array();
    for (const auto& r : results) {
      arr.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed},
                     {"measured", r.measured}, {"seconds", r.seconds}});
    }
    out << json{{"level", level}, {"passed", passed}, {"total", results.size()},
                {"criteria", arr}}
               .dump(2)
        << '\n';
  } else {
    out << passed << "/" << results.size() << " criteria passed\n";
  }
  return passed == results.size() ? 0 : 1;
}

// ---------------------------------------------------------------------------

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic Rosenzweig-MacArthur toolkit"};
  app.set_config("--config", "", "TOML-style key = value file; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  Common c;
  app.add_option("--eps", c.eps, "noise intensity epsilon (0 for the deterministic system)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--alpha", c.alpha, "predator mortality alpha")->check(CLI::PositiveNumber);
  app.add_option("--kappa", c.kappa, "prey carrying capacity kappa")->check(CLI::PositiveNumber);
  app.add_option("--x1", c.x1, "initial prey density")->check(CLI::NonNegativeNumber);
  app.add_option("--x2", c.x2, "initial predator density")->check(CLI::NonNegativeNumber);
  app.add_option("--horizon,-T", c.horizon, "time horizon")->check(CLI::PositiveNumber);
  app.add_option("--dt", c.dt, "time step")->check(CLI::PositiveNumber);
  app.add_option("--scheme", c.scheme, "logspace or plain")
      ->check(CLI::IsMember({"logspace", "log", "plain"}));
  app.add_option("--seed", c.seed, "base seed")->envname("RMKIT_SEED");
  app.add_option("--threads", c.threads, "worker threads (0: all cores)");
  app.add_flag("--json", c.json, "machine-readable output");

  std::function<int()> action;

  auto* lam = app.add_subcommand("lambda", "invasion rate Lambda and regime");
  lam->callback([&] { action = [&] { return cmd_lambda(c, out); }; });

  double tol = kCriticalBand;
  auto* cls = app.add_subcommand("classify", "regime report with rate bounds");
  cls->add_option("--tol", tol, "critical band for |Lambda|");
  cls->callback([&] { action = [&] { return cmd_classify(c, tol, out); }; });

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "Euler-Maruyama trajectory to CSV");
  sim->add_option("--out,-o", so.out, "trajectory CSV");
  sim->add_flag("--overlay-deterministic", so.overlay, "also write the eps = 0 path");
  sim->add_option("--deterministic-out", so.det_out, "overlay CSV (default <out>_deterministic)");
  sim->add_option("--stride", so.stride, "keep every k-th grid point");
  sim->add_option("--plot", so.plot, "write a gnuplot script");
  sim->callback([&] { action = [&] { return cmd_simulate(c, so, out); }; });

  double z0 = 1.0;
  std::string logistic_out = "logistic.csv";
  auto* lg = app.add_subcommand("logistic", "1-D logistic SDE: Euler-Maruyama vs closed form");
  lg->add_option("--z0", z0, "initial density")->check(CLI::NonNegativeNumber);
  lg->add_option("--out,-o", logistic_out, "CSV path");
  lg->callback([&] { action = [&] { return cmd_logistic(c, z0, logistic_out, out); }; });

  OccupationOpts oo;
  std::string seed_list;
  auto* occ = app.add_subcommand("occupation", "occupation histogram and diagnostics");
  occ->add_option("--seeds", oo.seeds, "number of runs (seeds seed, seed+1, ...)");
  auto* seed_list_opt = occ->add_option("--seed-list", seed_list, "comma-separated seeds");
  occ->add_option("--burn-in", oo.burn_in, "discarded prefix");
  occ->add_option("--out,-o", oo.out, "histogram CSV");
  occ->add_option("--compact-lo", oo.compact_lo, "compact box lower edge");
  occ->add_option("--compact-hi", oo.compact_hi, "compact box upper edge");
  occ->callback([&] {
    action = [&, seed_list_opt] {
      if (seed_list_opt->count() > 0) {
        oo.seed_list_given = true;
        std::stringstream ss(seed_list);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (item.empty()) continue;
          oo.seed_list.push_back(std::stoull(item));
        }
      }
      return cmd_occupation(c, oo, out);
    };
  });

  PhaseOpts po;
  auto* ph = app.add_subcommand("phase", "Lambda over a parameter grid");
  ph->add_option("--sweep", po.sweep, "eps-kappa (alpha fixed) or alpha-kappa (eps fixed)")
      ->check(CLI::IsMember({"eps-kappa", "alpha-kappa"}));
  ph->add_option("--fixed", po.fixed, "value of the fixed parameter");
  ph->add_option("--p1-min", po.p1_min, "first axis lower end");
  ph->add_option("--p1-max", po.p1_max, "first axis upper end");
  ph->add_option("--p1-n", po.p1_n, "first axis points");
  ph->add_option("--p2-min", po.p2_min, "kappa lower end");
  ph->add_option("--p2-max", po.p2_max, "kappa upper end");
  ph->add_option("--p2-n", po.p2_n, "kappa points");
  ph->add_option("--out,-o", po.out, "grid CSV");
  ph->add_option("--plot", po.plot, "write a gnuplot script");
  ph->callback([&] { action = [&] { return cmd_phase(c, po, out); }; });

  ReachOpts ro;
  auto* rc = app.add_subcommand("reach", "three-phase control from x to a ball around z");
  rc->add_option("--z1", ro.z1, "target prey density");
  rc->add_option("--z2", ro.z2, "target predator density");
  rc->add_option("--vstar", ro.vstar, "phase-2 control (auto when absent)");
  rc->add_option("--r0", ro.r0, "radius of the ball at the origin");
  rc->add_option("--rz", ro.r_z, "radius of the target ball");
  rc->add_option("--R", ro.R, "initial phase-3 control magnitude");
  rc->add_option("--ode-dt", ro.ode_dt, "RK4 step");
  rc->add_option("--count", ro.count, "random (x, z) pairs in [0.1, 3]^2 instead of one run");
  rc->add_option("--out,-o", ro.out, "trajectory CSV");
  rc->add_option("--plan", ro.plan, "plan JSON");
  rc->add_option("--plot", ro.plot, "write a gnuplot script");
  rc->callback([&] { action = [&] { return cmd_reach(c, ro, out); }; });

  CertifyOpts co;
  auto* cert = app.add_subcommand("certify", "Lyapunov, Hoermander, Hofbauer and rate reports");
  cert->add_option("--what", co.what, "all, exp, poly, hormander, hofbauer or exponents");
  cert->add_option("--theta", co.theta, "exponential Lyapunov parameter (default theta*/2)");
  cert->add_option("--n", co.n, "polynomial degree");
  cert->add_option("--x-max", co.x_max, "sampling box edge");
  cert->add_option("--points", co.points, "samples per axis");
  cert->callback([&] { action = [&] { return cmd_certify(c, co, out); }; });

  std::string level = "fast";
  double lambda_offset = 0.0;
  auto* val = app.add_subcommand("validate", "run the acceptance suite");
  val->add_option("--level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  val->add_option("--lambda-offset", lambda_offset,
                  "test fixture: shift every Lambda evaluation by this amount");
  val->callback([&] { action = [&] { return cmd_validate(c, level, lambda_offset, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    return action ? action() : 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace rmkit::cli
