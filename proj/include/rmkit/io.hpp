#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ios>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rmkit/control.hpp"
#include "rmkit/integrate.hpp"
#include "rmkit/occupation.hpp"
#include "rmkit/persistence.hpp"

namespace rmkit {

using json = nlohmann::json;

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Hash of a config object; nlohmann::json keeps object keys sorted, so
/// the dump is canonical.
inline std::string config_hash(const json& config) { return hex64(fnv1a(config.dump())); }

/// Header comment lines written on top of every CSV.
struct CsvMeta {
  std::string hash;
  std::vector<std::string> notes;
};

inline CsvMeta make_meta(const json& config, std::vector<std::string> notes = {}) {
  return {config_hash(config), std::move(notes)};
}

inline void write_meta(std::ostream& os, const CsvMeta& meta) {
  if (!meta.hash.empty()) os << "# config_hash=" << meta.hash << '\n';
  for (const auto& n : meta.notes) os << "# " << n << '\n';
}

inline std::ostream& full_precision(std::ostream& os) {
  return os << std::setprecision(std::numeric_limits<double>::max_digits10);
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const CsvMeta& meta = {}) {
  write_meta(os, meta);
  full_precision(os);
  os << "t,x1,x2\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    os << tr.times[i] << ',' << tr.states[i].x1 << ',' << tr.states[i].x2 << '\n';
  }
}

inline void write_scalar_csv(std::ostream& os, const ScalarTrajectory& tr, const std::string& name,
                             const CsvMeta& meta = {}) {
  write_meta(os, meta);
  full_precision(os);
  os << "t," << name << '\n';
  for (std::size_t i = 0; i < tr.size(); ++i) os << tr.times[i] << ',' << tr.values[i] << '\n';
}

/// Non-empty bins only; the zero bin has lower edge 0 and the overflow
/// bin upper edge inf.
inline void write_histogram_csv(std::ostream& os, const OccupationHistogram& h,
                                const CsvMeta& meta = {}) {
  write_meta(os, meta);
  full_precision(os);
  os << "bin_x1_lo,bin_x1_hi,bin_x2_lo,bin_x2_hi,weight\n";
  const auto& a1 = h.x1_axis();
  const auto& a2 = h.x2_axis();
  for (std::size_t i = 0; i < a1.bins(); ++i) {
    for (std::size_t j = 0; j < a2.bins(); ++j) {
      const double w = h.weight(i, j);
      if (w == 0.0) continue;
      os << a1.lower(i) << ',' << a1.upper(i) << ',' << a2.lower(j) << ',' << a2.upper(j) << ','
         << w << '\n';
    }
  }
}

/// Writes `body` to `path` in binary mode (LF line endings on every
/// platform); throws if the file cannot be written.
inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << body;
  if (!f) throw std::runtime_error("write failed: " + path);
}

// JSON helpers. Non-finite doubles become null.

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const State2& s) { return json::array({num(s.x1), num(s.x2)}); }

inline json to_json(const ModelParams& p) {
  return {{"epsilon", p.epsilon()}, {"alpha", p.alpha()}, {"kappa", p.kappa()}};
}

inline json to_json(const RateBound& b) {
  return {{"quantity", b.quantity}, {"bound", num(b.bound)}, {"exact", b.exact}};
}

inline json to_json(const RegimeReport& r) {
  json bounds = json::array();
  for (const auto& b : r.rate_bounds) bounds.push_back(to_json(b));
  return {{"regime", to_string(r.regime)},
          {"lambda", r.lambda ? num(*r.lambda) : json(nullptr)},
          {"rate_bounds", bounds}};
}

inline json to_json(const CheckResult& c) {
  return {{"name", c.name},
          {"passed", c.passed},
          {"bound", num(c.bound)},
          {"witness", to_json(c.witness)},
          {"witness_value", num(c.witness_value)}};
}

inline json to_json(const LyapunovReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  json constants = json::object();
  for (const auto& [k, v] : r.constants) constants[k] = num(v);
  return {{"family", r.family.name()},
          {"parameter", r.family.param},
          {"a", num(r.a)},
          {"b", num(r.b)},
          {"c", r.c ? num(*r.c) : json(nullptr)},
          {"verified", r.verified},
          {"witness", to_json(r.witness)},
          {"witness_value", num(r.witness_value)},
          {"checks", checks},
          {"constants", constants}};
}

inline json to_json(const HofbauerWeights& w) {
  return {{"p1", w.p1}, {"p2", w.p2}, {"at_origin", num(w.at_origin)},
          {"at_prey_law", num(w.at_prey_law)}};
}

inline json to_json(const RateExponents& r) {
  return {{"n", r.n},
          {"a", r.a},
          {"c", r.c},
          {"q0", r.q0},
          {"q_max", r.q_max},
          {"split_branch", r.split_branch == RateBranch::Q0 ? "q0" : "shifted"},
          {"split_bound", r.split_bound},
          {"q", r.q},
          {"lambda_tv", r.lambda_tv},
          {"beta_range", json::array({r.beta_min, r.beta_max})},
          {"weight", r.weight}};
}

inline json to_json(const ReachResult& r) {
  json phases = json::array();
  for (const auto& ph : r.phases) {
    phases.push_back({{"v", ph.v},
                      {"t_start", ph.t_start},
                      {"t_end", ph.t_end},
                      {"predicate", ph.predicate},
                      {"predicate_met", ph.predicate_met}});
  }
  return {{"success", r.success},
          {"failed_phase", r.failed_phase},
          {"diagnostic", r.diagnostic},
          {"vstar", r.vstar},
          {"R", r.R},
          {"r0", r.r0},
          {"r_z", r.r_z},
          {"attempts", r.attempts},
          {"points", r.trajectory.size()},
          {"phases", phases}};
}

}  // namespace rmkit
