#pragma once

// JSON and CSV emission for library results. Every file carries the schema
// version; numbers use the shortest round-trip representation.

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdclt/config.hpp"
#include "hdclt/constants.hpp"
#include "hdclt/empproc.hpp"
#include "hdclt/experiments.hpp"
#include "hdclt/gaussmax.hpp"
#include "hdclt/posi.hpp"
#include "hdclt/randvec.hpp"
#include "hdclt/smoothmax.hpp"

namespace hdclt::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Non-finite values become strings ("inf", "-inf", "nan"), which JSON lacks.
inline json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

inline json to_json(const std::map<std::string, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = number(v);
  return j;
}

inline json to_json(const std::map<double, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[format_double(k)] = number(v);
  return j;
}

inline json to_json(const std::vector<double>& v) {
  json j = json::array();
  for (double x : v) j.push_back(number(x));
  return j;
}

inline json to_json(const constants::RateBundle& b) {
  json terms = json::array();
  for (const auto& t : b.terms) terms.push_back({{"name", t.name}, {"value", number(t.value)}, {"formula", t.formula}});
  json j = {{"theorem", constants::to_string(b.theorem)},
            {"terms", terms},
            {"total", number(b.total)},
            {"vacuous", b.vacuous},
            {"inputs_echo", to_json(b.inputs_echo)}};
  if (!b.variant.empty()) j["variant"] = b.variant;
  if (!b.derived.empty()) j["derived"] = to_json(b.derived);
  if (b.validity.checked)
    j["validity"] = {{"ok", b.validity.ok}, {"note", b.validity.note}};
  return j;
}

inline json to_json(const constants::ConstantBundle& c) {
  json j = {{"mu", number(c.mu)},
            {"sigma_min", number(c.sigma_min)},
            {"sigma_max", number(c.sigma_max)},
            {"phi0", number(c.phi0)},
            {"phi1", number(c.phi1)},
            {"phi2", number(c.phi2)},
            {"phi3", number(c.phi3)},
            {"phi4", number(c.phi4)},
            {"phi_ac", to_json(c.phi_ac)},
            {"theta_policy", constants::to_string(c.theta_policy)}};
  return j;
}

inline json to_json(const gaussmax::GaussianMaxSummary& s) {
  return {{"median_mu", number(s.median_mu)},
          {"mu_ci", {number(s.mu_ci.first), number(s.mu_ci.second)}},
          {"sigma_min", number(s.sigma_min)},
          {"sigma_max", number(s.sigma_max)},
          {"reps", s.reps},
          {"method", gaussmax::to_string(s.method)}};
}

inline json to_json(const randvec::PseudoMomentReport& r) {
  return {{"n", number(r.n)},
          {"mu", number(r.mu)},
          {"sigma_max", number(r.sigma_max)},
          {"L_n", number(r.L_n)},
          {"phi", number(r.phi)},
          {"M_n_of_phi", number(r.M_n_of_phi)},
          {"Lbar_n0", number(r.Lbar_n0)},
          {"Lbar_nm", to_json(r.Lbar_nm)},
          {"nu_q", to_json(r.nu_q)},
          {"method", randvec::to_string(r.method)},
          {"mc_se", number(r.mc_se)}};
}

inline json to_json(const experiments::DeltaEstimate& e) {
  return {{"m", number(e.m)},
          {"n", e.n},
          {"p", e.p},
          {"reps", e.reps},
          {"delta_hat", number(e.delta_hat)},
          {"argmax_r", number(e.argmax_r)},
          {"se_at_argmax", number(e.se_at_argmax)},
          {"r_max", number(e.r_max)},
          {"truncation_bound", number(e.truncation_bound)},
          {"gaussian_exact", e.gaussian_exact},
          {"elements", e.elements},
          {"family", e.family_id},
          {"seed", e.seed},
          {"grid_points", e.grid.size()}};
}

inline json to_json(const experiments::Comparison& c) {
  return {{"theorem", c.theorem},
          {"estimate", number(c.estimate)},
          {"se", number(c.se)},
          {"bound", number(c.bound)},
          {"vacuous", c.vacuous},
          {"slack", number(c.slack)},
          {"pass", c.pass}};
}

inline json to_json(const experiments::CramerRatio& c) {
  return {{"resolvable", c.resolvable},
          {"ratio_hat", number(c.ratio_hat)},
          {"se", number(c.se)},
          {"tail_s", number(c.tail_s)},
          {"tail_u", number(c.tail_u)},
          {"denominator_exact", c.denominator_exact},
          {"note", c.note}};
}

inline json to_json(const experiments::MomentDiff& d) {
  return {{"diff_hat", number(d.diff_hat)},
          {"se", number(d.se)},
          {"moment_s", number(d.moment_s)},
          {"moment_u", number(d.moment_u)}};
}

inline json to_json(const posi::Kappa& k) {
  json j = {{"violated", k.violated}, {"offending_model", k.offending}, {"max_condition", number(k.max_condition)}};
  j["value"] = k.violated ? json("violated") : number(k.value);
  return j;
}

inline json to_json(const posi::PoSIResult& r) {
  return {{"k", r.k},
          {"n_models", r.n_models},
          {"n_statistics", r.n_statistics},
          {"mu_posi", number(r.mu_posi)},
          {"quantiles", to_json(r.quantile)},
          {"quantile_se", to_json(r.quantile_se)},
          {"kappa", to_json(r.kappa)},
          {"reps", r.reps},
          {"seed", r.seed}};
}

inline json to_json(const smoothmax::StabilityCertification& s) {
  return {{"pairs", s.pairs},
          {"checked", s.checked},
          {"skipped", s.skipped},
          {"violations", s.violations},
          {"max_excess", number(s.max_excess)},
          {"tolerance", number(s.tolerance)},
          {"pass", s.pass}};
}

/// Fixed-header CSV; the first line stamps the schema version.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  Csv& row(std::vector<std::string> cells) {
    if (cells.size() != header_.size())
      throw Error(ErrorKind::invalid_argument, "csv row has " + std::to_string(cells.size()) + " cells, header has " +
                                                   std::to_string(header_.size()));
    rows_.push_back(std::move(cells));
    return *this;
  }

  const std::vector<std::string>& header() const { return header_; }
  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string out = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
    out += join(header_);
    for (const auto& r : rows_) out += join(r);
    return out;
  }

  /// Rows as an array of objects keyed by header, for JSON output.
  json to_json() const {
    json arr = json::array();
    for (const auto& r : rows_) {
      json o = json::object();
      for (std::size_t i = 0; i < r.size(); ++i) o[header_[i]] = r[i];
      arr.push_back(o);
    }
    return arr;
  }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
    return s + "\n";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string cell(double x) { return format_double(x); }
inline std::string cell(bool b) { return b ? "true" : "false"; }
inline std::string cell(std::uint64_t x) { return std::to_string(x); }
inline std::string cell(const std::string& s) { return s; }

}  // namespace hdclt::io
