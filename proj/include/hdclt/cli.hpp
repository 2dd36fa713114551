#pragma once

// Batch runner behind the hdclt tool. A run is (subcommand, config); the
// config is resolved with every default written back, so the summary it
// emits can be fed to --config to reproduce the run exactly.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdclt/config.hpp"
#include "hdclt/constants.hpp"
#include "hdclt/empproc.hpp"
#include "hdclt/experiments.hpp"
#include "hdclt/gaussmax.hpp"
#include "hdclt/io.hpp"
#include "hdclt/posi.hpp"
#include "hdclt/randvec.hpp"
#include "hdclt/smoothmax.hpp"

namespace hdclt::cli {

using json = nlohmann::json;

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"constants",      "anticonc", "smoothmax-check",
                                                 "simulate-delta", "lindeberg", "large-dev",
                                                 "moments",        "posi",     "empproc"};
  return names;
}

struct RunOptions {
  unsigned workers = 1;  // never written to any output
  std::string format = "csv";
};

struct Artifacts {
  std::string subcommand;
  Config config;  // resolved
  json result = json::object();
  std::vector<std::string> warnings;
  std::optional<io::Csv> data;

  json summary(const RunOptions& opt) const {
    json cfg = json::object();
    for (const auto& [k, v] : config.values()) cfg[k] = v;
    json j = {{"schema_version", io::kSchemaVersion},
              {"subcommand", subcommand},
              {"config", cfg},
              {"result", result},
              {"warnings", warnings}};
    if (data && opt.format == "json") j["rows"] = data->to_json();
    return j;
  }
};

/// Reads key = value text, or the "config" object of an emitted summary.
inline Config load_config(const std::string& path) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot read config file '" + path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::config, "config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object())
      throw Error(ErrorKind::config, "JSON config '" + path + "' has no \"config\" object");
    Config c;
    for (const auto& [k, v] : j["config"].items()) c.set(k, v.is_string() ? v.get<std::string>() : v.dump());
    return c;
  }
  return Config::load(path);
}

/// Resolves keys against defaults, writing each default back into the
/// config and collecting every problem before reporting.
class Resolver {
 public:
  explicit Resolver(Config& c) : c_(c) {}

  double num(const std::string& key, double fallback) {
    used_.insert(key);
    try {
      const double v = c_.num(key, fallback);
      c_.set(key, v);
      return v;
    } catch (const Error& e) {
      errors_.push_back(e.what());
      return fallback;
    }
  }

  double positive(const std::string& key, double fallback) {
    const double v = num(key, fallback);
    if (!(v > 0.0)) errors_.push_back("config key '" + key + "' must be positive");
    return v;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    used_.insert(key);
    try {
      const auto v = c_.count(key, fallback);
      c_.set(key, std::to_string(v));
      return v;
    } catch (const Error& e) {
      errors_.push_back(e.what());
      return fallback;
    }
  }

  std::string str(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    const std::string v = c_.str(key, fallback);
    c_.set(key, v);
    return v;
  }

  std::string required(const std::string& key) {
    used_.insert(key);
    if (!c_.has(key)) {
      errors_.push_back("config key '" + key + "' is required");
      return {};
    }
    return c_.str(key);
  }

  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) {
    used_.insert(key);
    try {
      auto v = c_.list(key, fallback);
      c_.set(key, join_doubles(v));
      return v;
    } catch (const Error& e) {
      errors_.push_back(e.what());
      return fallback;
    }
  }

  void use(const std::string& key) { used_.insert(key); }
  void error(const std::string& msg) { errors_.push_back(msg); }
  bool ok() const { return errors_.empty(); }

  /// Throws one config error listing every problem, unknown keys included.
  void finish() {
    for (const auto& [k, v] : c_.values())
      if (!used_.count(k)) errors_.push_back("unknown config key '" + k + "'");
    if (errors_.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& e : errors_) msg += " " + e + ";";
    throw Error(ErrorKind::config, msg);
  }

 private:
  Config& c_;
  std::set<std::string> used_;
  std::vector<std::string> errors_;
};

namespace detail {

inline std::optional<randvec::DistributionFamily> resolve_family(Resolver& r, Config& c) {
  for (const char* k : {"family.base", "family.p", "family.cov.kind", "family.cov.params"}) r.use(k);
  r.str("family.base", "gaussian");
  const std::string kind = r.str("family.cov.kind", "diagonal");
  const auto params = r.list("family.cov.params", {1.0});
  std::uint64_t p_default = 4;
  if (kind == "diagonal" && params.size() > 1) p_default = params.size();
  if (kind == "dense") p_default = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(params.size()))));
  r.count("family.p", p_default);
  const std::string base = c.str("family.base");
  if (base == "subweibull") r.num("family.alpha", 1.0);
  if (base == "student_t") r.num("family.df", 5.0);
  r.use("family.alpha");
  r.use("family.df");
  if (!r.ok()) return std::nullopt;
  try {
    auto f = randvec::family_from_config(c);
    Config canon;
    randvec::family_to_config(f, canon);
    for (const auto& [k, v] : c.group("family")) c.erase("family." + k);
    for (const auto& [k, v] : canon.values()) c.set(k, v);
    return f;
  } catch (const Error& e) {
    r.error(e.what());
    return std::nullopt;
  }
}

inline constants::UniversalConstants resolve_constants(Resolver& r) {
  constants::UniversalConstants uc;
  uc.C0 = r.positive("C0", uc.C0);
  uc.frakC = r.num("frakC", uc.frakC);
  uc.slack = r.positive("slack", uc.slack);
  uc.theta = r.positive("theta", uc.theta);
  uc.theta_alpha = r.positive("theta_alpha", uc.theta_alpha);
  uc.theta_m = r.positive("theta_m", uc.theta_m);
  uc.theta_alpha_m = r.positive("theta_alpha_m", uc.theta_alpha_m);
  uc.theta1 = r.positive("theta1", uc.theta1);
  uc.theta2 = r.positive("theta2", uc.theta2);
  uc.theta_ac = r.positive("theta_ac", uc.theta_ac);
  uc.c_kappa = r.positive("c_kappa", uc.c_kappa);
  try {
    uc.theta_policy = constants::theta_policy_from_string(r.str("theta_policy", "numeric"));
  } catch (const Error& e) {
    r.error(e.what());
  }
  return uc;
}

inline std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = hdclt::detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct FamilyContext {
  randvec::DistributionFamily family;
  randvec::PseudoMoments moments;
  constants::ConstantBundle bundle;
};

inline FamilyContext family_context(const randvec::DistributionFamily& f, double n, double m,
                                    const constants::UniversalConstants& uc, std::uint64_t seed,
                                    std::size_t mu_reps, unsigned workers) {
  randvec::PseudoMomentOptions po;
  po.seed = seed;
  po.workers = workers;
  po.mc_reps = mu_reps;
  randvec::PseudoMoments pm(f, n, po);
  const auto& cov = f.covariance();
  std::vector<double> ms{0.0};
  if (m > 0.0) ms.push_back(m);
  auto bundle = constants::anticonc_constants(pm.mu(), cov.sigma_min(), cov.sigma_max(), ms, uc.theta_policy,
                                              uc.theta_ac);
  return {f, std::move(pm), bundle};
}

inline constants::RateBundle evaluate_theorem(const std::string& name, const FamilyContext& ctx, double n,
                                              double m, double tau, double r, double H, double beta,
                                              std::optional<double> r_nm, std::optional<double> tail_sup,
                                              const constants::UniversalConstants& uc) {
  using namespace constants;
  const auto& f = ctx.family;
  const double p = static_cast<double>(f.p());
  const auto pm = ctx.moments.inputs();
  const double phi0 = ctx.bundle.phi_ac_at(0.0);
  if (name == "T31") return rate_uniform_t31(pm, p, n, phi0, uc);
  if (name == "E32" || name == "APPA") return rate_finite_moment(pm, p, n, tau, phi0, uc);
  if (name == "P32") return rate_prop32(ctx.moments.nu(3.0), p, n, phi0, uc);
  if (name == "T33") return rate_optimal_t33(pm, p, n, tau, phi0, uc);
  if (name == "T34")
    return rate_nonuniform_t34(pm, p, n, m, r_nm.value_or(0.0), tail_sup, ctx.bundle.phi_ac_at(m), phi0, uc);
  if (name == "T35") return rate_nonuniform_t35(pm, p, n, m, tau, ctx.bundle.phi_ac_at(m), uc);
  if (name.rfind("C36", 0) == 0 || name.rfind("C37", 0) == 0) {
    SubWeibullInputs sw;
    sw.K_p = std::max(1.0, randvec::psi_norm_bound(f));
    sw.alpha = randvec::natural_alpha(f);
    sw.m = m;
    sw.sigma_max = f.covariance().sigma_max();
    sw.phi_ac0 = phi0;
    sw.phi_acm = ctx.bundle.phi_ac_at(m);
    return rate_subweibull(name == "C36" ? "C36b" : name == "C37" ? "C37r" : name, sw, pm, p, n, uc);
  }
  if (name == "RMK38") return moment_diff_bound(m, beta, ctx.moments.mu(), pm.L_n, p, n, uc);
  if (name == "T51") return cramer_constants({H, pm.L_n, r}, ctx.bundle, p, n, uc);
  if (name == "C52")
    return cramer_subweibull_c52(std::max(1.0, randvec::psi_norm_bound(f)), randvec::natural_alpha(f),
                                 ctx.moments.mu(), p, n, r, uc);
  throw Error(ErrorKind::config, "unknown theorem '" + name + "'");
}

inline void note_moments(Artifacts& a, const randvec::PseudoMoments& pm) {
  if (pm.method() == randvec::MomentMethod::monte_carlo)
    a.warnings.push_back("pseudo-moments use a Monte Carlo sample (non-diagonal covariance); mc_se = " +
                         format_double(pm.mc_se()));
}

// Subcommands -----------------------------------------------------------------

inline void run_constants(Artifacts& a, Config& c, const RunOptions& opt) {
  Resolver r(c);
  const auto seed = r.count("seed", 0);
  auto f = resolve_family(r, c);
  const auto uc = resolve_constants(r);
  const std::string theorem = r.str("theorem", "T31");
  const double n = r.positive("n", 1024);
  const double m = r.num("m", theorem == "T35" || theorem == "RMK38" || theorem == "T34" ? 1.0 : 0.0);
  const double tau = r.positive("tau", 1.0);
  const double rr = r.num("r", 1.0);
  const double H = r.positive("H", 1.0);
  const double beta = r.positive("beta", 1.0);
  const auto mu_reps = r.count("mu_reps", 100000);
  std::optional<double> r_nm, tail_sup;
  if (theorem == "T34") {
    r_nm = r.positive("r_nm", 1.0);
    if (c.has("tail_sup"))
      tail_sup = r.num("tail_sup", 0.0);
    else
      r.required("tail_sup");
  }
  if (theorem == "T35" && !(m >= 1.0 && tau >= m))
    r.error("T35 needs m >= 1 and tau >= m (got m = " + format_double(m) + ", tau = " + format_double(tau) + ")");
  r.finish();
  auto ctx = family_context(*f, n, m, uc, seed, mu_reps, opt.workers);
  note_moments(a, ctx.moments);
  const auto b = evaluate_theorem(theorem, ctx, n, m, tau, rr, H, beta, r_nm, tail_sup, uc);
  if (b.vacuous) a.warnings.push_back(theorem + " bound exceeds 1 (vacuous)");
  a.result = {{"rate_bundle", io::to_json(b)},
              {"constants", io::to_json(ctx.bundle)},
              {"pseudo_moments", io::to_json(ctx.moments.report(m, 1.0, {3.0, 2.0 + tau}))}};
  io::Csv csv({"term", "value", "formula"});
  for (const auto& t : b.terms) csv.row({t.name, io::cell(t.value), "\"" + t.formula + "\""});
  a.data = std::move(csv);
}

inline void run_anticonc(Artifacts& a, Config& c, const RunOptions& opt) {
  Resolver r(c);
  const auto seed = r.count("seed", 0);
  auto f = resolve_family(r, c);
  const auto uc = resolve_constants(r);
  const auto reps = r.count("reps", 100000);
  const auto m_list = r.list("m_list", {0.0, 1.0, 2.0});
  const auto eps_list = r.list("eps_list", {0.05, 0.1, 0.2});
  std::vector<double> grid;
  for (int i = 0; i <= 16; ++i) grid.push_back(0.25 * i);
  const auto r_grid = r.list("r_grid", grid);
  if (reps < 1000) r.error("config key 'reps' must be at least 1000");
  r.finish();
  const auto& cov = f->covariance();
  const auto summary = gaussmax::estimate_summary(cov, reps, seed, opt.workers);
  const auto bundle = constants::anticonc_constants(summary.median_mu, summary.sigma_min, summary.sigma_max, m_list,
                                                    uc.theta_policy, uc.theta_ac);
  const auto rows = gaussmax::check_anticoncentration(cov, bundle, m_list, eps_list, r_grid, reps, seed, opt.workers);
  const auto tails = gaussmax::check_tail_bounds(cov, summary, r_grid, eps_list, reps, seed, opt.workers);
  std::size_t violations = 0;
  io::Csv csv({"cov_id", "m", "eps", "r", "weighted_band", "se", "bound", "pass"});
  for (const auto& row : rows) {
    violations += !row.pass;
    csv.row({row.cov_id, io::cell(row.m), io::cell(row.eps), io::cell(row.r), io::cell(row.weighted_band),
             io::cell(row.se), io::cell(row.bound), io::cell(row.pass)});
  }
  a.result = {{"summary", io::to_json(summary)},
              {"constants", io::to_json(bundle)},
              {"anticonc_violations", violations},
              {"tail_violations", tails.violations},
              {"tail_excluded", tails.excluded}};
  a.data = std::move(csv);
}

inline void run_smoothmax(Artifacts& a, Config& c, const RunOptions& opt) {
  Resolver r(c);
  const auto seed = r.count("seed", 0);
  const auto uc = resolve_constants(r);
  const double rr = r.num("r", 1.0);
  const double eps = r.positive("eps", 0.5);
  const auto p = r.count("p", 4);
  const auto samples = r.count("samples", 1000);
  const auto pairs = r.count("pairs", 10000);
  if (p < 1) r.error("config key 'p' must be at least 1");
  if (samples < 100) r.error("config key 'samples' must be at least 100");
  if (pairs < 100) r.error("config key 'pairs' must be at least 100");
  r.finish();
  const smoothmax::SmoothMaxParams prm(rr, eps, p);
  const auto cert = smoothmax::certify_derivative_bounds(prm, uc.C0, samples, seed, uc.frakC, opt.workers);
  const auto stab = smoothmax::certify_stability(prm, uc.frakC, pairs, seed, opt.workers);
  io::Csv csv({"sample_id", "quantity", "observed", "bound", "pass"});
  for (const auto& row : cert.rows)
    csv.row({io::cell(static_cast<std::uint64_t>(row.sample_id)), row.quantity, io::cell(row.observed),
             io::cell(row.bound), io::cell(row.pass)});
  a.result = {{"beta", io::number(prm.beta)},
              {"required_c0",
               {{"first", io::number(cert.required_c0_first)},
                {"second", io::number(cert.required_c0_second)},
                {"third", io::number(cert.required_c0_third)},
                {"envelope", io::number(cert.required_c0_envelope)}}},
              {"derivative_pass", cert.pass},
              {"stability", io::to_json(stab)}};
  a.data = std::move(csv);
}

inline void run_simulate_delta(Artifacts& a, Config& c, const RunOptions& opt) {
  Resolver r(c);
  const auto seed = r.count("seed", 0);
  auto f = resolve_family(r, c);
  const auto uc = resolve_constants(r);
  const auto n = r.count("n", 1024);
  const double m = r.num("m", 0.0);
  const auto reps = r.count("reps", 100000);
  const std::string grid = r.str("grid", "pooled");
  const bool gaussian_mc = r.count("gaussian_mc", 0) != 0;
  const double tau = r.positive("tau", 1.0);
  const std::string compare = r.str("compare", m == 0.0 ? "T31, P32, T33" : "none");
  if (n < 1) r.error("config key 'n' must be at least 1");
  if (reps < 1000) r.error("config key 'reps' must be at least 1000");
  if (m < 0.0) r.error("config key 'm' must be nonnegative");
  experiments::DeltaOptions dopt;
  try {
    dopt.grid = experiments::grid_policy_from_string(grid);
  } catch (const Error& e) {
    r.error(e.what());
  }
  r.finish();
  dopt.gaussian_mc = gaussian_mc;
  dopt.workers = opt.workers;
  const auto est = experiments::estimate_delta(*f, n, m, reps, seed, dopt);
  a.result = {{"delta", io::to_json(est)}};
  const auto names = compare == "none" ? std::vector<std::string>{} : split_names(compare);
  if (!names.empty()) {
    auto ctx = family_context(*f, static_cast<double>(n), m, uc, seed, 100000, opt.workers);
    note_moments(a, ctx.moments);
    json cmp = json::array();
    for (const auto& name : names) {
      const auto b = evaluate_theorem(name, ctx, static_cast<double>(n), m, tau, 0.0, 1.0, 1.0, std::nullopt,
                                      std::nullopt, uc);
      const auto res = experiments::compare_bound(est, b);
      if (res.vacuous) a.warnings.push_back(name + " bound exceeds 1 (vacuous)");
      cmp.push_back(io::to_json(res));
    }
    a.result["comparisons"] = cmp;
  }
  io::Csv csv({"r", "cdf_s", "cdf_u", "weighted_diff"});
  for (const auto& g : est.grid)
    csv.row({io::cell(g.r), io::cell(g.cdf_s), io::cell(g.cdf_u), io::cell(g.weighted)});
  a.data = std::move(csv);
}

inline void run_lindeberg(Artifacts& a, Config& c, const RunOptions& opt) {
  Resolver r(c);
  const auto seed = r.count("seed", 0);
  auto f = resolve_family(r, c);
  resolve_constants(r);
  const auto n = r.count("n", 1024);
  const double rr = r.num("r", 2.0);
  const auto reps = r.count("reps", 100000);
  const double nd = static_cast<double>(n);
  const auto ks = r.list("k_list", {0.0, std::floor(nd / 4), std::floor(nd / 2), std::floor(3 * nd / 4), nd});
  std::vector<std::uint64_t> k_list;
  for (double k : ks) {
    if (!(k >= 0.0 && k <= nd && k == std::floor(k)))
      r.error("k_list entries must be integers in [0, n]");
    else
      k_list.push_back(static_cast<std::uint64_t>(k));
  }
  if (reps < 1000) r.error("config key 'reps' must be at least 1000");
  r.finish();
  const auto path = experiments::lindeberg_path(*f, n, k_list, rr, reps, seed, opt.workers);
  io::Csv csv({"k", "prob_k", "prob_ref", "estimate", "se"});
  double worst = 0.0;
  for (const auto& pt : path.deltas) {
    worst = std::max(worst, pt.estimate);
    csv.row({io::cell(pt.k), io::cell(pt.prob_k), io::cell(pt.prob_ref), io::cell(pt.estimate), io::cell(pt.se)});
  }
  a.result = {{"n", n}, {"r", io::number(rr)}, {"reps", reps}, {"max_delta", io::number(worst)}};
  a.data = std::move(csv);
}

inline void run_large_dev(Artifacts& a, Config& c, const RunOptions& opt) {
  Resolver r(c);
  const auto seed = r.count("seed", 0);
  auto f = resolve_family(r, c);
  const auto uc = resolve_constants(r);
  const auto n = r.count("n", 400);
  const auto reps = r.count("reps", 100000);
  const auto r_list = r.list("r_list", {0.5, 1.0, 2.0});
  const double H = r.positive("H", 1.0);
  if (n < 4) r.error("config key 'n' must be at least 4");
  if (reps < 1000) r.error("config key 'reps' must be at least 1000");
  r.finish();
  auto ctx = family_context(*f, static_cast<double>(n), 0.0, uc, seed, 100000, opt.workers);
  note_moments(a, ctx.moments);
  io::Csv csv({"r", "tail_s", "tail_u", "ratio", "se", "resolvable", "bound", "admissible"});
  json rows = json::array();
  for (double rr : r_list) {
    const auto est = experiments::estimate_cramer_ratio(*f, n, rr, reps, seed, opt.workers);
    if (!est.resolvable) a.warnings.push_back("r = " + format_double(rr) + ": " + est.note);
    const auto b = constants::cramer_constants({H, ctx.moments.L_n(), rr}, ctx.bundle,
                                               static_cast<double>(f->p()), static_cast<double>(n), uc);
    csv.row({io::cell(rr), io::cell(est.tail_s), io::cell(est.tail_u), io::cell(est.ratio_hat), io::cell(est.se),
             io::cell(est.resolvable), io::cell(b.total), io::cell(b.validity.ok)});
    rows.push_back({{"r", io::number(rr)}, {"ratio", io::to_json(est)}, {"bound", io::to_json(b)}});
  }
  a.result = {{"points", rows}};
  a.data = std::move(csv);
}

inline void run_moments(Artifacts& a, Config& c, const RunOptions& opt) {
  Resolver r(c);
  const auto seed = r.count("seed", 0);
  auto f = resolve_family(r, c);
  const auto uc = resolve_constants(r);
  const auto n = r.count("n", 1024);
  const double m = r.num("m", 1.0);
  const auto reps = r.count("reps", 100000);
  const double beta = r.positive("beta", 1.0);
  if (m < 1.0) r.error("config key 'm' must be at least 1");
  if (reps < 1000) r.error("config key 'reps' must be at least 1000");
  r.finish();
  auto ctx = family_context(*f, static_cast<double>(n), m, uc, seed, 100000, opt.workers);
  note_moments(a, ctx.moments);
  const auto d = experiments::estimate_moment_diff(*f, n, m, reps, seed, opt.workers);
  const auto b = constants::moment_diff_bound(m, beta, ctx.moments.mu(), ctx.moments.L_n(),
                                              static_cast<double>(f->p()), static_cast<double>(n), uc);
  const auto cmp = experiments::compare_bound(std::abs(d.diff_hat), d.se,
                                              {static_cast<double>(n), static_cast<double>(f->p()), m}, b);
  a.result = {{"moment_diff", io::to_json(d)}, {"bound", io::to_json(b)}, {"comparison", io::to_json(cmp)}};
  io::Csv csv({"m", "diff_hat", "se", "bound", "pass"});
  csv.row({io::cell(m), io::cell(d.diff_hat), io::cell(d.se), io::cell(b.total), io::cell(cmp.pass)});
  a.data = std::move(csv);
}

inline void run_posi(Artifacts& a, Config& c, const RunOptions& opt) {
  Resolver r(c);
  const auto seed = r.count("seed", 0);
  const auto uc = resolve_constants(r);
  const std::string design = r.required("design");
  const auto k = r.count("k", 1);
  const auto alphas = r.list("alpha", {0.05});
  const auto reps = r.count("reps", 100000);
  const double var_y = r.positive("var_y", 1.0);
  const auto cap = r.count("cap", posi::kDefaultCap);
  if (k < 1) r.error("config key 'k' must be at least 1");
  if (reps < 1000) r.error("config key 'reps' must be at least 1000");
  for (double al : alphas)
    if (!(al > 0.0 && al < 1.0)) r.error("alpha values must lie in (0,1)");
  r.finish();
  const auto x = posi::read_design_csv(design);
  require(k <= x.d(), ErrorKind::config, "k = " + std::to_string(k) + " exceeds the design's d = " + std::to_string(x.d()));
  const auto res = posi::simulate_max_t(x, k, var_y, alphas, reps, seed, opt.workers, cap);
  a.result = io::to_json(res);
  a.result["n"] = x.n();
  a.result["d"] = x.d();
  if (!res.kappa.violated) {
    a.result["width_bound"] = io::number(posi::posi_width_bound(res.kappa.value, x.d(), k, uc.c_kappa));
    if (res.kappa.value > 0.0) a.warnings.push_back("width bound uses C(kappa) = " + format_double(uc.c_kappa) + ", which is only known asymptotically");
  } else {
    a.warnings.push_back("RIP condition fails (kappa >= 1) at submodel " + res.kappa.offending);
  }
  io::Csv csv({"alpha", "quantile", "se"});
  for (const auto& [al, q] : res.quantile) csv.row({io::cell(al), io::cell(q), io::cell(res.quantile_se.at(al))});
  a.data = std::move(csv);
}

inline void run_empproc(Artifacts& a, Config& c, const RunOptions& opt) {
  Resolver r(c);
  const auto seed = r.count("seed", 0);
  const auto uc = resolve_constants(r);
  const auto n_list = r.list("n_list", {16, 256, 4096});
  const std::string xi = r.str("xi", "normal");
  const auto reps = r.count("reps", 10000);
  empproc::Multiplier mult = empproc::Multiplier::normal;
  try {
    mult = empproc::multiplier_from_string(xi);
  } catch (const Error& e) {
    r.error(e.what());
  }
  for (double n : n_list)
    if (!(n >= 1.0 && n == std::floor(n))) r.error("n_list entries must be positive integers");
  if (reps < 2) r.error("config key 'reps' must be at least 2");
  r.finish();
  io::Csv csv({"n", "zhat", "se", "width", "se_width"});
  json rows = json::array();
  for (double nd : n_list) {
    const auto n = static_cast<std::size_t>(nd);
    const auto z = empproc::estimate_Zn(n, mult, reps, seed, opt.workers);
    const auto w = empproc::gaussian_width_bound(n, [](double) { return 1.0; }, reps, seed, opt.workers);
    const double corr = empproc::moment_correction(n, mult, w.width, uc);
    const auto dom = empproc::check_dominance(z, w, corr);
    if (!std::isfinite(corr))
      a.warnings.push_back("n = " + std::to_string(n) + ": multiplier has no third moment; correction is infinite");
    csv.row({io::cell(static_cast<std::uint64_t>(n)), io::cell(z.value), io::cell(z.se), io::cell(w.width),
             io::cell(w.se)});
    rows.push_back({{"n", n}, {"correction", io::number(corr)}, {"dominance_pass", dom.pass}});
  }
  a.result = {{"xi", empproc::to_string(mult)}, {"points", rows}};
  a.data = std::move(csv);
}

}  // namespace detail

/// Resolves `config` for `subcommand` and runs it. Throws Error on failure.
inline Artifacts run(const std::string& subcommand, Config config, const RunOptions& opt = {}) {
  if (opt.format != "csv" && opt.format != "json")
    throw Error(ErrorKind::config, "format must be 'csv' or 'json'");
  Artifacts a;
  a.subcommand = subcommand;
  if (subcommand == "constants")
    detail::run_constants(a, config, opt);
  else if (subcommand == "anticonc")
    detail::run_anticonc(a, config, opt);
  else if (subcommand == "smoothmax-check")
    detail::run_smoothmax(a, config, opt);
  else if (subcommand == "simulate-delta")
    detail::run_simulate_delta(a, config, opt);
  else if (subcommand == "lindeberg")
    detail::run_lindeberg(a, config, opt);
  else if (subcommand == "large-dev")
    detail::run_large_dev(a, config, opt);
  else if (subcommand == "moments")
    detail::run_moments(a, config, opt);
  else if (subcommand == "posi")
    detail::run_posi(a, config, opt);
  else if (subcommand == "empproc")
    detail::run_empproc(a, config, opt);
  else
    throw Error(ErrorKind::config, "unknown subcommand '" + subcommand + "'");
  a.config = std::move(config);
  return a;
}

inline json error_record(const Error& e) {
  return {{"schema_version", io::kSchemaVersion},
          {"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}}};
}

/// Files a run writes: <sub>.json always, <sub>.csv in csv format.
inline std::vector<std::pair<std::string, std::string>> render(const Artifacts& a, const RunOptions& opt) {
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back(a.subcommand + ".json", a.summary(opt).dump(2) + "\n");
  if (a.data && opt.format == "csv") files.emplace_back(a.subcommand + ".csv", a.data->str());
  return files;
}

inline void write_files(const std::string& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + dir + "': " + ec.message());
  for (const auto& [name, text] : files) {
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    out << text;
  }
}

}  // namespace hdclt::cli
