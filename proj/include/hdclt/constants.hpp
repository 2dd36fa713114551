#pragma once

// Closed-form constants and rate bounds for the high-dimensional CLT.
//
// Every bound is evaluated from a flat map of named inputs (`inputs_echo`),
// so a bundle can be re-evaluated from its own echo and must reproduce the
// same total bit for bit. Universal constants the theory leaves symbolic are
// ordinary configuration values (see UniversalConstants) and are always
// echoed next to the result.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hdclt/core/error.hpp"

namespace hdclt::constants {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// log(e p), the dimension factor used throughout.
inline double log_ep(double p) { return 1.0 + std::log(p); }

enum class ThetaPolicy {
  numeric,   // branches of the anti-concentration argument evaluated numerically
  symbolic,  // closed-form expression scaled by a configured Theta_m
};

inline std::string to_string(ThetaPolicy p) {
  return p == ThetaPolicy::numeric ? "numeric" : "symbolic";
}

inline ThetaPolicy theta_policy_from_string(const std::string& s) {
  if (s == "numeric") return ThetaPolicy::numeric;
  if (s == "symbolic") return ThetaPolicy::symbolic;
  throw Error(ErrorKind::invalid_argument, "theta_policy must be 'numeric' or 'symbolic', got '" + s + "'");
}

// Default for C0. The derivative-sum certification of the smooth indicator
// (smoothmax::certify_derivative_bounds) needs C0 >= ~480 at p = 1 because
// of the third-derivative sum; 500 passes on the whole default grid.
inline constexpr double kDefaultC0 = 500.0;

/// Values for every constant left symbolic by the theory.
struct UniversalConstants {
  double C0 = kDefaultC0;
  double frakC = 1.0;     // ratio-stability exponent
  double slack = 1.0;     // multiplier standing in for "<~" in rate statements
  double theta = 1.0;     // Theta
  double theta_alpha = 1.0;
  double theta_m = 1.0;
  double theta_alpha_m = 1.0;
  double theta1 = 1.0;    // Cramer corollary constants
  double theta2 = 1.0;
  double theta_ac = 1.0;  // Theta_m under ThetaPolicy::symbolic
  double c_kappa = 1.0;   // RIP width-bound constant
  ThetaPolicy theta_policy = ThetaPolicy::numeric;

  std::map<std::string, double> echo() const {
    return {{"C0", C0},
            {"frakC", frakC},
            {"slack", slack},
            {"theta", theta},
            {"theta_alpha", theta_alpha},
            {"theta_m", theta_m},
            {"theta_alpha_m", theta_alpha_m},
            {"theta1", theta1},
            {"theta2", theta2},
            {"theta_ac", theta_ac},
            {"c_kappa", c_kappa},
            {"theta_policy_numeric", theta_policy == ThetaPolicy::numeric ? 1.0 : 0.0}};
  }
};

// ---------------------------------------------------------------------------
// Gaussian-maximum constants
// ---------------------------------------------------------------------------

inline void check_sigmas(double mu, double sigma_min, double sigma_max) {
  require(sigma_min > 0.0 && std::isfinite(sigma_min), ErrorKind::invalid_argument,
          "sigma_min must be positive");
  require(sigma_max >= sigma_min && std::isfinite(sigma_max), ErrorKind::invalid_argument,
          "sigma_max must be >= sigma_min");
  require(mu >= 0.0 && std::isfinite(mu), ErrorKind::invalid_argument, "median mu must be >= 0");
}

inline double phi2(double mu, double sigma_min, double sigma_max) {
  check_sigmas(mu, sigma_min, sigma_max);
  const double s2 = sigma_min * sigma_min;
  const double a = 51.0 * (mu + 4.1 * sigma_max) / s2;
  const double b = 32.0 * std::numbers::pi * std::pow(mu + 2.6 * sigma_min, 2) / (s2 * s2);
  return std::max(a, b);
}

inline double phi4(double mu, double sigma_min, double sigma_max) {
  check_sigmas(mu, sigma_min, sigma_max);
  const double smin2 = sigma_min * sigma_min;
  const double smax2 = sigma_max * sigma_max;
  const double a = 56.0 * (mu + 1.5 * sigma_max) * (mu + 4.1 * sigma_max) / (smax2 * smin2);
  const double b = 32.0 * std::numbers::pi * std::pow(2.6 * sigma_min + mu, 2) *
                   (smin2 + 32.0 * sigma_min * mu + 12.0 * mu * mu) / (smin2 * smin2 * smin2);
  return 1.0 + a + b;
}

/// Density bound K(lambda) = 2 sigma^{-1} (2.6 + lambda / sigma).
inline double density_constant(double lambda, double sigma_min) {
  require(sigma_min > 0.0, ErrorKind::invalid_argument, "sigma_min must be positive");
  return 2.0 / sigma_min * (2.6 + lambda / sigma_min);
}

/// Maximizes a unimodal function on [lo, hi] by golden-section search.
template <class F>
double golden_section_max(F&& f, double lo, double hi, double tol = 1e-12) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return std::max({f(lo), f(x), f(hi)});
}

struct AntiConcentrationBranches {
  double small_r = 0.0;  // r <= 3(mu + sigma_max)
  double large_r = 0.0;  // r > 3(mu + sigma_max)
  double value = 0.0;
};

/// Both branches of the anti-concentration constant for order m.
///
/// small_r = 3^{m+1} (mu + 2 sigma_max)^{m+1} / sigma_min^2
/// large_r = sup_{r > 3(mu+sigma_max)} 2 Phi2 r^m (r+1) exp(-r^2/(18 sigma_max^2))
///           * exp(-9 (mu+sigma_max)^2 / (32 sigma_max^2))
inline AntiConcentrationBranches phi_ac_branches(double m, double mu, double sigma_min,
                                                 double sigma_max) {
  check_sigmas(mu, sigma_min, sigma_max);
  require(m >= 0.0, ErrorKind::invalid_argument, "anti-concentration order m must be >= 0");
  AntiConcentrationBranches out;
  out.small_r = std::pow(3.0, m + 1.0) * std::pow(mu + 2.0 * sigma_max, m + 1.0) /
                (sigma_min * sigma_min);
  const double s2 = sigma_max * sigma_max;
  const double lo = 3.0 * (mu + sigma_max);
  // log r^m (r+1) e^{-r^2/(18 s2)} is strictly concave on r > 0.
  auto log_obj = [&](double r) {
    return (m > 0.0 ? m * std::log(r) : 0.0) + std::log1p(r) - r * r / (18.0 * s2);
  };
  const double hi = lo + 30.0 * sigma_max * (1.0 + std::sqrt(m + 1.0));
  const double best = golden_section_max(log_obj, lo, hi);
  out.large_r = 2.0 * phi2(mu, sigma_min, sigma_max) * std::exp(best) *
                std::exp(-9.0 * (mu + sigma_max) * (mu + sigma_max) / (32.0 * s2));
  out.value = std::max(out.small_r, out.large_r);
  return out;
}

/// Anti-concentration constant Phi_{AC,m} under the chosen policy.
inline double phi_ac(double m, double mu, double sigma_min, double sigma_max,
                     ThetaPolicy policy = ThetaPolicy::numeric, double theta_ac = 1.0) {
  if (policy == ThetaPolicy::numeric) return phi_ac_branches(m, mu, sigma_min, sigma_max).value;
  check_sigmas(mu, sigma_min, sigma_max);
  const double smin4 = std::pow(sigma_min, 4);
  return theta_ac *
         (std::pow(mu + sigma_max, m + 1.0) * sigma_max * sigma_max +
          std::pow(1.0 + sigma_max, 2) * std::pow(sigma_max, m + 2.0)) /
         smin4;
}

/// Evaluated constants for one Gaussian supremum (mu, sigma_min, sigma_max).
struct ConstantBundle {
  double mu = 0.0;
  double sigma_min = 1.0;
  double sigma_max = 1.0;
  double phi0 = 1.0 / 6.0;  // P(|Y| > r) >= phi0 exp(-phi1 r^2)
  double phi1 = 1.0;
  double phi2 = 0.0;        // band <= phi2 eps (1 + r) P(|Y| > r - eps)
  double phi3 = 20.0;       // ratio <= phi3 exp(phi4 (r + 1) eps)
  double phi4 = 0.0;
  std::map<double, double> phi_ac;
  ThetaPolicy theta_policy = ThetaPolicy::numeric;
  double theta_ac = 1.0;

  double K(double lambda) const { return density_constant(lambda, sigma_min); }

  double phi_ac_at(double m) const {
    if (auto it = phi_ac.find(m); it != phi_ac.end()) return it->second;
    return constants::phi_ac(m, mu, sigma_min, sigma_max, theta_policy, theta_ac);
  }
};

inline ConstantBundle anticonc_constants(double mu, double sigma_min, double sigma_max,
                                         const std::vector<double>& m_list,
                                         ThetaPolicy policy = ThetaPolicy::numeric,
                                         double theta_ac = 1.0) {
  check_sigmas(mu, sigma_min, sigma_max);
  ConstantBundle b;
  b.mu = mu;
  b.sigma_min = sigma_min;
  b.sigma_max = sigma_max;
  b.phi1 = 1.0 / (sigma_max * sigma_max);
  b.phi2 = phi2(mu, sigma_min, sigma_max);
  b.phi4 = phi4(mu, sigma_min, sigma_max);
  b.theta_policy = policy;
  b.theta_ac = theta_ac;
  for (double m : m_list) b.phi_ac[m] = phi_ac(m, mu, sigma_min, sigma_max, policy, theta_ac);
  return b;
}

// ---------------------------------------------------------------------------
// Rate bundles
// ---------------------------------------------------------------------------

enum class Theorem { T31, E32, P32, T33, T34, T35, C36, C37, RMK38, APPA, T51, C52 };

inline std::string to_string(Theorem t) {
  switch (t) {
    case Theorem::T31: return "T31";
    case Theorem::E32: return "E32";
    case Theorem::P32: return "P32";
    case Theorem::T33: return "T33";
    case Theorem::T34: return "T34";
    case Theorem::T35: return "T35";
    case Theorem::C36: return "C36";
    case Theorem::C37: return "C37";
    case Theorem::RMK38: return "RMK38";
    case Theorem::APPA: return "APPA";
    case Theorem::T51: return "T51";
    case Theorem::C52: return "C52";
  }
  return "?";
}

inline Theorem theorem_from_string(const std::string& s) {
  for (Theorem t : {Theorem::T31, Theorem::E32, Theorem::P32, Theorem::T33, Theorem::T34,
                    Theorem::T35, Theorem::C36, Theorem::C37, Theorem::RMK38, Theorem::APPA,
                    Theorem::T51, Theorem::C52})
    if (to_string(t) == s) return t;
  throw Error(ErrorKind::invalid_argument, "unknown theorem tag '" + s + "'");
}

struct Term {
  std::string name;
  double value = 0.0;
  std::string formula;
};

struct Validity {
  bool checked = false;
  bool ok = true;
  std::string note;
};

struct RateBundle {
  Theorem theorem = Theorem::T31;
  std::string variant;  // corollary display, e.g. "C36b"
  std::vector<Term> terms;
  double total = 0.0;
  bool vacuous = false;  // total > 1; reported, never clamped
  std::map<std::string, double> inputs_echo;
  std::map<std::string, double> derived;  // eps_n and similar intermediate values
  Validity validity;

  double term(const std::string& name) const {
    for (const auto& t : terms)
      if (t.name == name) return t.value;
    throw Error(ErrorKind::invalid_argument, "rate bundle has no term '" + name + "'");
  }
};

using Inputs = std::map<std::string, double>;

inline double get(const Inputs& in, const std::string& key) {
  auto it = in.find(key);
  require(it != in.end(), ErrorKind::invalid_argument, "missing input '" + key + "'");
  return it->second;
}

/// Pseudo-moment functionals consumed by the rate bounds. Functions are
/// evaluated lazily because several bounds need M_n at a scale that is only
/// known after eps_n is computed.
struct MomentInputs {
  double L_n = 0.0;
  double Lbar_n0 = 0.0;
  std::function<double(double m)> Lbar_nm;
  std::function<double(double q)> nu;    // (int |x|^q d|zeta|)^{1/q}
  std::function<double(double q)> weak;  // max_j int |x(j)|^q d|zeta|
  std::function<double(double phi)> M_n;

  static MomentInputs constant(double L_n, double Lbar, double nu_value, double M_value) {
    MomentInputs m;
    m.L_n = L_n;
    m.Lbar_n0 = Lbar;
    m.Lbar_nm = [Lbar](double) { return Lbar; };
    m.nu = [nu_value](double) { return nu_value; };
    m.weak = [L_n](double) { return L_n; };
    m.M_n = [M_value](double) { return M_value; };
    return m;
  }
};

namespace detail {

inline void finish(RateBundle& b) {
  double total = 0.0;
  for (const auto& t : b.terms) total += t.value;
  b.total = total;
  b.vacuous = total > 1.0;
}

inline RateBundle t31(const Inputs& in) {
  const double n = get(in, "n"), p = get(in, "p"), L = get(in, "L_n");
  const double C0 = get(in, "C0"), fc = get(in, "frakC"), phi = get(in, "phi_ac0");
  const double lep = log_ep(p);
  const double eps = std::cbrt(2.0 * std::exp(2.0 * fc) * C0 * lep * lep * L) / std::pow(n, 1.0 / 6.0);
  RateBundle b;
  b.theorem = Theorem::T31;
  b.derived["eps_n"] = eps;
  b.terms = {
      {"anticoncentration", 4.0 * phi * eps, "4*phi_ac0*eps_n"},
      {"truncated_second", 2.0 * C0 * lep * get(in, "M_n_at_eps") / (eps * eps),
       "2*C0*log(ep)*M_n(eps_n)/eps_n^2"},
      {"weighted_third",
       std::cbrt(lep) * get(in, "Lbar_n0") /
           (std::cbrt(n) * std::pow(L, 4.0 / 3.0) * std::cbrt(2.0 * std::exp(5.0 * fc) * C0)),
       "log^{1/3}(ep)*Lbar_n0/(n^{1/3} L_n^{4/3} (2 e^{5 frakC} C0)^{1/3})"},
  };
  return b;
}

inline RateBundle finite_moment(const Inputs& in) {
  const double n = get(in, "n"), p = get(in, "p"), tau = get(in, "tau");
  const double phi = get(in, "phi_ac0"), nu = get(in, "nu_2tau"), slack = get(in, "slack");
  const double lep = log_ep(p);
  const double n_exp = tau / (6.0 + 2.0 * tau);
  RateBundle b;
  b.derived["n_exponent"] = n_exp;
  const double moment_part = std::pow(phi * nu, (2.0 + tau) / (3.0 + tau));
  if (tau >= 1.0) {
    b.theorem = Theorem::E32;
    const double L = get(in, "L_n");
    b.terms = {
        {"main", slack * phi * std::cbrt(lep * lep * L) / std::pow(n, 1.0 / 6.0),
         "slack*phi_ac0*(log^2(ep) L_n)^{1/3}/n^{1/6}"},
        {"moment", slack * moment_part * std::pow(lep, (tau + 1.0) / (tau + 3.0)) / std::pow(n, n_exp),
         "slack*(phi_ac0 nu)^{(2+tau)/(3+tau)} log(ep)^{(tau+1)/(tau+3)}/n^{tau/(6+2tau)}"},
    };
  } else {
    b.theorem = Theorem::APPA;
    const double Lt = get(in, "L_n_tau");
    const double scale = std::pow(lep, (tau + 1.0) / (tau + 2.0)) / std::pow(n, n_exp);
    b.terms = {
        {"weak_moment", slack * phi * std::pow(Lt, 1.0 / (2.0 + tau)) * scale,
         "slack*phi_ac0*L_{n,tau}^{1/(2+tau)} log(ep)^{(tau+1)/(tau+2)}/n^{tau/(6+2tau)}"},
        {"moment", slack * moment_part * scale,
         "slack*(phi_ac0 nu)^{(2+tau)/(3+tau)} log(ep)^{(tau+1)/(tau+2)}/n^{tau/(6+2tau)}"},
    };
  }
  return b;
}

inline RateBundle p32(const Inputs& in) {
  const double n = get(in, "n"), p = get(in, "p"), C0 = get(in, "C0");
  const double lep = log_ep(p);
  RateBundle b;
  b.theorem = Theorem::P32;
  b.terms = {
      {"geometric", std::exp2(1.0 - n), "1/2^{n-1}"},
      {"main",
       8.0 * get(in, "phi_ac0") * get(in, "nu3") * std::cbrt(C0 * lep * lep) / std::pow(n, 1.0 / 6.0),
       "8*phi_ac0*nu_3*(C0 log^2(ep))^{1/3}/n^{1/6}"},
  };
  return b;
}

inline RateBundle t33(const Inputs& in) {
  const double n = get(in, "n"), p = get(in, "p"), tau = get(in, "tau");
  const double phi = get(in, "phi_ac0"), L = get(in, "L_n"), slack = get(in, "slack");
  const double lep = log_ep(p);
  RateBundle b;
  b.theorem = Theorem::T33;
  b.terms = {
      {"geometric", slack * std::exp2(-n), "slack/2^n"},
      {"main", slack * phi * std::pow(L * L * std::pow(lep, 4.0) / n, 1.0 / 6.0),
       "slack*phi_ac0*(L_n^2 log^4(ep)/n)^{1/6}"},
      {"moment",
       slack * phi * get(in, "nu_2tau") * std::pow(lep, (tau + 1.0) / (tau + 2.0)) /
           std::pow(n, tau / (4.0 + 2.0 * tau)),
       "slack*phi_ac0*nu_{2+tau} log(ep)^{(tau+1)/(tau+2)}/n^{tau/(4+2tau)}"},
  };
  return b;
}

inline RateBundle t34(const Inputs& in) {
  const double n = get(in, "n"), p = get(in, "p"), m = get(in, "m"), L = get(in, "L_n");
  const double C0 = get(in, "C0"), fc = get(in, "frakC"), r = get(in, "r_nm");
  const double lep = log_ep(p);
  const double eps = std::cbrt(2.0 * std::exp(2.0 * fc) * C0 * lep * lep * L) / std::pow(n, 1.0 / 6.0);
  const double rm = std::pow(r, m);
  RateBundle b;
  b.theorem = Theorem::T34;
  b.derived["eps_n"] = eps;
  b.derived["M_n_scale"] = std::pow(2.0, 2.0 * m / 3.0) * eps;
  b.terms = {
      {"anticoncentration0",
       std::pow(2.0, 2.0 * m * m / 3.0 + 8.0 * m / 3.0 + 1.0) * std::pow(eps, m + 1.0) * get(in, "phi_ac0"),
       "2^{2m^2/3+8m/3+1} eps_n^{m+1} phi_ac0"},
      {"anticoncentration_m", (std::pow(2.0, 2.0 * m / 3.0 + 1.0) + 2.0) * get(in, "phi_acm") * eps,
       "(2^{2m/3+1}+2) phi_acm eps_n"},
      {"truncated_second", 2.0 * C0 * lep * rm * get(in, "M_n_at_scaled_eps") / (eps * eps),
       "2 C0 log(ep) r^m eps_n^{-2} M_n(2^{2m/3} eps_n)"},
      {"weighted_third",
       rm * get(in, "Lbar_nm") / (L * std::pow(2.0, m) * std::exp(fc)) *
           std::pow(lep / (n * std::pow(2.0, 2.0 * m + 1.0) * std::exp(2.0 * fc) * C0 * L),
                    (m + 1.0) / 3.0),
       "r^m Lbar_nm/(L_n 2^m e^frakC) (log(ep)/(n 2^{2m+1} e^{2 frakC} C0 L_n))^{(m+1)/3}"},
      {"tail", get(in, "tail_sup"), "sup_{r>=r_nm} max_k r^m P(|U_nk| >= r)"},
  };
  return b;
}

inline double t35_eps(double n, double p, double m, double tau, double L, double nu, double C0,
                      double fc) {
  const double lep = log_ep(p);
  const double a = std::cbrt(std::pow(2.0, 2.0 + 1.5 * m) * C0 * std::exp(fc) * L * lep * lep) /
                   std::pow(n, 1.0 / 6.0);
  const double b = nu * std::pow(std::pow(2.0, 3.0 + 2.5 * m) * C0 * std::pow(lep, tau + 1.0),
                                 1.0 / (2.0 + tau)) /
                   std::pow(n, tau / (4.0 + 2.0 * tau));
  return std::max(a, b);
}

inline std::vector<Term> t35_terms(double n, double m, double nu_m, double eps, double phi_acm) {
  return {
      {"geometric", std::pow(2.0, m / 2.0) * std::pow(nu_m / std::pow(2.0, n / 2.0), m),
       "2^{m/2} (nu_m/2^{n/2})^m"},
      {"power", std::pow(2.0, 2.0 + 2.0 * m) * std::pow(eps, m), "2^{2+2m} eps_n^m"},
      {"anticoncentration", 2.4 * phi_acm * eps, "2.4 phi_acm eps_n"},
  };
}

inline RateBundle t35(const Inputs& in) {
  const double n = get(in, "n"), p = get(in, "p"), m = get(in, "m"), tau = get(in, "tau");
  const double eps = t35_eps(n, p, m, tau, get(in, "L_n"), get(in, "nu_2tau"), get(in, "C0"),
                             get(in, "frakC"));
  RateBundle b;
  b.theorem = Theorem::T35;
  b.derived["eps_n"] = eps;
  b.terms = t35_terms(n, m, get(in, "nu_m"), eps, get(in, "phi_acm"));
  return b;
}

inline void guard(RateBundle& b, bool ok, const std::string& what) {
  b.validity.checked = true;
  if (!ok) {
    b.validity.ok = false;
    b.validity.note = what;
  }
}

inline RateBundle c36(const Inputs& in, const std::string& variant) {
  const double n = get(in, "n"), p = get(in, "p"), K = get(in, "K_p"), a = get(in, "alpha");
  const double phi = get(in, "phi_ac0"), L = get(in, "L_n");
  const double th = get(in, "theta"), tha = get(in, "theta_alpha");
  const double lep = log_ep(p);
  RateBundle b;
  b.theorem = Theorem::C36;
  b.variant = variant;
  const double main = th * phi * std::cbrt(L * lep * lep) / std::pow(n, 1.0 / 6.0);
  const double pre = tha * K * phi * std::pow(lep, 1.0 + 1.0 / a) / std::sqrt(n);
  if (variant == "C36a") {
    const double lhs = std::log(std::pow(n, 1.5) / (K * tha * phi * std::pow(lep, 2.0 + 1.0 / a)));
    guard(b, lhs >= 4.0, "log(n^{3/2}/(K_p theta_alpha phi_ac0 log(ep)^{2+1/alpha})) >= 4 fails");
    const double arg = tha / phi * std::pow(n, 1.5) / std::pow(lep, 2.0 + 1.0 / a);
    b.terms = {{"main", main, "theta phi_ac0 (L_n log^2(ep))^{1/3}/n^{1/6}"},
               {"tail", pre * std::pow(std::log(arg), 1.0 / a),
                "theta_alpha K_p phi_ac0 log(ep)^{1+1/alpha}/n^{1/2} "
                "log^{1/alpha}(theta_alpha phi_ac0^{-1} n^{3/2}/log(ep)^{2+1/alpha})"}};
  } else {
    guard(b, a * std::log(n / lep) >= 3.0, "alpha*log(n/log(ep)) >= 3 fails");
    b.terms = {{"main", main, "theta phi_ac0 (L_n log^2(ep))^{1/3}/n^{1/6}"},
               {"tail", pre * std::pow(std::log(n / lep), 1.0 / a),
                "theta_alpha K_p phi_ac0 log(ep)^{1+1/alpha}/n^{1/2} log^{1/alpha}(n/log(ep))"}};
  }
  return b;
}

inline RateBundle c37(const Inputs& in, const std::string& variant) {
  const double n = get(in, "n"), p = get(in, "p"), K = get(in, "K_p"), a = get(in, "alpha");
  const double m = get(in, "m"), L = get(in, "L_n");
  const double lep = log_ep(p);
  const double lepn = 1.0 + std::log(p * n);
  RateBundle b;
  b.theorem = Theorem::C37;
  b.variant = variant;
  if (variant == "C37a" || variant == "C37b") {
    const double thm = get(in, "theta_m"), tham = get(in, "theta_alpha_m");
    const double smax = get(in, "sigma_max"), phim = get(in, "phi_acm");
    const double need = get(in, "theta") * K * K * K / L * std::pow(2.0 * std::numbers::e * lep, 1.0 + 3.0 / a);
    guard(b, n >= need, "n >= theta K_p^3 L_n^{-1} (2e log(ep))^{1+3/alpha} fails");
    const double main = thm * phim * std::pow(L * L * std::pow(lep, 4.0) / n, 1.0 / 6.0);
    const double last = thm * std::pow(K, m + 2.0) / (smax * smax * std::pow(n, 2.0 / 3.0));
    if (variant == "C37a") {
      guard(b, a > 1.0 && a <= 2.0, "C37a requires 1 < alpha <= 2");
      b.terms = {
          {"main", main, "theta_m phi_acm (L_n^2 log^4(ep)/n)^{1/6}"},
          {"tail",
           tham * std::pow(std::pow(K, (2.0 * m + 1.0) * a) * std::pow(lepn, 4.0) /
                               (n * std::pow(L, (m + 1.0) * a / 3.0)),
                           1.0 / (a - 1.0)),
           "theta_alpha_m (K_p^{(2m+1)alpha} log^4(epn)/(n L_n^{(m+1)alpha/3}))^{1/(alpha-1)}"},
          {"weighted", thm * std::pow(K, m) * std::pow(smax, m + 1.0) *
                           std::pow(std::pow(lepn, 4.0) / (n * L), (m + 1.0) / 3.0),
           "theta_m K_p^m sigma_max^{m+1} (log^4(epn)/(n L_n))^{(m+1)/3}"},
          {"remote_tail", last, "theta_m K_p^{m+2}/(sigma_max^2 n^{2/3})"},
      };
    } else {
      guard(b, a > 0.0 && a <= 1.0, "C37b requires 0 < alpha <= 1");
      b.terms = {
          {"main", main, "theta_m phi_acm (L_n^2 log^4(ep)/n)^{1/6}"},
          {"tail",
           tham * std::pow(K, 3.0 + m) / L *
               std::pow(K * K * K * std::pow(lepn, 1.25 + 3.0 / a) / (n * L), 12.0 / a + 2.0 * m),
           "theta_alpha_m K_p^{3+m}/L_n (K_p^3 log(epn)^{5/4+3/alpha}/(n L_n))^{12/alpha+2m}"},
          {"weighted", thm * std::pow(K, m) * std::pow(smax, m + 1.0) *
                           std::pow(std::pow(lepn, 1.0 + 3.0 / a) / (n * L), (m + 1.0) / 3.0),
           "theta_m K_p^m sigma_max^{m+1} (log(epn)^{1+3/alpha}/(n L_n))^{(m+1)/3}"},
          {"remote_tail", last, "theta_m K_p^{m+2}/(sigma_max^2 n^{2/3})"},
      };
    }
  } else if (variant == "C37c") {
    const double C0 = get(in, "C0"), fc = get(in, "frakC"), tham = get(in, "theta_alpha_m");
    guard(b, a * std::log(std::pow(2.0, 3.0 + 2.5 * m) * n / lep) >= m + 2.0,
          "alpha*log(2^{3+5m/2} n/log(ep)) >= m+2 fails");
    const double e1 = std::cbrt(std::pow(2.0, 2.0 + 1.5 * m) * C0 * std::exp(fc) * L * lep * lep) /
                      std::pow(n, 1.0 / 6.0);
    const double e2 = tham * std::pow(std::numbers::e * a, 1.0 / a) * std::pow(lep, 1.0 + 1.0 / a) /
                      std::sqrt(n) * std::pow(std::log(2.0 * C0 * n / lep), 1.0 / a);
    const double eps = std::max(e1, e2);
    b.derived["eps_n"] = eps;
    b.terms = t35_terms(n, m, get(in, "nu_m"), eps, get(in, "phi_acm"));
  } else if (variant == "C37r") {
    b.terms = {
        {"main", get(in, "phi_acm") * std::cbrt(L * lep * lep) / std::pow(n, 1.0 / 6.0),
         "phi_acm (L_n log^2(ep))^{1/3}/n^{1/6}"},
        {"heavy_tail", a > 1.0 ? 0.0 : std::pow(std::pow(lep, 1.25 + 3.0 / a) / n, (m + 1.0) / 3.0),
         "0 if alpha>1 else (log(ep)^{5/4+3/alpha}/n)^{(m+1)/3}"},
    };
  } else {
    throw Error(ErrorKind::invalid_argument, "unknown sub-Weibull display '" + variant + "'");
  }
  return b;
}

inline RateBundle rmk38(const Inputs& in) {
  const double n = get(in, "n"), p = get(in, "p"), m = get(in, "m"), beta = get(in, "beta");
  const double mu = get(in, "mu"), L = get(in, "L_n"), slack = get(in, "slack");
  const double lep = log_ep(p);
  const double rate = std::cbrt(L * lep * lep) / std::pow(n, 1.0 / 6.0);
  RateBundle b;
  b.theorem = Theorem::RMK38;
  b.terms = {
      {"uniform", slack * m * mu * rate, "slack m mu (L_n log^2(ep))^{1/3}/n^{1/6}"},
      {"nonuniform", slack * (m / beta) * std::pow(mu, m + beta + 1.0) * rate,
       "slack (m/beta) mu^{m+beta+1} (L_n log^2(ep))^{1/3}/n^{1/6}"},
  };
  return b;
}

}  // namespace detail

// Cramer-type constants -----------------------------------------------------

struct CramerConstants {
  double B = 0.0;
  std::vector<double> pi_tilde_terms;  // summands of Pi~_n
  double pi_tilde = 0.0;
  std::vector<double> pi_branches;
  double pi = 0.0;
  std::vector<double> m_branches;
  double M = 0.0;
  std::vector<double> b0_branches;
  double B0 = 0.0;
  double damping = 0.0;  // 17 M^{1/4} / (6 (mu+1)^{17/16} n^{5/32})
  double admissible_limit = 0.0;  // B0 exp(-3 M^{1/4} (mu+1)^{-17/16} log(en) n^{-5/32})

  /// B_s = B0 (1 + damping)^{-s}; nonincreasing in s.
  double B_s(double s) const { return B0 * std::pow(1.0 + damping, -s); }

  bool admissible(double r, double n) const {
    return (r + 1.0) / std::pow(n, 1.0 / 6.0) <= admissible_limit;
  }

  double bound(double r, double n) const { return 1.02 * M * (r + 1.0) / std::pow(n, 1.0 / 6.0); }
};

inline CramerConstants cramer_from_inputs(const Inputs& in) {
  const double n = get(in, "n"), p = get(in, "p"), H = get(in, "H"), L = get(in, "L_n");
  const double mu = get(in, "mu"), smax = get(in, "sigma_max"), C0 = get(in, "C0");
  const double fc = get(in, "frakC"), phi2v = get(in, "phi2"), phi4v = get(in, "phi4");
  const double phi0 = get(in, "phi_ac0");
  require(n >= 4.0, ErrorKind::invalid_argument, "Cramer bound needs n >= 4");
  require(H > 0.0, ErrorKind::invalid_argument, "exponential-moment scale H must be positive");
  const double lep = log_ep(p), len = 1.0 + std::log(n);
  const double C2 = C0 * lep, C3 = C0 * lep * lep;
  const double efc = std::exp(fc);
  CramerConstants c;
  c.B = 2.0 * (1.0 + 1.0 / (smax * smax)) / H;
  c.pi_tilde_terms = {
      4.0,
      12.0 * phi0 * std::cbrt(8.0 * C3 * L * efc),
      20.0 * phi0 * lep * std::log(8.0 * C0 * n) / (H * std::cbrt(n)),
      5.1 * lep / (C0 * std::pow(n, 5.0 / 6.0)),
  };
  c.pi_tilde = c.pi_tilde_terms[0] + c.pi_tilde_terms[1] + c.pi_tilde_terms[2] + c.pi_tilde_terms[3];
  c.pi_branches = {
      c.pi_tilde,
      std::pow(132.0 * phi2v, 4.0 / 3.0),
      19.0 * C3 * L * efc / phi4v,
      std::pow(37.0 * C3 * L * efc, 4.0 / 7.0),
      std::pow(24.0 * C2 / (std::pow(phi4v, 5.0) * H * H), 4.0 / 11.0),
  };
  c.pi = *std::max_element(c.pi_branches.begin(), c.pi_branches.end());
  c.m_branches = {
      2.0 * c.pi,
      std::pow(112.0 * phi2v + 83.0 * C3 * L, 4.0 / 3.0),
      std::pow(48.0 * C2, 10.0 / 23.0) / std::pow(std::pow(phi4v, 32.0) * std::pow(H, 20.0), 1.0 / 23.0),
      36.0 * std::pow(C3 * L * phi2v, 2.0 / 3.0),
      std::pow(124.0 * C3 * L, 2.0) / (std::pow(mu + 1.0, 17.0 / 8.0) * std::pow(n, 5.0 / 16.0)),
  };
  c.M = *std::max_element(c.m_branches.begin(), c.m_branches.end());
  const double b5_den = std::sqrt(6.0 * fc * c.B * lep);
  c.b0_branches = {
      1.0 / (3.0 * std::cbrt(std::pow(phi4v, 4.0) * c.pi)),
      1.0 / (4.0 * std::pow(std::pow(phi4v, 4.0) * c.M, 4.0 / 15.0)),
      std::pow(len, -1.0 / 3.0) / (2.0 * std::cbrt(phi4v * c.B)),
      std::pow(c.pi, 1.0 / 9.0) * std::pow(len, -4.0 / 9.0) / (2.0 * std::pow(c.B * lep, 4.0 / 9.0)),
      b5_den > 0.0 ? std::pow(c.M, 1.0 / 8.0) * std::pow(len, -0.5) / b5_den : kInf,
  };
  c.B0 = *std::min_element(c.b0_branches.begin(), c.b0_branches.end());
  const double mu_factor = std::pow(mu + 1.0, -17.0 / 16.0);
  c.damping = 17.0 * std::pow(c.M, 0.25) * mu_factor / (6.0 * std::pow(n, 5.0 / 32.0));
  c.admissible_limit = c.B0 * std::exp(-3.0 * std::pow(c.M, 0.25) * mu_factor * len / std::pow(n, 5.0 / 32.0));
  return c;
}

namespace detail {

inline RateBundle t51(const Inputs& in) {
  const CramerConstants c = cramer_from_inputs(in);
  const double n = get(in, "n"), r = get(in, "r");
  RateBundle b;
  b.theorem = Theorem::T51;
  b.derived = {{"B", c.B},   {"Pi_tilde", c.pi_tilde}, {"Pi", c.pi},
               {"M", c.M},   {"B0", c.B0},             {"admissible_limit", c.admissible_limit},
               {"damping", c.damping}};
  b.terms = {{"ratio_bound", c.bound(r, n), "1.02 M (r+1) n^{-1/6}"}};
  guard(b, c.admissible(r, n), "(r+1) n^{-1/6} exceeds the admissible range");
  return b;
}

inline RateBundle c52(const Inputs& in) {
  const double n = get(in, "n"), p = get(in, "p"), r = get(in, "r"), mu = get(in, "mu");
  const double a = get(in, "alpha");
  require(a >= 1.0 && a <= 2.0, ErrorKind::invalid_argument,
          "Cramer sub-Weibull corollary needs 1 <= alpha <= 2");
  const double lep = log_ep(p), len = 1.0 + std::log(n);
  RateBundle b;
  b.theorem = Theorem::C52;
  b.terms = {{"ratio_bound",
              get(in, "theta1") * std::pow(lep, 8.0 / 3.0) * (r + 1.0) / std::pow(n, 1.0 / 6.0),
              "theta1 log(ep)^{8/3} (r+1) n^{-1/6}"}};
  const double n_min = std::pow(lep, 64.0 / 15.0) * std::pow(len, 32.0 / 5.0) * std::pow(mu + 1.0, -34.0 / 5.0);
  const double r_lim = get(in, "theta2") * std::pow(std::log(std::numbers::e * p + n), -28.0 / 9.0);
  b.derived = {{"n_min_rhs", n_min}, {"r_limit", r_lim}};
  b.validity.checked = true;
  const bool g1 = n >= n_min;
  const bool g2 = (r + 1.0) / std::pow(n, 1.0 / 6.0) <= r_lim;
  b.validity.ok = g1 && g2;
  if (!g1) b.validity.note = "n >= log(ep)^{64/15} log(en)^{32/5} (mu+1)^{-34/5} fails";
  if (!g2) b.validity.note += std::string(g1 ? "" : "; ") + "(r+1) n^{-1/6} <= theta2 log(ep+n)^{-28/9} fails";
  return b;
}

}  // namespace detail

/// Re-evaluates a bundle from its theorem tag, display variant and inputs.
inline RateBundle evaluate(Theorem theorem, const std::string& variant, const Inputs& in) {
  RateBundle b;
  switch (theorem) {
    case Theorem::T31: b = detail::t31(in); break;
    case Theorem::E32:
    case Theorem::APPA: b = detail::finite_moment(in); break;
    case Theorem::P32: b = detail::p32(in); break;
    case Theorem::T33: b = detail::t33(in); break;
    case Theorem::T34: b = detail::t34(in); break;
    case Theorem::T35: b = detail::t35(in); break;
    case Theorem::C36: b = detail::c36(in, variant); break;
    case Theorem::C37: b = detail::c37(in, variant); break;
    case Theorem::RMK38: b = detail::rmk38(in); break;
    case Theorem::T51: b = detail::t51(in); break;
    case Theorem::C52: b = detail::c52(in); break;
  }
  b.inputs_echo = in;
  detail::finish(b);
  return b;
}

inline RateBundle recompute(const RateBundle& b) { return evaluate(b.theorem, b.variant, b.inputs_echo); }

// Public rate calculators ---------------------------------------------------

inline Inputs base_inputs(double p, double n, const UniversalConstants& uc) {
  require(p >= 1.0, ErrorKind::invalid_argument, "dimension p must be >= 1");
  require(n >= 1.0, ErrorKind::invalid_argument, "sample size n must be >= 1");
  Inputs in = uc.echo();
  in["p"] = p;
  in["n"] = n;
  return in;
}

inline RateBundle rate_uniform_t31(const MomentInputs& pm, double p, double n, double phi_ac0,
                                   const UniversalConstants& uc = {}) {
  require(pm.L_n > 0.0, ErrorKind::degenerate, "degenerate pseudo-moment: L_n = 0");
  Inputs in = base_inputs(p, n, uc);
  in["L_n"] = pm.L_n;
  in["Lbar_n0"] = pm.Lbar_n0;
  in["phi_ac0"] = phi_ac0;
  const double lep = log_ep(p);
  const double eps = std::cbrt(2.0 * std::exp(2.0 * uc.frakC) * uc.C0 * lep * lep * pm.L_n) /
                     std::pow(n, 1.0 / 6.0);
  in["M_n_at_eps"] = pm.M_n(eps);
  return evaluate(Theorem::T31, "", in);
}

inline RateBundle rate_finite_moment(const MomentInputs& pm, double p, double n, double tau,
                                     double phi_ac0, const UniversalConstants& uc = {}) {
  require(tau > 0.0, ErrorKind::invalid_argument, "finite-moment rate needs tau > 0");
  Inputs in = base_inputs(p, n, uc);
  in["tau"] = tau;
  in["phi_ac0"] = phi_ac0;
  in["nu_2tau"] = pm.nu(2.0 + tau);
  if (tau >= 1.0)
    in["L_n"] = pm.L_n;
  else
    in["L_n_tau"] = pm.weak(2.0 + tau);
  return evaluate(tau >= 1.0 ? Theorem::E32 : Theorem::APPA, "", in);
}

inline RateBundle rate_prop32(double nu3, double p, double n, double phi_ac0,
                              const UniversalConstants& uc = {}) {
  Inputs in = base_inputs(p, n, uc);
  in["nu3"] = nu3;
  in["phi_ac0"] = phi_ac0;
  return evaluate(Theorem::P32, "", in);
}

inline RateBundle rate_optimal_t33(const MomentInputs& pm, double p, double n, double tau,
                                   double phi_ac0, const UniversalConstants& uc = {}) {
  require(tau >= 1.0, ErrorKind::invalid_argument,
          "T33 needs tau >= 1; use rate_finite_moment for tau < 1");
  Inputs in = base_inputs(p, n, uc);
  in["tau"] = tau;
  in["L_n"] = pm.L_n;
  in["nu_2tau"] = pm.nu(2.0 + tau);
  in["phi_ac0"] = phi_ac0;
  return evaluate(Theorem::T33, "", in);
}

/// `tail_sup` bounds sup_{r >= r_nm} max_k r^m P(|U_{n,k}| >= r); it depends
/// on the whole interpolation path and must be supplied by the caller.
inline RateBundle rate_nonuniform_t34(const MomentInputs& pm, double p, double n, double m,
                                      double r_nm, std::optional<double> tail_sup, double phi_acm,
                                      double phi_ac0, const UniversalConstants& uc = {}) {
  require(m > 0.0, ErrorKind::invalid_argument, "T34 needs m > 0");
  require(r_nm > 0.0, ErrorKind::invalid_argument, "T34 needs r_nm > 0");
  require(tail_sup.has_value(), ErrorKind::invalid_argument,
          "T34 needs tail_sup (bound on sup_{r>=r_nm} max_k r^m P(|U_nk| >= r))");
  require(pm.L_n > 0.0, ErrorKind::degenerate, "degenerate pseudo-moment: L_n = 0");
  Inputs in = base_inputs(p, n, uc);
  in["m"] = m;
  in["r_nm"] = r_nm;
  in["tail_sup"] = *tail_sup;
  in["phi_acm"] = phi_acm;
  in["phi_ac0"] = phi_ac0;
  in["L_n"] = pm.L_n;
  in["Lbar_nm"] = pm.Lbar_nm(m);
  const double lep = log_ep(p);
  const double eps = std::cbrt(2.0 * std::exp(2.0 * uc.frakC) * uc.C0 * lep * lep * pm.L_n) /
                     std::pow(n, 1.0 / 6.0);
  in["M_n_at_scaled_eps"] = pm.M_n(std::pow(2.0, 2.0 * m / 3.0) * eps);
  return evaluate(Theorem::T34, "", in);
}

inline RateBundle rate_nonuniform_t35(const MomentInputs& pm, double p, double n, double m,
                                      double tau, double phi_acm, const UniversalConstants& uc = {}) {
  require(m >= 1.0 && tau >= m, ErrorKind::invalid_argument,
          "T35 needs m >= 1 and tau >= m");
  Inputs in = base_inputs(p, n, uc);
  in["m"] = m;
  in["tau"] = tau;
  in["L_n"] = pm.L_n;
  in["nu_m"] = pm.nu(m);
  in["nu_2tau"] = pm.nu(2.0 + tau);
  in["phi_acm"] = phi_acm;
  return evaluate(Theorem::T35, "", in);
}

struct SubWeibullInputs {
  double K_p = 1.0;
  double alpha = 1.0;
  double m = 0.0;
  double sigma_max = 1.0;
  double phi_ac0 = 1.0;
  double phi_acm = 1.0;
};

/// Sub-Weibull corollary displays: C36a, C36b, C37a, C37b, C37c, C37r.
/// Guard failures raise guard_violated naming the failed inequality.
inline RateBundle rate_subweibull(const std::string& kind, const SubWeibullInputs& sw,
                                  const MomentInputs& pm, double p, double n,
                                  const UniversalConstants& uc = {}) {
  require(sw.alpha > 0.0 && sw.alpha <= 2.0, ErrorKind::invalid_argument,
          "sub-Weibull index alpha must lie in (0, 2]");
  require(sw.K_p >= 1.0, ErrorKind::invalid_argument, "sub-Weibull corollaries need K_p >= 1");
  Inputs in = base_inputs(p, n, uc);
  in["K_p"] = sw.K_p;
  in["alpha"] = sw.alpha;
  in["L_n"] = pm.L_n;
  in["phi_ac0"] = sw.phi_ac0;
  Theorem t = Theorem::C36;
  if (kind.rfind("C37", 0) == 0) {
    t = Theorem::C37;
    in["m"] = sw.m;
    in["phi_acm"] = sw.phi_acm;
    in["sigma_max"] = sw.sigma_max;
    if (kind == "C37c") in["nu_m"] = pm.nu(std::max(sw.m, 1.0));
  } else if (kind != "C36a" && kind != "C36b") {
    throw Error(ErrorKind::invalid_argument, "unknown sub-Weibull display '" + kind + "'");
  }
  RateBundle b = evaluate(t, kind, in);
  if (b.validity.checked && !b.validity.ok) throw Error(ErrorKind::guard_violated, kind + ": " + b.validity.note);
  return b;
}

/// Bound on |E|S_n|^m - E|U_{n,0}|^m| with the given beta; beta <= 0 selects
/// beta = 1/log(mu), which needs mu > 1.
inline RateBundle moment_diff_bound(double m, double beta, double mu, double L_n, double p,
                                    double n, const UniversalConstants& uc = {}) {
  require(m >= 1.0, ErrorKind::invalid_argument, "moment order m must be >= 1");
  if (beta <= 0.0) {
    require(mu > 1.0, ErrorKind::invalid_argument,
            "default beta = 1/log(mu) needs mu > 1 (log(mu) <= 0)");
    beta = 1.0 / std::log(mu);
  }
  Inputs in = base_inputs(p, n, uc);
  in["m"] = m;
  in["beta"] = beta;
  in["mu"] = mu;
  in["L_n"] = L_n;
  return evaluate(Theorem::RMK38, "", in);
}

struct CramerQuery {
  double H = 1.0;
  double L_n = 1.0;
  double r = 0.0;
};

inline RateBundle cramer_constants(const CramerQuery& q, const ConstantBundle& bundle, double p,
                                   double n, const UniversalConstants& uc = {}) {
  require(n >= 4.0, ErrorKind::invalid_argument, "Cramer bound needs n >= 4");
  Inputs in = base_inputs(p, n, uc);
  in["H"] = q.H;
  in["L_n"] = q.L_n;
  in["r"] = q.r;
  in["mu"] = bundle.mu;
  in["sigma_max"] = bundle.sigma_max;
  in["phi2"] = bundle.phi2;
  in["phi4"] = bundle.phi4;
  in["phi_ac0"] = bundle.phi_ac_at(0.0);
  return evaluate(Theorem::T51, "", in);
}

inline RateBundle cramer_subweibull_c52(double K_p, double alpha, double mu, double p, double n,
                                        double r, const UniversalConstants& uc = {}) {
  Inputs in = base_inputs(p, n, uc);
  in["K_p"] = K_p;
  in["alpha"] = alpha;
  in["mu"] = mu;
  in["r"] = r;
  return evaluate(Theorem::C52, "", in);
}

/// Smallest integer n >= 4 with n >= log(ep)^{64/15} log(en)^{32/5} (mu+1)^{-34/5}.
inline double c52_min_n(double p, double mu) {
  auto rhs = [&](double n) {
    return std::pow(log_ep(p), 64.0 / 15.0) * std::pow(1.0 + std::log(n), 32.0 / 5.0) *
           std::pow(mu + 1.0, -34.0 / 5.0);
  };
  auto ok = [&](double n) { return n >= rhs(n); };
  if (ok(4.0)) return 4.0;
  // n - rhs(n) is negative on [4, n*) and nonnegative afterwards.
  double lo = 4.0, hi = 8.0;
  while (!ok(hi)) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1.0) {
    const double mid = std::floor((lo + hi) / 2.0);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace hdclt::constants
