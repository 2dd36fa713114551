#pragma once

// Monte Carlo estimates of the distance between ||S_n||_inf and its Gaussian
// analogue ||U_{n,0}||_inf, the Lindeberg interpolation path, tail ratios and
// moment differences.
//
// Replicate r of an experiment named E uses the stream (seed, id(E), r, 0)
// and consumes it row by row; outputs depend only on (inputs, seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "hdclt/constants.hpp"
#include "hdclt/core/error.hpp"
#include "hdclt/core/parallel.hpp"
#include "hdclt/core/rng.hpp"
#include "hdclt/core/stats.hpp"
#include "hdclt/gaussmax.hpp"
#include "hdclt/randvec.hpp"

namespace hdclt::experiments {

using randvec::DistributionFamily;

inline constexpr std::uint64_t kDefaultBudget = std::uint64_t{1} << 32;

/// Element budget per experiment; HDCLT_BUDGET overrides the default 2^32.
inline std::uint64_t budget_limit() {
  if (const char* env = std::getenv("HDCLT_BUDGET")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && v > 0.0) return static_cast<std::uint64_t>(v);
  }
  return kDefaultBudget;
}

/// Random elements one experiment side would draw.
inline std::uint64_t draw_cost(const DistributionFamily& f, std::uint64_t n, std::uint64_t k, std::uint64_t reps) {
  randvec::CoordinateDrawer drawer(f);
  return randvec::PathSampler(f, n, k).cost(drawer) * reps;
}

inline void check_budget(std::uint64_t elements, const std::string& what) {
  const std::uint64_t limit = budget_limit();
  if (elements > limit) {
    throw Error(ErrorKind::budget_exceeded,
                what + " needs " + std::to_string(elements) + " random elements, over the budget of " +
                    std::to_string(limit) + "; reduce reps, n or p, or raise HDCLT_BUDGET");
  }
}

/// reps draws of ||U_{n,k}||_inf, replicate r on stream (seed, id(name), r).
inline std::vector<double> draw_path_norms(const DistributionFamily& f, std::uint64_t n, std::uint64_t k,
                                           std::size_t reps, std::uint64_t seed, const std::string& name,
                                           unsigned workers = 1) {
  const randvec::PathSampler sampler(f, n, k);
  const std::uint64_t exp_id = experiment_id(name);
  std::vector<double> out(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    auto rng = make_stream(seed, exp_id, r);
    randvec::CoordinateDrawer drawer(f);
    Eigen::VectorXd buf;
    out[r] = sampler(rng, drawer, buf);
  });
  return out;
}

// delta_{n,m} ------------------------------------------------------------------

enum class GridPolicy {
  pooled,     // every pooled sample point and its left limit (exact for m = 0)
  quantiles,  // pooled order statistics at 512 levels plus exact-CDF knots
};

inline std::string to_string(GridPolicy g) { return g == GridPolicy::pooled ? "pooled" : "quantiles"; }

inline GridPolicy grid_policy_from_string(const std::string& s) {
  if (s == "pooled") return GridPolicy::pooled;
  if (s == "quantiles") return GridPolicy::quantiles;
  throw Error(ErrorKind::config, "grid policy must be 'pooled' or 'quantiles'");
}

struct DeltaOptions {
  GridPolicy grid = GridPolicy::pooled;
  bool gaussian_mc = false;  // draw the Gaussian side even when its CDF is exact
  unsigned workers = 1;
  std::size_t knots = 64;    // exact-CDF knots on [0, r_max] when the Gaussian side is exact
};

struct GridPoint {
  double r = 0.0;
  double cdf_s = 0.0;
  double cdf_u = 0.0;
  double weighted = 0.0;  // r^m |cdf_s - cdf_u|
};

struct DeltaEstimate {
  double m = 0.0;
  std::uint64_t n = 0;
  std::size_t p = 0;
  std::size_t reps = 0;
  double delta_hat = 0.0;
  double argmax_r = 0.0;
  double se_at_argmax = 0.0;
  double r_max = 0.0;
  double truncation_bound = 0.0;  // bound on r^m |F_S - F_U| for r >= r_max (Markov)
  bool gaussian_exact = false;
  std::uint64_t elements = 0;
  std::string family_id;
  std::uint64_t seed = 0;
  std::vector<GridPoint> grid;
};

namespace detail {

inline double count_le(const std::vector<double>& sorted, double r) {
  return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), r) - sorted.begin());
}

inline double count_lt(const std::vector<double>& sorted, double r) {
  return static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), r) - sorted.begin());
}

inline double mean_power(const std::vector<double>& xs, double q) {
  std::vector<double> v(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) v[i] = std::pow(xs[i], q);
  return mean(v);
}

}  // namespace detail

inline DeltaEstimate estimate_delta(const DistributionFamily& f, std::uint64_t n, double m, std::size_t reps,
                                    std::uint64_t seed, const DeltaOptions& opt = {}) {
  require(reps >= 1000, ErrorKind::invalid_argument, "estimate_delta needs reps >= 1000");
  require(n >= 1, ErrorKind::invalid_argument, "estimate_delta needs n >= 1");
  require(m >= 0.0, ErrorKind::invalid_argument, "estimate_delta needs m >= 0");
  const auto& cov = f.covariance();
  DeltaEstimate est;
  est.m = m;
  est.n = n;
  est.p = f.p();
  est.reps = reps;
  est.family_id = f.id();
  est.seed = seed;
  est.gaussian_exact = cov.is_diagonal() && !opt.gaussian_mc;
  est.elements = draw_cost(f, n, n, reps) + (est.gaussian_exact ? 0 : draw_cost(f, n, 0, reps));
  check_budget(est.elements, "estimate_delta");

  auto s = draw_path_norms(f, n, n, reps, seed, "experiments/delta/S", opt.workers);
  std::sort(s.begin(), s.end());
  std::vector<double> u;
  if (!est.gaussian_exact) {
    u = draw_path_norms(f, n, 0, reps, seed, "experiments/delta/U", opt.workers);
    std::sort(u.begin(), u.end());
  }
  const auto variances = cov.variances();
  const double nr = static_cast<double>(reps);
  auto F_u = [&](double r, bool left) {
    if (est.gaussian_exact) return gaussmax::exact_sup_cdf_diag(variances, r);
    return (left ? detail::count_lt(u, r) : detail::count_le(u, r)) / nr;
  };

  std::vector<double> points;
  if (opt.grid == GridPolicy::pooled) {
    points = s;
    points.insert(points.end(), u.begin(), u.end());
  } else {
    std::vector<double> pooled = s;
    pooled.insert(pooled.end(), u.begin(), u.end());
    std::sort(pooled.begin(), pooled.end());
    for (int q = 1; q <= 512; ++q) points.push_back(order_quantile(pooled, q / 512.0));
  }
  const double observed_max = std::max(s.back(), u.empty() ? 0.0 : u.back());
  est.r_max = observed_max + 3.0 * cov.sigma_max();
  if (est.gaussian_exact && (m > 0.0 || opt.grid == GridPolicy::quantiles))
    for (std::size_t k = 1; k <= opt.knots; ++k)
      points.push_back(est.r_max * static_cast<double>(k) / static_cast<double>(opt.knots));
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  double best = -1.0;
  double best_fs = 0.0, best_fu = 0.0;
  est.grid.reserve(points.size());
  for (double r : points) {
    const double w = m == 0.0 ? 1.0 : std::pow(r, m);
    const double fs = detail::count_le(s, r) / nr;
    const double fu = F_u(r, false);
    const double fs_left = detail::count_lt(s, r) / nr;
    const double fu_left = F_u(r, true);
    const double at = w * std::abs(fs - fu);
    const double left = w * std::abs(fs_left - fu_left);
    GridPoint gp{r, fs, fu, std::max(at, left)};
    if (at > best) {
      best = at;
      est.argmax_r = r;
      best_fs = fs;
      best_fu = fu;
    }
    if (left > best) {
      best = left;
      est.argmax_r = r;
      best_fs = fs_left;
      best_fu = fu_left;
    }
    est.grid.push_back(gp);
  }
  est.delta_hat = std::max(0.0, best);
  const double w = m == 0.0 ? 1.0 : std::pow(est.argmax_r, m);
  double var = best_fs * (1.0 - best_fs) / nr;
  if (!est.gaussian_exact) var += best_fu * (1.0 - best_fu) / nr;
  est.se_at_argmax = w * std::sqrt(var);

  if (m > 0.0) {
    // For r >= r_max, r^m P(V > r) <= E V^{m+1} / r for either side.
    double moment_u = 0.0;
    if (est.gaussian_exact) {
      boost::math::quadrature::exp_sinh<double> integrator;
      moment_u = integrator.integrate(
          [&](double t) {
            return t <= 0.0 ? 0.0 : (m + 1.0) * std::pow(t, m) * (1.0 - gaussmax::exact_sup_cdf_diag(variances, t));
          },
          0.0, INFINITY);
    } else {
      moment_u = detail::mean_power(u, m + 1.0);
    }
    est.truncation_bound = std::max(detail::mean_power(s, m + 1.0), moment_u) / est.r_max;
  }
  return est;
}

// Lindeberg path ---------------------------------------------------------------

struct PathPoint {
  std::uint64_t k = 0;
  double prob_k = 0.0;    // P(||U_{n,k}|| <= r)
  double prob_ref = 0.0;  // P(||U_{n,0}|| <= r), independent draws
  double estimate = 0.0;  // |prob_k - prob_ref|
  double se = 0.0;
};

struct LindebergPath {
  std::uint64_t n = 0;
  double r = 0.0;
  std::size_t reps = 0;
  std::vector<PathPoint> deltas;
};

inline LindebergPath lindeberg_path(const DistributionFamily& f, std::uint64_t n,
                                    const std::vector<std::uint64_t>& k_list, double r, std::size_t reps,
                                    std::uint64_t seed, unsigned workers = 1) {
  require(reps >= 1000, ErrorKind::invalid_argument, "lindeberg_path needs reps >= 1000");
  std::uint64_t elements = draw_cost(f, n, 0, reps);
  for (auto k : k_list) {
    require(k <= n, ErrorKind::invalid_argument, "lindeberg_path: every k must lie in [0, n]");
    elements += draw_cost(f, n, k, reps);
  }
  check_budget(elements, "lindeberg_path");
  LindebergPath path;
  path.n = n;
  path.r = r;
  path.reps = reps;
  const double nr = static_cast<double>(reps);
  auto prob_le = [&](const std::vector<double>& v) {
    double c = 0.0;
    for (double x : v) c += (x <= r);
    return c / nr;
  };
  const double ref = prob_le(draw_path_norms(f, n, 0, reps, seed, "experiments/lindeberg/ref", workers));
  for (auto k : k_list) {
    const double pk =
        prob_le(draw_path_norms(f, n, k, reps, seed, "experiments/lindeberg/k=" + std::to_string(k), workers));
    PathPoint pt{k, pk, ref, std::abs(pk - ref),
                 std::sqrt(pk * (1.0 - pk) / nr + ref * (1.0 - ref) / nr)};
    path.deltas.push_back(pt);
  }
  return path;
}

// Tail ratio -------------------------------------------------------------------

struct CramerRatio {
  bool resolvable = false;
  double ratio_hat = 0.0;
  double se = 0.0;
  double tail_s = 0.0;  // P(||S_n|| > r)
  double tail_u = 0.0;  // P(||U_{n,0}|| > r)
  bool denominator_exact = false;
  std::string note;
};

/// P(||S_n|| > r) / P(||U_{n,0}|| > r). Refuses (resolvable = false) when the
/// Gaussian tail is below 10/reps.
inline CramerRatio estimate_cramer_ratio(const DistributionFamily& f, std::uint64_t n, double r,
                                         std::size_t reps, std::uint64_t seed, unsigned workers = 1) {
  require(reps >= 1000, ErrorKind::invalid_argument, "estimate_cramer_ratio needs reps >= 1000");
  const auto& cov = f.covariance();
  const double nr = static_cast<double>(reps);
  CramerRatio out;
  out.denominator_exact = cov.is_diagonal();
  std::vector<double> u;
  if (out.denominator_exact) {
    out.tail_u = 1.0 - gaussmax::exact_sup_cdf_diag(cov.variances(), r);
  } else {
    check_budget(draw_cost(f, n, 0, reps), "estimate_cramer_ratio");
    u = draw_path_norms(f, n, 0, reps, seed, "experiments/cramer/U", workers);
    double c = 0.0;
    for (double x : u) c += (x > r);
    out.tail_u = c / nr;
  }
  if (out.tail_u < 10.0 / nr) {
    out.note = "P(||Y|| > r) is below 10/reps; tail not resolvable at this replicate count";
    return out;
  }
  check_budget(draw_cost(f, n, n, reps), "estimate_cramer_ratio");
  const auto s = draw_path_norms(f, n, n, reps, seed, "experiments/cramer/S", workers);
  double c = 0.0;
  for (double x : s) c += (x > r);
  out.tail_s = c / nr;
  out.resolvable = true;
  out.ratio_hat = out.tail_s / out.tail_u;
  const double var_s = out.tail_s * (1.0 - out.tail_s) / nr;
  if (out.denominator_exact) {
    out.se = std::sqrt(var_s) / out.tail_u;
  } else {
    const double var_u = out.tail_u * (1.0 - out.tail_u) / nr;
    out.se = std::sqrt(var_s / (out.tail_u * out.tail_u) +
                       out.tail_s * out.tail_s * var_u / std::pow(out.tail_u, 4.0));
  }
  return out;
}

// Moments ----------------------------------------------------------------------

struct MomentDiff {
  double diff_hat = 0.0;  // E||S_n||^m - E||U_{n,0}||^m
  double se = 0.0;
  double moment_s = 0.0;
  double moment_u = 0.0;
};

/// Independent draws on both sides; no common random numbers.
inline MomentDiff estimate_moment_diff(const DistributionFamily& f, std::uint64_t n, double m, std::size_t reps,
                                       std::uint64_t seed, unsigned workers = 1) {
  require(reps >= 1000, ErrorKind::invalid_argument, "estimate_moment_diff needs reps >= 1000");
  require(m >= 1.0, ErrorKind::invalid_argument, "estimate_moment_diff needs m >= 1");
  check_budget(draw_cost(f, n, n, reps) + draw_cost(f, n, 0, reps), "estimate_moment_diff");
  auto powers = [&](std::vector<double> v) {
    for (auto& x : v) x = std::pow(x, m);
    return mean_and_se(v);
  };
  const auto s = powers(draw_path_norms(f, n, n, reps, seed, "experiments/moments/S", workers));
  const auto u = powers(draw_path_norms(f, n, 0, reps, seed, "experiments/moments/U", workers));
  return {s.mean - u.mean, std::sqrt(s.se * s.se + u.se * u.se), s.mean, u.mean};
}

// Theory vs simulation -----------------------------------------------------------

struct Comparison {
  double estimate = 0.0;
  double se = 0.0;
  double bound = 0.0;
  bool vacuous = false;
  double slack = 0.0;  // bound - estimate
  bool pass = true;
  std::string theorem;
};

struct EstimateContext {
  double n = 0.0;
  double p = 0.0;
  double m = 0.0;
};

inline Comparison compare_bound(double estimate, double se, const EstimateContext& ctx,
                                const constants::RateBundle& bundle) {
  auto mismatch = [&](const char* key, double have) {
    auto it = bundle.inputs_echo.find(key);
    const double want = it == bundle.inputs_echo.end() ? 0.0 : it->second;
    if (want != have)
      throw Error(ErrorKind::context_mismatch, std::string("compare_bound: estimate has ") + key + " = " +
                                                   format_double(have) + " but the bound was evaluated at " +
                                                   format_double(want));
  };
  mismatch("n", ctx.n);
  mismatch("p", ctx.p);
  mismatch("m", ctx.m);
  Comparison c;
  c.estimate = estimate;
  c.se = se;
  c.bound = bundle.total;
  c.vacuous = bundle.vacuous;
  c.slack = c.bound - estimate;
  c.pass = c.slack >= -3.0 * se;
  c.theorem = constants::to_string(bundle.theorem);
  return c;
}

inline Comparison compare_bound(const DeltaEstimate& est, const constants::RateBundle& bundle) {
  return compare_bound(est.delta_hat, est.se_at_argmax,
                       {static_cast<double>(est.n), static_cast<double>(est.p), est.m}, bundle);
}

}  // namespace hdclt::experiments
