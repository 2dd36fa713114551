#pragma once

// Multiplier empirical process over the half-line class f_u(x) = 1{x > u} on
// [0,1]: Z_n = sup_u |n^{-1/2} sum xi_i f_u(X_i)|, its Gaussian-width bound,
// and the exactness and entropy checks.
//
// For a fixed sample the class traces out the n+1 suffixes of the points
// sorted by X in decreasing order (including the empty suffix), so the sup
// is the largest absolute suffix sum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hdclt/constants.hpp"
#include "hdclt/core/error.hpp"
#include "hdclt/core/parallel.hpp"
#include "hdclt/core/rng.hpp"
#include "hdclt/core/stats.hpp"
#include "hdclt/experiments.hpp"

namespace hdclt::empproc {

enum class Multiplier { normal, student_t3 };

inline std::string to_string(Multiplier m) { return m == Multiplier::normal ? "normal" : "student_t3"; }

inline Multiplier multiplier_from_string(const std::string& s) {
  if (s == "normal") return Multiplier::normal;
  if (s == "student_t3" || s == "t3") return Multiplier::student_t3;
  throw Error(ErrorKind::config, "multiplier must be 'normal' or 'student_t3'");
}

/// E|xi|^3 for the unit-variance multiplier; infinite for t(3).
inline double third_abs_moment(Multiplier m) {
  return m == Multiplier::normal ? 2.0 * std::sqrt(2.0 / std::acos(-1.0)) : constants::kInf;
}

struct Sample {
  std::vector<double> x;   // sorted in decreasing order
  std::vector<double> xi;  // multiplier attached to x[i]
};

template <class Rng>
double draw_multiplier(Multiplier m, Rng& rng) {
  if (m == Multiplier::normal) return std::normal_distribution<double>()(rng);
  // t(3) has variance 3
  return std::student_t_distribution<double>(3.0)(rng) / std::sqrt(3.0);
}

template <class Rng>
Sample draw_sample(std::size_t n, Multiplier m, Rng& rng) {
  std::vector<std::pair<double, double>> pts(n);
  for (auto& pt : pts) {
    pt.first = uniform_open(rng);
    pt.second = draw_multiplier(m, rng);
  }
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  Sample s;
  s.x.resize(n);
  s.xi.resize(n);
  for (std::size_t i = 0; i < n; ++i) std::tie(s.x[i], s.xi[i]) = pts[i];
  return s;
}

/// max over suffixes of |sum| / sqrt(n), one pass.
inline double halfline_sup(const Sample& s) {
  const std::size_t n = s.x.size();
  if (n == 0) return 0.0;
  double run = 0.0, best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    run += s.xi[i];
    // ties in x cannot be separated by a half-line
    if (i + 1 < n && s.x[i + 1] == s.x[i]) continue;
    best = std::max(best, std::abs(run));
  }
  return best / std::sqrt(static_cast<double>(n));
}

/// O(n^2) evaluation over every cut point u in {X_i} and u below all points.
inline double halfline_sup_brute(const Sample& s) {
  const std::size_t n = s.x.size();
  if (n == 0) return 0.0;
  std::vector<double> cuts(s.x.begin(), s.x.end());
  cuts.push_back(-std::numeric_limits<double>::infinity());
  double best = 0.0;
  for (double u : cuts) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (s.x[i] > u) sum += s.xi[i];
    best = std::max(best, std::abs(sum));
  }
  return best / std::sqrt(static_cast<double>(n));
}

/// Number of distinct traces (1{x_i > u})_i over all real u.
inline std::size_t trace_count(const Sample& s) {
  std::set<std::vector<bool>> traces;
  std::vector<double> cuts(s.x.begin(), s.x.end());
  cuts.push_back(-std::numeric_limits<double>::infinity());
  cuts.push_back(std::numeric_limits<double>::infinity());
  for (double u : cuts) {
    std::vector<bool> t(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) t[i] = s.x[i] > u;
    traces.insert(std::move(t));
  }
  return traces.size();
}

/// log|E| <= d log(2en/d) with d = 1, and |E| <= n + 1.
inline bool entropy_ok(std::size_t traces, std::size_t n) {
  if (n == 0) return traces <= 1;
  const double nd = static_cast<double>(n);
  return traces <= n + 1 && std::log(static_cast<double>(traces)) <= std::log(2.0 * std::exp(1.0) * nd);
}

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Monte Carlo E[Z_n]; replicate r uses stream (seed, id("empproc/zn"), r).
inline Estimate estimate_Zn(std::size_t n, Multiplier m, std::size_t reps, std::uint64_t seed,
                            unsigned workers = 1) {
  require(reps >= 2, ErrorKind::invalid_argument, "estimate_Zn needs reps >= 2");
  experiments::check_budget(2 * static_cast<std::uint64_t>(n) * reps, "estimate_Zn");
  const std::uint64_t exp_id = experiment_id("empproc/zn");
  std::vector<double> z(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    auto rng = make_stream(seed, exp_id, r);
    z[r] = halfline_sup(draw_sample(n, m, rng));
  });
  const auto ms = mean_and_se(z);
  return {ms.mean, ms.se};
}

struct WidthEstimate {
  double width = 0.0;  // integral over u of the mean conditional Gaussian width
  double se = 0.0;
  std::size_t u_points = 0;
};

/// Gaussian multipliers scaled by sigma(X_i). For half-lines the integrand is
/// the same at every u, so it is computed once and integrated by trapezoid
/// over u_grid, which returns it unchanged.
inline WidthEstimate gaussian_width_bound(std::size_t n, const std::function<double(double)>& sigma,
                                          std::size_t reps, std::uint64_t seed, unsigned workers = 1,
                                          std::vector<double> u_grid = {0.0, 0.25, 0.5, 0.75, 1.0}) {
  require(reps >= 2, ErrorKind::invalid_argument, "gaussian_width_bound needs reps >= 2");
  require(u_grid.size() >= 2, ErrorKind::invalid_argument, "u_grid needs at least two levels");
  experiments::check_budget(2 * static_cast<std::uint64_t>(n) * reps, "gaussian_width_bound");
  const std::uint64_t exp_id = experiment_id("empproc/width");
  std::vector<double> w(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    auto rng = make_stream(seed, exp_id, r);
    Sample s = draw_sample(n, Multiplier::normal, rng);
    for (std::size_t i = 0; i < n; ++i) s.xi[i] *= sigma(s.x[i]);
    w[r] = halfline_sup(s);
  });
  const auto ms = mean_and_se(w);
  std::sort(u_grid.begin(), u_grid.end());
  double integral = 0.0, se = 0.0;
  for (std::size_t i = 1; i < u_grid.size(); ++i) {
    integral += (u_grid[i] - u_grid[i - 1]) * ms.mean;
    se += (u_grid[i] - u_grid[i - 1]) * ms.se;
  }
  return {integral, se, u_grid.size()};
}

/// Moment-convergence correction for m = 1 over the n + 1 traced functions,
/// with beta = 1 and the width standing in for the Gaussian median.
inline double moment_correction(std::size_t n, Multiplier m, double width,
                                const constants::UniversalConstants& uc = {}) {
  const double L = third_abs_moment(m);
  if (!std::isfinite(L)) return constants::kInf;
  const double nd = static_cast<double>(n);
  return constants::moment_diff_bound(1.0, 1.0, width, L, nd + 1.0, nd, uc).total;
}

struct Dominance {
  double zhat = 0.0, se = 0.0, width = 0.0, se_width = 0.0, correction = 0.0;
  bool pass = true;
};

/// width >= zhat - correction, up to three combined standard errors.
inline Dominance check_dominance(const Estimate& z, const WidthEstimate& w, double correction) {
  Dominance d{z.value, z.se, w.width, w.se, correction};
  d.pass = w.width + correction + 3.0 * std::hypot(z.se, w.se) >= z.value;
  return d;
}

struct ExactnessReport {
  std::size_t replicates = 0;
  std::size_t mismatches = 0;
  std::size_t entropy_violations = 0;
  std::size_t max_traces = 0;
};

/// Compares the one-pass sup with brute force, bit for bit, and checks the
/// trace-count bound on every sample.
inline ExactnessReport check_exactness(std::size_t max_n, std::size_t reps, std::uint64_t seed,
                                       Multiplier m = Multiplier::normal) {
  ExactnessReport rep;
  const std::uint64_t exp_id = experiment_id("empproc/exactness");
  for (std::size_t r = 0; r < reps; ++r) {
    auto rng = make_stream(seed, exp_id, r);
    const std::size_t n = 1 + static_cast<std::size_t>(rng() % max_n);
    const Sample s = draw_sample(n, m, rng);
    ++rep.replicates;
    if (halfline_sup(s) != halfline_sup_brute(s)) ++rep.mismatches;
    const std::size_t t = trace_count(s);
    rep.max_traces = std::max(rep.max_traces, t);
    if (!entropy_ok(t, n)) ++rep.entropy_violations;
  }
  return rep;
}

}  // namespace hdclt::empproc
