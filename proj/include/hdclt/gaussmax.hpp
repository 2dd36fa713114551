#pragma once

// Statistics of the Gaussian supremum ||Y||_inf, Y ~ N(0, Sigma).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hdclt/constants.hpp"
#include "hdclt/core/error.hpp"
#include "hdclt/core/normal.hpp"
#include "hdclt/core/parallel.hpp"
#include "hdclt/core/rng.hpp"
#include "hdclt/core/stats.hpp"
#include "hdclt/covariance.hpp"

namespace hdclt::gaussmax {

/// P(||Y||_inf <= r) for independent coordinates with the given variances.
inline double exact_sup_cdf_diag(std::span<const double> variances, double r) {
  for (double v : variances)
    require(v > 0.0 && std::isfinite(v), ErrorKind::invalid_argument,
            "exact_sup_cdf_diag: variances must be positive");
  if (r <= 0.0) return 0.0;
  if (std::isinf(r)) return 1.0;
  double prod = 1.0;
  for (double v : variances) prod *= abs_normal_cdf(r / std::sqrt(v));
  return prod;
}

inline double exact_sup_cdf_diag(const CovarianceSpec& cov, double r) {
  require(cov.is_diagonal(), ErrorKind::invalid_argument,
          "exact_sup_cdf_diag: covariance is not diagonal");
  const auto v = cov.variances();
  return exact_sup_cdf_diag(std::span<const double>(v), r);
}

/// Solves P(||Y||_inf <= r) = prob by bisection on the product CDF.
inline double exact_sup_quantile_diag(std::span<const double> variances, double prob) {
  require(prob > 0.0 && prob < 1.0, ErrorKind::invalid_argument, "quantile level must lie in (0,1)");
  double lo = 0.0, hi = 1.0;
  while (exact_sup_cdf_diag(variances, hi) < prob) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (exact_sup_cdf_diag(variances, mid) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

enum class Method { exact_diag, monte_carlo };

inline std::string to_string(Method m) { return m == Method::exact_diag ? "exact_diag" : "monte_carlo"; }

struct GaussianMaxSummary {
  double median_mu = 0.0;
  std::pair<double, double> mu_ci{0.0, 0.0};
  double sigma_min = 1.0;
  double sigma_max = 1.0;
  std::size_t reps = 0;
  Method method = Method::monte_carlo;
};

/// Draws of ||Y||_inf, one per replicate stream (seed, experiment, r).
inline std::vector<double> sample_sup_norms(const CovarianceSpec& cov, std::size_t reps,
                                            std::uint64_t seed, std::uint64_t experiment,
                                            unsigned workers = 1) {
  const auto p = static_cast<Eigen::Index>(cov.dim());
  const bool diag = cov.is_diagonal();
  const Eigen::MatrixXd& L = cov.cholesky();
  const Eigen::VectorXd sd = L.diagonal();
  std::vector<double> out(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    auto rng = make_stream(seed, experiment, r);
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z(j) = normal(rng);
    if (diag) {
      out[r] = sd.cwiseProduct(z).cwiseAbs().maxCoeff();
    } else {
      Eigen::VectorXd y = L.triangularView<Eigen::Lower>() * z;
      out[r] = y.cwiseAbs().maxCoeff();
    }
  });
  return out;
}

inline GaussianMaxSummary estimate_summary(const CovarianceSpec& cov, std::size_t reps,
                                           std::uint64_t seed, unsigned workers = 1) {
  require(reps >= 1000, ErrorKind::invalid_argument, "estimate_summary needs reps >= 1000");
  GaussianMaxSummary s;
  s.sigma_min = cov.sigma_min();
  s.sigma_max = cov.sigma_max();
  s.reps = reps;
  if (cov.is_diagonal()) {
    const auto v = cov.variances();
    s.method = Method::exact_diag;
    s.median_mu = exact_sup_quantile_diag(v, 0.5);
    s.mu_ci = {s.median_mu, s.median_mu};
    return s;
  }
  auto draws = sample_sup_norms(cov, reps, seed, experiment_id("gaussmax/summary"), workers);
  std::sort(draws.begin(), draws.end());
  s.method = Method::monte_carlo;
  s.median_mu = sample_median(draws);
  s.mu_ci = median_ci(draws, 0.99);
  s.mu_ci.first = std::min(s.mu_ci.first, s.median_mu);
  s.mu_ci.second = std::max(s.mu_ci.second, s.median_mu);
  return s;
}

struct ProbEstimate {
  double estimate = 0.0;
  double se = 0.0;
  bool exact = false;
};

/// P(r - eps <= ||Y||_inf <= r + eps).
inline ProbEstimate band_probability(const CovarianceSpec& cov, double r, double eps,
                                     std::size_t reps, std::uint64_t seed, unsigned workers = 1) {
  require(r >= 0.0 && eps >= 0.0, ErrorKind::invalid_argument, "band needs r >= 0, eps >= 0");
  if (cov.is_diagonal()) {
    if (eps == 0.0) return {0.0, 0.0, true};
    const auto v = cov.variances();
    const double hi = exact_sup_cdf_diag(v, r + eps);
    const double lo = exact_sup_cdf_diag(v, std::max(0.0, r - eps));
    return {hi - lo, 0.0, true};
  }
  require(reps >= 1000, ErrorKind::invalid_argument, "band_probability needs reps >= 1000");
  const auto draws = sample_sup_norms(cov, reps, seed, experiment_id("gaussmax/band"), workers);
  std::size_t hits = 0;
  for (double d : draws) hits += (d >= r - eps && d <= r + eps);
  const double est = static_cast<double>(hits) / static_cast<double>(reps);
  return {est, binomial_se(est, reps), false};
}

struct TailCheckRow {
  std::string cov_id;
  std::string check;  // "lower" or "ratio"
  double r = 0.0;
  double eps = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double bound = 0.0;
  bool excluded = false;  // probability below the 10/reps resolution floor
  bool pass = true;
};

struct TailCheckReport {
  std::vector<TailCheckRow> rows;
  std::size_t violations = 0;
  std::size_t excluded = 0;
};

/// Monte Carlo check of the tail lower bound P(||Y|| > r) >= phi0 exp(-r^2/sigma_max^2)
/// and the ratio bound P(||Y|| > r - eps) <= phi3 exp(phi4 (r+1) eps) P(||Y|| > r).
inline TailCheckReport check_tail_bounds(const CovarianceSpec& cov, const GaussianMaxSummary& summary,
                                         std::span<const double> r_grid,
                                         std::span<const double> eps_grid, std::size_t reps,
                                         std::uint64_t seed, unsigned workers = 1) {
  require(std::abs(summary.sigma_max - cov.sigma_max()) <= 1e-12 * cov.sigma_max() &&
              std::abs(summary.sigma_min - cov.sigma_min()) <= 1e-12 * cov.sigma_min(),
          ErrorKind::context_mismatch, "check_tail_bounds: summary is for a different covariance");
  auto draws = sample_sup_norms(cov, reps, seed, experiment_id("gaussmax/tail"), workers);
  std::sort(draws.begin(), draws.end());
  const auto bundle = constants::anticonc_constants(summary.median_mu, summary.sigma_min,
                                                    summary.sigma_max, {});
  const double floor = 10.0 / static_cast<double>(reps);
  TailCheckReport rep;
  for (double r : r_grid) {
    const double t = tail_sorted(draws, r);
    const double se_t = binomial_se(t, reps);
    TailCheckRow low{cov.id(), "lower", r, 0.0, t, se_t,
                     bundle.phi0 * std::exp(-bundle.phi1 * r * r)};
    low.excluded = t < floor;
    low.pass = low.excluded || t >= low.bound - 3.0 * se_t;
    rep.rows.push_back(low);
    for (double eps : eps_grid) {
      const double t_eps = tail_sorted(draws, r - eps);
      const double se_eps = binomial_se(t_eps, reps);
      const double factor = bundle.phi3 * std::exp(bundle.phi4 * (r + 1.0) * eps);
      TailCheckRow row{cov.id(), "ratio", r, eps, t_eps, se_eps, factor * t};
      // factor overflows to inf for large phi4; keep 0 * inf out of the SE
      const double scaled = se_t == 0.0 ? 0.0 : factor * se_t;
      row.se = std::sqrt(se_eps * se_eps + scaled * scaled);
      row.excluded = t < floor;
      row.pass = row.excluded || t_eps <= row.bound + 3.0 * row.se;
      rep.rows.push_back(row);
    }
  }
  for (const auto& row : rep.rows) {
    rep.violations += !row.pass;
    rep.excluded += row.excluded;
  }
  return rep;
}

struct AntiConcRow {
  std::string cov_id;
  double m = 0.0;
  double eps = 0.0;
  double r = 0.0;
  double weighted_band = 0.0;  // r^m P(r - eps <= ||Y|| <= r + eps)
  double se = 0.0;
  double bound = 0.0;          // phi_ac(m) eps
  bool pass = true;
};

/// Checks r^m P(band) <= phi_ac(m) eps + 3 SE over an r grid, using Monte
/// Carlo draws of ||Y||_inf (exact band probabilities when diagonal).
inline std::vector<AntiConcRow> check_anticoncentration(
    const CovarianceSpec& cov, const constants::ConstantBundle& bundle,
    std::span<const double> m_list, std::span<const double> eps_list,
    std::span<const double> r_grid, std::size_t reps, std::uint64_t seed, unsigned workers = 1) {
  std::vector<double> draws;
  const bool exact = cov.is_diagonal();
  if (!exact) {
    draws = sample_sup_norms(cov, reps, seed, experiment_id("gaussmax/anticonc"), workers);
    std::sort(draws.begin(), draws.end());
  }
  std::vector<AntiConcRow> rows;
  for (double m : m_list) {
    const double phi = bundle.phi_ac_at(m);
    for (double eps : eps_list) {
      for (double r : r_grid) {
        double prob = 0.0, se = 0.0;
        if (exact) {
          prob = band_probability(cov, r, eps, reps, seed).estimate;
        } else {
          const auto lo = std::lower_bound(draws.begin(), draws.end(), r - eps);
          const auto hi = std::upper_bound(draws.begin(), draws.end(), r + eps);
          prob = static_cast<double>(hi - lo) / static_cast<double>(reps);
          se = binomial_se(prob, reps);
        }
        const double w = std::pow(r, m);
        AntiConcRow row{cov.id(), m, eps, r, w * prob, w * se, phi * eps};
        row.pass = row.weighted_band <= row.bound + 3.0 * row.se;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

/// Covariances used by the default Gaussian-maximum checks.
inline std::vector<CovarianceSpec> default_covariance_grid() {
  std::vector<CovarianceSpec> grid;
  for (std::size_t p : {1u, 2u, 16u, 64u}) grid.push_back(CovarianceSpec::diagonal(std::vector<double>(p, 1.0)));
  std::vector<double> ramp(16);
  for (std::size_t j = 0; j < ramp.size(); ++j) ramp[j] = 1.0 + 3.0 * static_cast<double>(j) / 15.0;
  grid.push_back(CovarianceSpec::diagonal(ramp));
  grid.push_back(CovarianceSpec::equicorrelated(0.5, 1.0, 16));
  grid.push_back(CovarianceSpec::equicorrelated(0.5, 1.0, 64));
  return grid;
}

}  // namespace hdclt::gaussmax
