#pragma once

// Simultaneous inference over all submodels of size <= k in fixed-design
// linear regression: the max-|t| statistic, its median and quantiles, the RIP
// constant of the design and the associated bound calculators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "hdclt/config.hpp"
#include "hdclt/core/error.hpp"
#include "hdclt/core/parallel.hpp"
#include "hdclt/core/rng.hpp"
#include "hdclt/core/stats.hpp"
#include "hdclt/experiments.hpp"

namespace hdclt::posi {

using Submodel = std::vector<std::size_t>;  // 0-based column indices, increasing

inline constexpr std::size_t kDefaultCap = 100000;

class DesignMatrix {
 public:
  explicit DesignMatrix(Eigen::MatrixXd x) : x_(std::move(x)) {
    require(x_.rows() >= 1 && x_.cols() >= 1, ErrorKind::invalid_argument, "design matrix is empty");
    require(x_.allFinite(), ErrorKind::invalid_argument, "design matrix has non-finite entries");
    gram_ = x_.transpose() * x_ / static_cast<double>(x_.rows());
  }

  std::size_t n() const { return static_cast<std::size_t>(x_.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(x_.cols()); }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::MatrixXd& gram() const { return gram_; }

  Eigen::MatrixXd sub_gram(const Submodel& m) const {
    const auto k = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd g(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b)
        g(a, b) = gram_(static_cast<Eigen::Index>(m[a]), static_cast<Eigen::Index>(m[b]));
    return g;
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::MatrixXd gram_;
};

/// Headerless numeric CSV, one row per observation.
inline DesignMatrix read_design_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read design file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(parse_double("design[" + std::to_string(rows.size()) + "]", cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorKind::io, "design file '" + path + "': row " + std::to_string(rows.size() + 1) +
                                     " has " + std::to_string(row.size()) + " columns, expected " +
                                     std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::io, "design file '" + path + "' has no rows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return DesignMatrix(std::move(x));
}

inline std::uint64_t count_submodels(std::size_t d, std::size_t k) {
  std::uint64_t total = 0, c = 1;
  for (std::size_t j = 1; j <= std::min(d, k); ++j) {
    c = c * (d - j + 1) / j;
    total += c;
    if (total > (std::uint64_t{1} << 62)) break;
  }
  return total;
}

inline std::string format_submodel(const Submodel& m) {
  std::string s = "{";
  for (std::size_t i = 0; i < m.size(); ++i) s += (i ? "," : "") + std::to_string(m[i] + 1);
  return s + "}";
}

/// Nonempty subsets of {0..d-1} with at most k elements, by size and then
/// lexicographically.
inline std::vector<Submodel> enumerate_submodels(std::size_t d, std::size_t k, std::size_t cap = kDefaultCap) {
  require(d >= 1 && k >= 1, ErrorKind::invalid_argument, "enumerate_submodels needs d >= 1 and k >= 1");
  const auto total = count_submodels(d, k);
  if (total > cap)
    throw Error(ErrorKind::cap_exceeded, "there are " + std::to_string(total) + " submodels with |M| <= " +
                                             std::to_string(k) + " over d = " + std::to_string(d) +
                                             ", above the cap of " + std::to_string(cap));
  std::vector<Submodel> out;
  out.reserve(total);
  for (std::size_t size = 1; size <= std::min(d, k); ++size) {
    Submodel m(size);
    for (std::size_t i = 0; i < size; ++i) m[i] = i;
    while (true) {
      out.push_back(m);
      std::size_t i = size;
      while (i > 0 && m[i - 1] == d - size + i - 1) --i;
      if (i == 0) break;
      ++m[i - 1];
      for (std::size_t j = i; j < size; ++j) m[j] = m[j - 1] + 1;
    }
  }
  return out;
}

struct Kappa {
  double value = 0.0;
  bool violated = false;
  std::string offending;        // submodel attaining the max, or the singular one
  double max_condition = 1.0;   // largest condition number among the Omega_M
};

inline Kappa rip_kappa(const DesignMatrix& x, std::size_t k, std::size_t cap = kDefaultCap) {
  Kappa out;
  double best = -1.0;
  for (const auto& m : enumerate_submodels(x.d(), k, cap)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.sub_gram(m), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 1e-12 * std::max(hi, 1.0))) {
      out.violated = true;
      out.value = INFINITY;
      out.offending = format_submodel(m);
      out.max_condition = INFINITY;
      return out;
    }
    out.max_condition = std::max(out.max_condition, hi / lo);
    const double kap = std::max(hi - 1.0, 1.0 - lo);
    if (kap > best) {
      best = kap;
      out.offending = format_submodel(m);
    }
  }
  out.value = std::max(0.0, best);
  out.violated = out.value >= 1.0;
  return out;
}

struct PoSIResult {
  std::size_t k = 0;
  std::size_t n_models = 0;
  std::size_t n_statistics = 0;  // number of (M, j) pairs
  double mu_posi = 0.0;
  std::map<double, double> quantile;     // alpha -> empirical (1 - alpha) quantile
  std::map<double, double> quantile_se;  // order-statistic standard error
  Kappa kappa;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Rows of W are (Omega_M^{-1} x_{i,M})(j) / (sigma_M(j) sqrt(n)) over i, so
// G = W g for a vector g of independent centered errors.
inline Eigen::MatrixXd statistic_weights(const DesignMatrix& x, const std::vector<Submodel>& models,
                                         const std::vector<double>& var_y) {
  std::size_t rows = 0;
  for (const auto& m : models) rows += m.size();
  const auto n = static_cast<Eigen::Index>(x.n());
  const double nd = static_cast<double>(x.n());
  const std::uint64_t cells = static_cast<std::uint64_t>(rows) * x.n();
  experiments::check_budget(cells, "simulate_max_t weight matrix");
  Eigen::MatrixXd w(static_cast<Eigen::Index>(rows), n);
  Eigen::Index row = 0;
  for (const auto& m : models) {
    const auto k = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd xm(n, k);
    for (Eigen::Index a = 0; a < k; ++a) xm.col(a) = x.x().col(static_cast<Eigen::Index>(m[a]));
    const Eigen::MatrixXd omega = x.sub_gram(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 1e-12 * std::max(hi, 1.0)))
      throw Error(ErrorKind::singular, "Gram matrix of submodel " + format_submodel(m) + " is singular");
    const Eigen::MatrixXd a = omega.ldlt().solve(xm.transpose());  // k x n
    for (Eigen::Index j = 0; j < k; ++j) {
      double s2 = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s2 += var_y[static_cast<std::size_t>(i)] * a(j, i) * a(j, i);
      s2 /= nd;
      if (!(s2 > 0.0))
        throw Error(ErrorKind::singular, "submodel " + format_submodel(m) + " has a zero-variance coefficient");
      w.row(row++) = a.row(j) / std::sqrt(s2 * nd);
    }
  }
  return w;
}

}  // namespace detail

inline constexpr std::size_t kReplicateBlock = 256;

/// Draws of max_{|M| <= k, j in M} |G_{j,M}|. Replicate r draws its errors
/// from stream (seed, id("posi/max_t"), r); replicates are processed in fixed
/// blocks so the result does not depend on the worker count.
inline std::vector<double> sample_max_t(const DesignMatrix& x, std::size_t k, const std::vector<double>& var_y,
                                        std::size_t reps, std::uint64_t seed, unsigned workers = 1,
                                        std::size_t cap = kDefaultCap) {
  require(var_y.size() == x.n(), ErrorKind::invalid_argument, "var_y must have one entry per row of the design");
  for (double v : var_y) require(v > 0.0 && std::isfinite(v), ErrorKind::invalid_argument, "var_y must be positive");
  const auto models = enumerate_submodels(x.d(), k, cap);
  const Eigen::MatrixXd w = detail::statistic_weights(x, models, var_y);
  experiments::check_budget(static_cast<std::uint64_t>(reps) * x.n(), "simulate_max_t");
  const auto n = static_cast<Eigen::Index>(x.n());
  const std::uint64_t exp_id = experiment_id("posi/max_t");
  std::vector<double> out(reps);
  const std::size_t blocks = (reps + kReplicateBlock - 1) / kReplicateBlock;
  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::size_t first = b * kReplicateBlock;
    const std::size_t count = std::min(kReplicateBlock, reps - first);
    Eigen::MatrixXd g(n, static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c) {
      auto rng = make_stream(seed, exp_id, first + c);
      std::normal_distribution<double> normal;
      for (Eigen::Index i = 0; i < n; ++i)
        g(i, static_cast<Eigen::Index>(c)) = std::sqrt(var_y[static_cast<std::size_t>(i)]) * normal(rng);
    }
    const Eigen::MatrixXd t = w * g;
    for (std::size_t c = 0; c < count; ++c) out[first + c] = t.col(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff();
  });
  return out;
}

inline PoSIResult simulate_max_t(const DesignMatrix& x, std::size_t k, const std::vector<double>& var_y,
                                 const std::vector<double>& alphas, std::size_t reps, std::uint64_t seed,
                                 unsigned workers = 1, std::size_t cap = kDefaultCap) {
  require(reps >= 1000, ErrorKind::invalid_argument, "simulate_max_t needs reps >= 1000");
  for (double a : alphas) require(a > 0.0 && a < 1.0, ErrorKind::invalid_argument, "alpha must lie in (0,1)");
  PoSIResult res;
  res.k = k;
  res.reps = reps;
  res.seed = seed;
  res.kappa = rip_kappa(x, k, cap);
  const auto models = enumerate_submodels(x.d(), k, cap);
  res.n_models = models.size();
  for (const auto& m : models) res.n_statistics += m.size();
  auto draws = sample_max_t(x, k, var_y, reps, seed, workers, cap);
  std::sort(draws.begin(), draws.end());
  res.mu_posi = sample_median(draws);
  const double nr = static_cast<double>(reps);
  const double h = 1.0 / std::sqrt(nr);
  for (double a : alphas) {
    const double level = 1.0 - a;
    res.quantile[a] = order_quantile(draws, level);
    // sqrt(l(1-l)/n) / density, density from a symmetric order-statistic difference
    const double lo = order_quantile(draws, std::max(level - h, 1.0 / nr));
    const double hi = order_quantile(draws, std::min(level + h, 1.0));
    const double span = std::min(level + h, 1.0) - std::max(level - h, 1.0 / nr);
    res.quantile_se[a] = std::sqrt(level * a / nr) * (hi - lo) / span;
  }
  return res;
}

inline PoSIResult simulate_max_t(const DesignMatrix& x, std::size_t k, double var_y,
                                 const std::vector<double>& alphas, std::size_t reps, std::uint64_t seed,
                                 unsigned workers = 1, std::size_t cap = kDefaultCap) {
  return simulate_max_t(x, k, std::vector<double>(x.n(), var_y), alphas, reps, seed, workers, cap);
}

/// sqrt(2 log 2d) + C(kappa) kappa sqrt(2k log(6d/k)), with C(kappa) = c_kappa.
inline double posi_width_bound(double kappa, std::size_t d, std::size_t k, double c_kappa = 1.0) {
  require(kappa >= 0.0 && kappa < 1.0, ErrorKind::invalid_argument, "posi_width_bound needs kappa in [0,1)");
  require(d >= 1 && k >= 1 && k <= d, ErrorKind::invalid_argument, "posi_width_bound needs 1 <= k <= d");
  const double dd = static_cast<double>(d), kk = static_cast<double>(k);
  return std::sqrt(2.0 * std::log(2.0 * dd)) + c_kappa * kappa * std::sqrt(2.0 * kk * std::log(6.0 * dd / kk));
}

/// 2[(5/4)^m Delta + 5^m Phi_AC,0 delta^{m+1}] + Phi_AC,m delta + r^m tail.
inline double mam_bound(double delta_psi_nm, double phi_ac0, double phi_acm, double delta, double m, double r,
                        double tail_rn) {
  require(delta_psi_nm >= 0.0 && phi_ac0 >= 0.0 && phi_acm >= 0.0 && delta > 0.0 && m >= 0.0 && r >= 0.0 &&
              tail_rn >= 0.0,
          ErrorKind::invalid_argument, "mam_bound inputs must be nonnegative and delta positive");
  return 2.0 * (std::pow(1.25, m) * delta_psi_nm + std::pow(5.0, m) * phi_ac0 * std::pow(delta, m + 1.0)) +
         phi_acm * delta + std::pow(r, m) * tail_rn;
}

}  // namespace hdclt::posi
