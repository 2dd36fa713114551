#pragma once

// Smooth approximation of the indicator of an l_inf ball.
//
//   F_beta(z) = beta^{-1} log sum_j exp(beta z_j)          (softmax, z in R^{2p})
//   g0(t)     = 1 - 10 t^3 + 15 t^4 - 6 t^5 on [0,1]        (C^2 bump)
//   phi(x)    = g0(2 F_beta(z_x - r) / eps - 1),  z_x = (x, -x),  beta = 2 log(2p) / eps
//
// phi is 1 on the r-ball and 0 outside the (r+eps)-ball.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hdclt/constants.hpp"
#include "hdclt/core/error.hpp"
#include "hdclt/core/parallel.hpp"
#include "hdclt/core/rng.hpp"

namespace hdclt::smoothmax {

struct SmoothMaxParams {
  double r = 0.0;
  double eps = 1.0;
  std::size_t p = 1;
  double beta = 0.0;

  SmoothMaxParams() = default;
  SmoothMaxParams(double r_, double eps_, std::size_t p_)
      : r(r_), eps(eps_), p(p_), beta(2.0 * std::log(2.0 * static_cast<double>(p_)) / eps_) {
    require(r_ >= 0.0, ErrorKind::invalid_argument, "smooth max: r must be >= 0");
    require(eps_ > 0.0 && std::isfinite(eps_), ErrorKind::invalid_argument, "smooth max: eps must be > 0");
    require(p_ >= 1, ErrorKind::invalid_argument, "smooth max: p must be >= 1");
  }
};

/// Softmax (1/beta) log sum exp(beta z_j), shifted by the max.
inline double f_beta(std::span<const double> z, double beta) {
  require(!z.empty() && beta > 0.0, ErrorKind::invalid_argument, "f_beta needs nonempty z, beta > 0");
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(beta * (v - m));
  return m + std::log(s) / beta;
}

inline double g0(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  return 1.0 + t * t * t * (-10.0 + t * (15.0 - 6.0 * t));
}

inline double g0_prime(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return -30.0 * t * t * (1.0 - t) * (1.0 - t);
}

namespace detail {

inline double sup_norm(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

// Softmax argument t = 2 F / eps - 1 and, if requested, the weight
// differences pi_j - pi_{p+j}.
inline double bump_argument(std::span<const double> x, const SmoothMaxParams& prm,
                            std::vector<double>* dweights) {
  double m = -INFINITY;
  for (double v : x) m = std::max(m, std::abs(v) - prm.r);
  double s = 0.0;
  for (double v : x) s += std::exp(prm.beta * (v - prm.r - m)) + std::exp(prm.beta * (-v - prm.r - m));
  const double F = m + std::log(s) / prm.beta;
  if (dweights) {
    dweights->resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      (*dweights)[j] = (std::exp(prm.beta * (x[j] - prm.r - m)) - std::exp(prm.beta * (-x[j] - prm.r - m))) / s;
  }
  return 2.0 * F / prm.eps - 1.0;
}

}  // namespace detail

inline double phi_r_eps(std::span<const double> x, const SmoothMaxParams& prm) {
  require(x.size() == prm.p, ErrorKind::invalid_argument, "phi_r_eps: x has the wrong dimension");
  const double norm = detail::sup_norm(x);
  if (norm <= prm.r) return 1.0;
  if (norm > prm.r + prm.eps) return 0.0;
  return g0(detail::bump_argument(x, prm, nullptr));
}

/// Analytic gradient: g0'(t) (2/eps) (pi_j - pi_{p+j}).
inline void gradient(std::span<const double> x, const SmoothMaxParams& prm, std::vector<double>& out) {
  std::vector<double> dw;
  const double t = detail::bump_argument(x, prm, &dw);
  const double scale = g0_prime(t) * 2.0 / prm.eps;
  out.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = scale * dw[j];
}

// Derivative-sum certification ---------------------------------------------

struct CertRow {
  std::size_t sample_id = 0;
  std::string quantity;
  double observed = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct DerivativeCertification {
  std::vector<CertRow> rows;
  // Smallest C0 that would make every sampled sum pass, per quantity.
  double required_c0_first = 0.0;
  double required_c0_second = 0.0;
  double required_c0_third = 0.0;
  double required_c0_envelope = 0.0;
  bool pass = true;
};

struct DerivativeSums {
  double first = 0.0;
  double second = 0.0;
  double third = 0.0;
};

/// Sums of absolute first, second and third partial derivatives at x.
/// Second and third derivatives are central differences of the analytic
/// gradient with step h. Third-derivative sums enumerate the index l
/// exhaustively when `l_subset` is empty and otherwise sum over the given
/// subset and rescale by p / |subset|.
inline DerivativeSums derivative_sums(std::span<const double> x, const SmoothMaxParams& prm, double h,
                                      std::span<const std::size_t> l_subset = {}) {
  const std::size_t p = prm.p;
  DerivativeSums out;
  std::vector<double> g, gp, gm, y(x.begin(), x.end());
  gradient(x, prm, g);
  for (double v : g) out.first += std::abs(v);
  for (std::size_t k = 0; k < p; ++k) {
    y[k] = x[k] + h;
    gradient(y, prm, gp);
    y[k] = x[k] - h;
    gradient(y, prm, gm);
    y[k] = x[k];
    for (std::size_t j = 0; j < p; ++j) out.second += std::abs(gp[j] - gm[j]) / (2.0 * h);
  }
  std::vector<std::size_t> ls;
  if (l_subset.empty()) {
    for (std::size_t l = 0; l < p; ++l) ls.push_back(l);
  } else {
    ls.assign(l_subset.begin(), l_subset.end());
  }
  std::vector<double> gpp, gpm, gmp, gmm;
  double third = 0.0;
  for (std::size_t l : ls) {
    for (std::size_t k = 0; k < p; ++k) {
      auto at = [&](double dl, double dk, std::vector<double>& dst) {
        y[l] += dl;
        y[k] += dk;
        gradient(y, prm, dst);
        y.assign(x.begin(), x.end());
      };
      at(h, h, gpp);
      at(h, -h, gpm);
      at(-h, h, gmp);
      at(-h, -h, gmm);
      for (std::size_t j = 0; j < p; ++j)
        third += std::abs(gpp[j] - gpm[j] - gmp[j] + gmm[j]) / (4.0 * h * h);
    }
  }
  out.third = third * static_cast<double>(p) / static_cast<double>(ls.size());
  return out;
}

// Stabilized first-derivative envelope ----------------------------------------

/// D_j(x) = (3.75/eps) sup_{t >= 0} e^{-lambda t} W_j(x, t) with
/// W_j(x, t) = cosh(beta(|x_j| + t)) / (cosh(beta(|x_j| + t)) + sum_{k != j} cosh(beta max(|x_k| - t, 0)))
/// and lambda = frakC log(ep) / eps.
///
/// W_j(x, 0) bounds |pi_j - pi_{p+j}| and W_j(x, t) is the largest value of
/// W_j(y, 0) over ||y - x||_inf <= t, so D_j is the sup-convolution of the
/// plain softmax envelope with exp(-lambda ||.||_inf). That makes
/// D(x+w)/D(x) lie in [e^{-lambda||w||}, e^{lambda||w||}] exactly.
class StableEnvelope {
 public:
  StableEnvelope(const SmoothMaxParams& prm, double frakC)
      : prm_(prm), lambda_(frakC * constants::log_ep(static_cast<double>(prm.p)) / prm.eps) {}

  double lambda() const { return lambda_; }

  /// log of (eps/3.75) D_j(x).
  double log_scaled(std::span<const double> x, std::size_t j) const {
    std::vector<double> a(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) a[k] = std::abs(x[k]);
    // Breakpoints where a term max(|x_k| - t, 0) hits zero.
    std::vector<double> knots{0.0};
    for (std::size_t k = 0; k < a.size(); ++k)
      if (k != j && a[k] > 0.0) knots.push_back(a[k]);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    auto obj = [&](double t) { return objective(a, j, t); };
    double best = obj(0.0);
    // W_j <= 1, so nothing beyond t with -lambda t < best can win.
    const double horizon = lambda_ > 0.0 ? -best / lambda_ + 1e-12 : knots.back() + 10.0 * prm_.eps;
    knots.push_back(std::max(knots.back(), horizon) + prm_.eps);
    // Coarse scan of every segment, then golden-section refinement on the
    // two best grid cells.
    constexpr int kGrid = 8;
    struct Cell {
      double value, lo, hi;
    };
    std::vector<Cell> cells;
    for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
      const double lo = knots[s];
      const double hi = std::min(knots[s + 1], std::max(lo, horizon));
      if (hi <= lo) continue;
      const double step = (hi - lo) / kGrid;
      for (int g = 0; g <= kGrid; ++g) {
        const double t = lo + step * g;
        const double v = obj(t);
        best = std::max(best, v);
        cells.push_back({v, std::max(lo, t - step), std::min(hi, t + step)});
      }
    }
    const std::size_t keep = std::min<std::size_t>(2, cells.size());
    std::partial_sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(keep), cells.end(),
                      [](const Cell& u, const Cell& v) { return u.value > v.value; });
    for (std::size_t c = 0; c < keep; ++c)
      best = std::max(best, constants::golden_section_max(obj, cells[c].lo, cells[c].hi, 1e-14));
    return best;
  }

  double value(std::span<const double> x, std::size_t j) const {
    return 3.75 / prm_.eps * std::exp(log_scaled(x, j));
  }

 private:
  static double log_cosh(double u) {
    u = std::abs(u);
    return u + std::log1p(std::exp(-2.0 * u)) - std::numbers::ln2;
  }

  double objective(const std::vector<double>& a, std::size_t j, double t) const {
    const double num = log_cosh(prm_.beta * (a[j] + t));
    double m = num;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (k != j) m = std::max(m, log_cosh(prm_.beta * std::max(a[k] - t, 0.0)));
    double s = std::exp(num - m);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (k != j) s += std::exp(log_cosh(prm_.beta * std::max(a[k] - t, 0.0)) - m);
    return -lambda_ * t + num - (m + std::log(s));
  }

  SmoothMaxParams prm_;
  double lambda_;
};

namespace detail {

// A point inside the smoothing band: a random direction (uniform in the
// (r+eps) cube, with a random number of coordinates pushed into the shell)
// rescaled along its ray so that the bump argument t lands on a uniform
// target in (0, 1). t is increasing along rays, so bisection finds it.
template <class Rng>
std::vector<double> band_point(const SmoothMaxParams& prm, Rng& rng) {
  std::vector<double> x(prm.p);
  const double outer = prm.r + prm.eps;
  for (auto& v : x) v = outer * (2.0 * uniform_open(rng) - 1.0);
  const auto hits = 1 + static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(prm.p));
  for (std::size_t h = 0; h < std::min(hits, prm.p); ++h) {
    const auto j = static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(prm.p));
    const double sign = uniform_open(rng) < 0.5 ? -1.0 : 1.0;
    x[std::min(j, prm.p - 1)] = sign * (prm.r + prm.eps * uniform_open(rng));
  }
  const double target = uniform_open(rng);
  const double norm = sup_norm(x);
  std::vector<double> y(prm.p);
  auto t_at = [&](double scale) {
    for (std::size_t j = 0; j < prm.p; ++j) y[j] = x[j] * scale;
    return bump_argument(y, prm, nullptr);
  };
  double lo = 0.0, hi = (prm.r + prm.eps) / norm;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (t_at(mid) < target ? lo : hi) = mid;
  }
  t_at(0.5 * (lo + hi));
  return y;
}

}  // namespace detail

/// Certifies sum_j |d_j phi| <= C0/eps, sum_jk |d_jk phi| <= C0 log(ep)/eps^2,
/// sum_jkl |d_jkl phi| <= C0 log^2(ep)/eps^3 and sum_j D_j <= C0/eps for the
/// stabilized envelope, at `samples` random points near the band.
inline DerivativeCertification certify_derivative_bounds(const SmoothMaxParams& prm, double C0,
                                                         std::size_t samples, std::uint64_t seed,
                                                         double frakC = 1.0, unsigned workers = 1,
                                                         std::size_t l_subsample = 16) {
  require(samples >= 100, ErrorKind::invalid_argument, "certification needs samples >= 100");
  const double h = 1e-4 * prm.eps;
  require(h > 1e-12 * std::max(1.0, prm.r + prm.eps), ErrorKind::invalid_argument,
          "finite-difference step underflows: eps is too small relative to r");
  const double lep = constants::log_ep(static_cast<double>(prm.p));
  const double b1 = 1.0 / prm.eps, b2 = lep / (prm.eps * prm.eps), b3 = lep * lep / std::pow(prm.eps, 3);
  const bool exact = prm.p <= 8;
  const StableEnvelope env(prm, frakC);
  std::vector<DerivativeSums> sums(samples);
  std::vector<double> envelope(samples);
  const std::uint64_t exp_id = experiment_id("smoothmax/derivatives");
  parallel_for(samples, workers, [&](std::size_t s) {
    auto rng = make_stream(seed, exp_id, s);
    const auto x = detail::band_point(prm, rng);
    std::vector<std::size_t> subset;
    if (!exact) {
      const std::size_t k = std::min(l_subsample, prm.p);
      for (std::size_t i = 0; i < k; ++i)
        subset.push_back(std::min(prm.p - 1, static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(prm.p))));
    }
    sums[s] = derivative_sums(x, prm, h, subset);
    double e = 0.0;
    if (exact) {
      for (std::size_t j = 0; j < prm.p; ++j) e += env.value(x, j);
    } else {
      // The envelope costs O(p^2) per coordinate; a few indices suffice.
      const std::size_t k = std::min<std::size_t>(4, subset.size());
      for (std::size_t i = 0; i < k; ++i) e += env.value(x, subset[i]);
      e *= static_cast<double>(prm.p) / static_cast<double>(k);
    }
    envelope[s] = e;
  });
  DerivativeCertification cert;
  for (std::size_t s = 0; s < samples; ++s) {
    const CertRow rows[] = {
        {s, "first", sums[s].first, C0 * b1, sums[s].first <= C0 * b1},
        {s, "second", sums[s].second, C0 * b2, sums[s].second <= C0 * b2},
        {s, "third", sums[s].third, C0 * b3, sums[s].third <= C0 * b3},
        {s, "envelope_first", envelope[s], C0 * b1, envelope[s] <= C0 * b1},
    };
    for (const auto& row : rows) {
      cert.pass = cert.pass && row.pass;
      cert.rows.push_back(row);
    }
    cert.required_c0_first = std::max(cert.required_c0_first, sums[s].first / b1);
    cert.required_c0_second = std::max(cert.required_c0_second, sums[s].second / b2);
    cert.required_c0_third = std::max(cert.required_c0_third, sums[s].third / b3);
    cert.required_c0_envelope = std::max(cert.required_c0_envelope, envelope[s] / b1);
  }
  return cert;
}

// Ratio stability --------------------------------------------------------------

struct StabilityCertification {
  std::size_t pairs = 0;
  std::size_t checked = 0;       // (pair, j) combinations above the floor
  std::size_t skipped = 0;       // pairs with every D_j below the floor
  std::size_t violations = 0;
  double max_excess = -INFINITY;  // max of |log ratio| - lambda ||w||_inf
  double tolerance = 1e-8;        // accuracy of the numerical sup over t
  bool pass = true;
};

/// Checks e^{-lambda||w||} <= D_j(x+w)/D_j(x) <= e^{lambda||w||} for random
/// x near the band and ||w||_inf <= eps / log(ep).
inline StabilityCertification certify_stability(const SmoothMaxParams& prm, double frakC,
                                                std::size_t pairs, std::uint64_t seed,
                                                unsigned workers = 1, double floor = 1e-300) {
  require(pairs >= 100, ErrorKind::invalid_argument, "stability certification needs pairs >= 100");
  const StableEnvelope env(prm, frakC);
  const double wmax = prm.eps / constants::log_ep(static_cast<double>(prm.p));
  StabilityCertification cert;
  cert.pairs = pairs;
  struct PairResult {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double max_excess = -INFINITY;
  };
  std::vector<PairResult> res(pairs);
  const std::uint64_t exp_id = experiment_id("smoothmax/stability");
  parallel_for(pairs, workers, [&](std::size_t s) {
    auto rng = make_stream(seed, exp_id, s);
    const auto x = detail::band_point(prm, rng);
    std::vector<double> xw(x);
    double wn = 0.0;
    const double scale = wmax * uniform_open(rng);
    for (auto& v : xw) {
      const double w = scale * (2.0 * uniform_open(rng) - 1.0);
      wn = std::max(wn, std::abs(w));
      v += w;
    }
    const double log_floor = std::log(floor * prm.eps / 3.75);
    for (std::size_t j = 0; j < prm.p; ++j) {
      const double a = env.log_scaled(x, j);
      if (a < log_floor) continue;
      const double b = env.log_scaled(xw, j);
      const double excess = std::abs(b - a) - env.lambda() * wn;
      res[s].checked++;
      res[s].max_excess = std::max(res[s].max_excess, excess);
      if (excess > cert.tolerance) res[s].violations++;
    }
  });
  for (const auto& r : res) {
    cert.checked += r.checked;
    cert.skipped += (r.checked == 0);
    cert.violations += r.violations;
    cert.max_excess = std::max(cert.max_excess, r.max_excess);
  }
  cert.pass = cert.violations == 0;
  return cert;
}

}  // namespace hdclt::smoothmax
