#pragma once

// Sampleable families X in R^p with a matched Gaussian partner Y, plus the
// pseudo-moment functionals that feed the rate bounds.
//
// Every family is a linear image X = L xi of iid standardized coordinates xi
// (unit variance, symmetric), with L the Cholesky factor of the covariance.
// Because the map is linear, a normalized sum n^{-1/2} sum_i X_i equals
// L n^{-1/2} sum_i xi_i, so sums are drawn coordinate-wise without ever
// materializing the n x p sample.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "hdclt/config.hpp"
#include "hdclt/constants.hpp"
#include "hdclt/core/error.hpp"
#include "hdclt/core/normal.hpp"
#include "hdclt/core/parallel.hpp"
#include "hdclt/core/rng.hpp"
#include "hdclt/core/stats.hpp"
#include "hdclt/covariance.hpp"
#include "hdclt/gaussmax.hpp"

namespace hdclt::randvec {

enum class Base { gaussian, rademacher, subweibull, laplace, student_t };

inline std::string to_string(Base b) {
  switch (b) {
    case Base::gaussian: return "gaussian";
    case Base::rademacher: return "rademacher";
    case Base::subweibull: return "subweibull";
    case Base::laplace: return "laplace";
    case Base::student_t: return "student_t";
  }
  return "unknown";
}

inline Base base_from_string(const std::string& s) {
  for (Base b : {Base::gaussian, Base::rademacher, Base::subweibull, Base::laplace, Base::student_t})
    if (to_string(b) == s) return b;
  throw Error(ErrorKind::config, "unknown family base '" + s +
                                     "' (expected gaussian, rademacher, subweibull, laplace, student_t)");
}

class DistributionFamily {
 public:
  static DistributionFamily gaussian(CovarianceSpec cov) { return {Base::gaussian, 2.0, 0.0, std::move(cov)}; }
  static DistributionFamily rademacher(CovarianceSpec cov) { return {Base::rademacher, 2.0, 0.0, std::move(cov)}; }
  static DistributionFamily laplace(CovarianceSpec cov) { return {Base::laplace, 1.0, 0.0, std::move(cov)}; }

  static DistributionFamily subweibull(double alpha, CovarianceSpec cov) {
    require(alpha > 0.0 && alpha <= 2.0, ErrorKind::invalid_argument,
            "subweibull alpha must lie in (0, 2]");
    return {Base::subweibull, alpha, 0.0, std::move(cov)};
  }

  static DistributionFamily student_t(double df, CovarianceSpec cov) {
    require(df > 2.0 && std::isfinite(df), ErrorKind::invalid_argument,
            "student_t needs df > 2 for a finite covariance");
    return {Base::student_t, 0.0, df, std::move(cov)};
  }

  Base base() const { return base_; }
  double alpha() const { return alpha_; }
  double df() const { return df_; }
  const CovarianceSpec& covariance() const { return cov_; }
  std::size_t p() const { return cov_.dim(); }
  bool is_gaussian() const { return base_ == Base::gaussian; }

  std::string id() const {
    std::string s = to_string(base_);
    if (base_ == Base::subweibull) s += "(" + format_double(alpha_) + ")";
    if (base_ == Base::student_t) s += "(" + format_double(df_) + ")";
    return s + "/" + cov_.id();
  }

  /// Scale c with xi = c s E^{1/alpha} of unit variance (subweibull only).
  double subweibull_scale() const { return 1.0 / std::sqrt(std::tgamma(1.0 + 2.0 / alpha_)); }

  /// E|xi|^q for one standardized coordinate; infinite moments raise.
  double std_abs_moment(double q) const {
    require(q >= 0.0, ErrorKind::invalid_argument, "moment order must be >= 0");
    switch (base_) {
      case Base::gaussian: return abs_normal_moment(q);
      case Base::rademacher: return 1.0;
      case Base::laplace: return std::tgamma(q + 1.0) * std::pow(std::numbers::sqrt2 / 2.0, q);
      case Base::subweibull:
        return std::pow(subweibull_scale(), q) * std::tgamma(1.0 + q / alpha_);
      case Base::student_t: {
        check_t_moment(q);
        // E|T|^q = df^{q/2} Gamma((q+1)/2) Gamma((df-q)/2) / (sqrt(pi) Gamma(df/2))
        const double scale = std::sqrt((df_ - 2.0) / df_);
        const double log_m = 0.5 * q * std::log(df_) + std::lgamma((q + 1.0) / 2.0) +
                             std::lgamma((df_ - q) / 2.0) - 0.5 * std::log(std::numbers::pi) -
                             std::lgamma(df_ / 2.0);
        return std::pow(scale, q) * std::exp(log_m);
      }
    }
    return 0.0;
  }

  /// P(|xi| > s) for one standardized coordinate.
  double std_abs_sf(double s) const {
    if (s < 0.0) return 1.0;
    switch (base_) {
      case Base::gaussian: return std::erfc(s / std::numbers::sqrt2);
      case Base::rademacher: return s < 1.0 ? 1.0 : 0.0;
      case Base::laplace: return std::exp(-s * std::numbers::sqrt2);
      case Base::subweibull: return std::exp(-std::pow(s / subweibull_scale(), alpha_));
      case Base::student_t: {
        const boost::math::students_t dist(df_);
        return 2.0 * boost::math::cdf(boost::math::complement(dist, s / std::sqrt((df_ - 2.0) / df_)));
      }
    }
    return 0.0;
  }

  void check_t_moment(double q) const {
    if (base_ == Base::student_t && q >= df_)
      throw Error(ErrorKind::moment_diverges,
                  "moment diverges: E|X|^" + format_double(q) + " is infinite for " + id());
  }

  friend bool operator==(const DistributionFamily& a, const DistributionFamily& b) {
    return a.base_ == b.base_ && a.alpha_ == b.alpha_ && a.df_ == b.df_ && a.cov_ == b.cov_;
  }

 private:
  DistributionFamily(Base base, double alpha, double df, CovarianceSpec cov)
      : base_(base), alpha_(alpha), df_(df), cov_(std::move(cov)) {}

  Base base_;
  double alpha_;
  double df_;
  CovarianceSpec cov_;
};

inline DistributionFamily matched_gaussian(const DistributionFamily& f) {
  return DistributionFamily::gaussian(f.covariance());
}

// Sampling -----------------------------------------------------------------

/// Per-stream draw state for standardized coordinates.
class CoordinateDrawer {
 public:
  explicit CoordinateDrawer(const DistributionFamily& f)
      : base_(f.base()),
        alpha_(f.alpha()),
        sw_scale_(f.base() == Base::subweibull ? f.subweibull_scale() : 1.0),
        t_scale_(f.base() == Base::student_t ? std::sqrt((f.df() - 2.0) / f.df()) : 1.0),
        student_(f.base() == Base::student_t ? f.df() : 3.0) {}

  template <class Rng>
  double normal(Rng& rng) { return normal_(rng); }

  template <class Rng>
  double operator()(Rng& rng) {
    switch (base_) {
      case Base::gaussian: return normal_(rng);
      case Base::rademacher: return (rng() >> 63) ? 1.0 : -1.0;
      case Base::laplace: return sign(rng) * exponential_(rng) / std::numbers::sqrt2;
      case Base::subweibull: return sign(rng) * sw_scale_ * std::pow(exponential_(rng), 1.0 / alpha_);
      case Base::student_t: return t_scale_ * student_(rng);
    }
    return 0.0;
  }

  /// sum_{i<k} xi_i, exactly in law.
  template <class Rng>
  double sum(std::uint64_t k, Rng& rng) {
    if (k == 0) return 0.0;
    if (base_ == Base::gaussian) return std::sqrt(static_cast<double>(k)) * normal_(rng);
    if (base_ == Base::rademacher) {
      std::uint64_t ones = 0;
      std::uint64_t left = k;
      while (left >= 64) {
        ones += static_cast<std::uint64_t>(std::popcount(rng()));
        left -= 64;
      }
      if (left) ones += static_cast<std::uint64_t>(std::popcount(rng() >> (64 - left)));
      return 2.0 * static_cast<double>(ones) - static_cast<double>(k);
    }
    double s = 0.0;
    for (std::uint64_t i = 0; i < k; ++i) s += (*this)(rng);
    return s;
  }

  /// Number of generator elements `sum(k)` consumes (for the budget guardrail).
  std::uint64_t sum_cost(std::uint64_t k) const {
    if (k == 0) return 0;
    if (base_ == Base::gaussian) return 1;
    if (base_ == Base::rademacher) return (k + 63) / 64;
    return k;
  }

 private:
  template <class Rng>
  double sign(Rng& rng) { return (rng() >> 63) ? 1.0 : -1.0; }

  Base base_;
  double alpha_;
  double sw_scale_;
  double t_scale_;
  std::normal_distribution<double> normal_;
  std::exponential_distribution<double> exponential_;
  std::student_t_distribution<double> student_;
};

/// n independent rows of the family; row i uses stream (seed, "randvec/sample_x", 0, i).
inline Eigen::MatrixXd sample_x(const DistributionFamily& f, std::size_t n, std::uint64_t seed,
                                unsigned workers = 1) {
  require(n >= 1, ErrorKind::invalid_argument, "sample_x needs n >= 1");
  const auto p = static_cast<Eigen::Index>(f.p());
  const Eigen::MatrixXd& L = f.covariance().cholesky();
  const bool diag = f.covariance().is_diagonal();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), p);
  const std::uint64_t exp_id = experiment_id("randvec/sample_x");
  parallel_for(n, workers, [&](std::size_t i) {
    auto rng = make_stream(seed, exp_id, 0, i);
    CoordinateDrawer draw(f);
    Eigen::VectorXd xi(p);
    for (Eigen::Index j = 0; j < p; ++j) xi(j) = draw(rng);
    const auto row = static_cast<Eigen::Index>(i);
    if (diag)
      out.row(row) = L.diagonal().cwiseProduct(xi).transpose();
    else
      out.row(row) = (L.triangularView<Eigen::Lower>() * xi).transpose();
  });
  return out;
}

inline void write_sample_csv(const Eigen::MatrixXd& x, std::ostream& os) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) os << (j ? "," : "") << "x" << j + 1;
  os << "\n";
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) os << (j ? "," : "") << format_double(x(i, j));
    os << "\n";
  }
}

/// Draws ||U_{n,k}||_inf with U_{n,k} = n^{-1/2}(X_1 + ... + X_k + Y_{k+1} + ... + Y_n).
/// k = n gives S_n and k = 0 gives the Gaussian U_{n,0}.
class PathSampler {
 public:
  PathSampler(const DistributionFamily& f, std::uint64_t n, std::uint64_t k)
      : family_(f), n_(n), k_(k), diag_(f.covariance().is_diagonal()) {
    require(n >= 1, ErrorKind::invalid_argument, "sample size n must be >= 1");
    require(k <= n, ErrorKind::invalid_argument, "interpolation index k must lie in [0, n]");
  }

  template <class Rng>
  double operator()(Rng& rng, CoordinateDrawer& draw, Eigen::VectorXd& buf) const {
    const auto p = static_cast<Eigen::Index>(family_.p());
    buf.resize(p);
    const double gauss_scale = std::sqrt(static_cast<double>(n_ - k_));
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n_));
    for (Eigen::Index j = 0; j < p; ++j) {
      if (family_.is_gaussian() || k_ == 0) {
        buf(j) = draw.normal(rng);
      } else {
        double v = draw.sum(k_, rng);
        if (k_ < n_) v += gauss_scale * draw.normal(rng);
        buf(j) = v * inv_sqrt_n;
      }
    }
    const Eigen::MatrixXd& L = family_.covariance().cholesky();
    if (diag_) return L.diagonal().cwiseProduct(buf).cwiseAbs().maxCoeff();
    return (L.triangularView<Eigen::Lower>() * buf).cwiseAbs().maxCoeff();
  }

  /// Generator elements consumed per draw.
  std::uint64_t cost(const CoordinateDrawer& draw) const {
    if (family_.is_gaussian() || k_ == 0) return family_.p();
    return family_.p() * (draw.sum_cost(k_) + (k_ < n_ ? 1 : 0));
  }

 private:
  const DistributionFamily& family_;
  std::uint64_t n_, k_;
  bool diag_;
};

// Orlicz norms ---------------------------------------------------------------

/// Bound on E||X||_inf^q for coordinates with psi_alpha norm at most K_p.
inline double orlicz_bound(double K_p, double alpha, double p, double q) {
  require(alpha > 0.0, ErrorKind::invalid_argument, "orlicz_bound: alpha must be > 0");
  require(q >= 1.0, ErrorKind::invalid_argument, "orlicz_bound: q must be >= 1");
  require(K_p > 0.0 && p >= 1.0, ErrorKind::invalid_argument, "orlicz_bound: K_p > 0 and p >= 1");
  const double a = std::pow(2.0, 1.0 / q) * std::pow(6.0 * q / (std::numbers::e * alpha), 1.0 / alpha);
  const double b = std::pow(2.0, 1.0 / alpha) * std::pow(std::log(p), 1.0 / alpha);
  return std::pow(K_p, q) * std::pow(a + b, q);
}

/// psi_alpha norm of one standardized coordinate, at the family's natural alpha
/// (2 for gaussian and rademacher, 1 for laplace).
inline double std_psi_norm(const DistributionFamily& f) {
  switch (f.base()) {
    case Base::gaussian: return std::sqrt(8.0 / 3.0);
    case Base::rademacher: return 1.0 / std::sqrt(std::numbers::ln2);
    case Base::laplace: return std::numbers::sqrt2;  // 2 b with b = 1/sqrt(2)
    case Base::subweibull: return std::pow(2.0, 1.0 / f.alpha()) * f.subweibull_scale();
    case Base::student_t: break;
  }
  throw Error(ErrorKind::invalid_argument, "student_t coordinates have no finite psi_alpha norm");
}

/// Tail index alpha used with std_psi_norm.
inline double natural_alpha(const DistributionFamily& f) {
  switch (f.base()) {
    case Base::gaussian:
    case Base::rademacher: return 2.0;
    case Base::laplace: return 1.0;
    case Base::subweibull: return f.alpha();
    case Base::student_t: break;
  }
  throw Error(ErrorKind::invalid_argument, "student_t coordinates have no finite psi_alpha norm");
}

/// K_p = max_j ||X(j)||_{psi_alpha}. Correlated coordinates use the triangle
/// inequality over the Cholesky row, which needs alpha >= 1.
inline double psi_norm_bound(const DistributionFamily& f) {
  const double k = std_psi_norm(f);
  const Eigen::MatrixXd& L = f.covariance().cholesky();
  if (f.covariance().is_diagonal() || f.is_gaussian()) return k * f.covariance().sigma_max();
  require(natural_alpha(f) >= 1.0, ErrorKind::invalid_argument,
          "psi_alpha bound for correlated coordinates needs alpha >= 1");
  return k * L.cwiseAbs().rowwise().sum().maxCoeff();
}

// Pseudo-moments -------------------------------------------------------------

enum class MomentMethod { closed_form, quadrature, monte_carlo };

inline std::string to_string(MomentMethod m) {
  switch (m) {
    case MomentMethod::closed_form: return "closed_form";
    case MomentMethod::quadrature: return "quadrature";
    case MomentMethod::monte_carlo: return "monte_carlo";
  }
  return "unknown";
}

struct PseudoMomentReport {
  double n = 1.0;
  double mu = 0.0;
  double sigma_max = 1.0;
  double L_n = 0.0;
  double phi = 0.0;
  double M_n_of_phi = 0.0;
  double Lbar_n0 = 0.0;
  std::map<double, double> Lbar_nm;
  std::map<double, double> nu_q;
  MomentMethod method = MomentMethod::closed_form;
  double mc_se = 0.0;
};

struct PseudoMomentOptions {
  std::optional<double> mu;  // median of ||Y||_inf; estimated when absent
  std::size_t mc_reps = 100000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/// Pseudo-moment functionals with |zeta| bounded by law(X) + law(Y).
///
/// Diagonal covariances use closed-form marginals and quadrature of the
/// product CDF of ||.||_inf; otherwise the non-closed parts come from a fixed
/// Monte Carlo sample drawn once at construction.
class PseudoMoments {
 public:
  PseudoMoments(DistributionFamily family, double n, PseudoMomentOptions opts = {})
      : f_(std::move(family)), n_(n), opts_(opts) {
    require(n >= 1.0, ErrorKind::invalid_argument, "pseudo-moments need n >= 1");
    const auto& cov = f_.covariance();
    diag_ = cov.is_diagonal();
    smax_ = cov.sigma_max();
    sd_.resize(cov.dim());
    for (std::size_t j = 0; j < sd_.size(); ++j) sd_[j] = std::sqrt(cov.variance(j));
    if (opts_.mu) {
      mu_ = *opts_.mu;
    } else {
      mu_ = gaussmax::estimate_summary(cov, std::max<std::size_t>(opts_.mc_reps, 1000), opts_.seed,
                                       opts_.workers)
                .median_mu;
    }
    if (!diag_) {
      draw_mc_sample();
    } else {
      if (f_.base() != Base::rademacher) x_table_ = build_tail_table(false);
      y_table_ = build_tail_table(true);
    }
  }

  const DistributionFamily& family() const { return f_; }
  double n() const { return n_; }
  double mu() const { return mu_; }
  MomentMethod method() const { return method_; }
  double mc_se() const { return mc_se_; }

  /// max_j (E|X(j)|^q + E|Y(j)|^q).
  double weak(double q) const {
    f_.check_t_moment(q);
    if (diag_ || f_.is_gaussian()) {
      note(MomentMethod::closed_form);
      const double cx = f_.std_abs_moment(q), cy = abs_normal_moment(q);
      double best = 0.0;
      for (double s : sd_) best = std::max(best, std::pow(s, q) * (cx + cy));
      return best;
    }
    note(MomentMethod::monte_carlo);
    const auto p = xs_.cols();
    double best = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      std::vector<double> v(static_cast<std::size_t>(xs_.rows()));
      for (Eigen::Index i = 0; i < xs_.rows(); ++i) v[static_cast<std::size_t>(i)] = std::pow(std::abs(xs_(i, j)), q);
      const auto ms = mean_and_se(v);
      const double val = ms.mean + std::pow(sd_[static_cast<std::size_t>(j)], q) * abs_normal_moment(q);
      if (val > best) {
        best = val;
        mc_se_ = std::max(mc_se_, ms.se);
      }
    }
    return best;
  }

  double L_n() const { return weak(3.0); }

  /// (E||X||^q + E||Y||^q)^{1/q}.
  double nu(double q) const {
    f_.check_t_moment(q);
    return std::pow(sup_moment(q, false) + sup_moment(q, true), 1.0 / q);
  }

  /// E||X||^2 1{||X|| >= sqrt(n) phi / log(ep)} + the same for Y.
  double M_n(double phi) const {
    require(phi > 0.0, ErrorKind::invalid_argument, "truncation scale phi must be > 0");
    const double a = std::sqrt(n_) * phi / constants::log_ep(static_cast<double>(f_.p()));
    return truncated_second(a, false) + truncated_second(a, true);
  }

  double Lbar_n0() const { return (mu_ + smax_) * L_n(); }

  double Lbar_nm(double m) const {
    return (std::pow(mu_, m + 1.0) + std::pow(smax_, m + 1.0) * std::pow((m + 1.0) / std::numbers::e, (m + 1.0) / 2.0)) *
           L_n();
  }

  constants::MomentInputs inputs() const {
    constants::MomentInputs in;
    in.L_n = L_n();
    in.Lbar_n0 = (mu_ + smax_) * in.L_n;
    in.Lbar_nm = [this](double m) { return Lbar_nm(m); };
    in.nu = [this](double q) { return nu(q); };
    in.weak = [this](double q) { return weak(q); };
    in.M_n = [this](double phi) { return M_n(phi); };
    return in;
  }

  PseudoMomentReport report(double m, double phi, const std::vector<double>& q_list) const {
    PseudoMomentReport r;
    r.n = n_;
    r.mu = mu_;
    r.sigma_max = smax_;
    r.L_n = L_n();
    r.phi = phi;
    r.M_n_of_phi = M_n(phi);
    r.Lbar_n0 = Lbar_n0();
    r.Lbar_nm[m] = Lbar_nm(m);
    for (double q : q_list) r.nu_q[q] = nu(q);
    r.method = method_;
    r.mc_se = mc_se_;
    return r;
  }

 private:
  void note(MomentMethod m) const {
    if (static_cast<int>(m) > static_cast<int>(method_)) method_ = m;
  }

  void draw_mc_sample() {
    const auto reps = opts_.mc_reps;
    xs_ = sample_x(f_, reps, opts_.seed ^ 0x5eedULL, opts_.workers);
    x_norms_.resize(reps);
    for (std::size_t i = 0; i < reps; ++i) x_norms_[i] = xs_.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff();
    y_norms_ = gaussmax::sample_sup_norms(f_.covariance(), reps, opts_.seed,
                                          experiment_id("randvec/pseudo_moments/y"), opts_.workers);
  }

  // log P(||.|| <= s) for independent coordinates.
  double log_sup_cdf(double s, bool gaussian) const {
    double acc = 0.0;
    for (double sd : sd_) {
      const double t = gaussian ? std::erfc(s / sd / std::numbers::sqrt2) : f_.std_abs_sf(s / sd);
      if (t >= 1.0) return -INFINITY;
      acc += std::log1p(-t);
    }
    return acc;
  }

  double sup_sf(double s, bool gaussian) const { return -std::expm1(log_sup_cdf(s, gaussian)); }

  double sup_moment(double q, bool gaussian) const {
    if (diag_ && !gaussian && f_.base() == Base::rademacher) {
      note(MomentMethod::closed_form);
      return std::pow(smax_, q);
    }
    if (diag_) {
      if (sd_.size() == 1) {
        note(MomentMethod::closed_form);
        return std::pow(sd_[0], q) * (gaussian ? abs_normal_moment(q) : f_.std_abs_moment(q));
      }
      note(MomentMethod::quadrature);
      boost::math::quadrature::exp_sinh<double> integrator;
      auto g = [&](double s) { return s <= 0.0 ? 0.0 : q * std::pow(s, q - 1.0) * sup_sf(s, gaussian); };
      return integrator.integrate(g, 0.0, INFINITY);
    }
    note(MomentMethod::monte_carlo);
    const auto& norms = gaussian ? y_norms_ : x_norms_;
    std::vector<double> v(norms.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::pow(norms[i], q);
    const auto ms = mean_and_se(v);
    mc_se_ = std::max(mc_se_, ms.se);
    return ms.mean;
  }

  // Tail table for E[V^2 1{V >= a}] on a fixed knot grid. cum[k] is the
  // mass of V^2 on [s_k, inf) and is built right to left by adding
  // nonnegative cell integrals, so lookups are monotone in a exactly. A
  // query inside a cell returns the value at the cell's left knot, which
  // overstates the true value by at most one cell.
  struct TailTable {
    std::vector<double> knots;
    std::vector<double> cum;
  };

  TailTable build_tail_table(bool gaussian) const {
    TailTable t;
    const double h0 = smax_ / 128.0;
    const double s_cap = 1e6 * smax_;
    double s = 0.0;
    t.knots.push_back(0.0);
    while (s < s_cap && sup_sf(s, gaussian) > 1e-18) {
      s += h0 * std::max(1.0, s / (8.0 * smax_));
      t.knots.push_back(s);
    }
    const std::size_t k_last = t.knots.size() - 1;
    t.cum.assign(t.knots.size(), 0.0);
    auto tail_int = [&](double x) { return 2.0 * x * sup_sf(x, gaussian); };
    // Remainder beyond the last knot.
    const double end = t.knots[k_last];
    boost::math::quadrature::exp_sinh<double> integrator;
    const double rem = integrator.integrate([&](double u) { return tail_int(end + u); }, 0.0, INFINITY);
    t.cum[k_last] = std::max(0.0, end * end * sup_sf(end, gaussian) + rem);
    for (std::size_t k = k_last; k-- > 0;) {
      const double lo = t.knots[k], hi = t.knots[k + 1];
      const double inner = boost::math::quadrature::gauss<double, 10>::integrate(tail_int, lo, hi);
      const double cell = lo * lo * sup_sf(lo, gaussian) - hi * hi * sup_sf(hi, gaussian) + inner;
      t.cum[k] = t.cum[k + 1] + std::max(0.0, cell);
    }
    return t;
  }

  double truncated_second(double a, bool gaussian) const {
    if (diag_ && !gaussian && f_.base() == Base::rademacher) {
      note(MomentMethod::closed_form);
      return smax_ >= a ? smax_ * smax_ : 0.0;
    }
    if (diag_) {
      note(MomentMethod::quadrature);
      const TailTable& t = gaussian ? y_table_ : x_table_;
      if (a <= 0.0) return t.cum[0];
      const auto it = std::upper_bound(t.knots.begin(), t.knots.end(), a);
      const auto k = static_cast<std::size_t>(it - t.knots.begin()) - 1;
      if (k + 1 >= t.knots.size()) {
        // Beyond the grid: the remainder at the last knot still bounds it.
        return t.cum.back();
      }
      return t.cum[k];
    }
    note(MomentMethod::monte_carlo);
    const auto& norms = gaussian ? y_norms_ : x_norms_;
    std::vector<double> v(norms.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = norms[i] >= a ? norms[i] * norms[i] : 0.0;
    const auto ms = mean_and_se(v);
    mc_se_ = std::max(mc_se_, ms.se);
    return ms.mean;
  }

  DistributionFamily f_;
  double n_;
  PseudoMomentOptions opts_;
  bool diag_ = true;
  double smax_ = 1.0;
  double mu_ = 0.0;
  std::vector<double> sd_;
  Eigen::MatrixXd xs_;
  std::vector<double> x_norms_, y_norms_;
  TailTable x_table_, y_table_;
  mutable MomentMethod method_ = MomentMethod::closed_form;
  mutable double mc_se_ = 0.0;
};

inline PseudoMomentReport pseudo_moments(const DistributionFamily& f, double m, double phi,
                                         const std::vector<double>& q_list, double n,
                                         PseudoMomentOptions opts = {}) {
  return PseudoMoments(f, n, opts).report(m, phi, q_list);
}

// Config ---------------------------------------------------------------------

inline CovarianceSpec covariance_from_config(const Config& c, const std::string& prefix = "family") {
  const std::string kind = c.str(prefix + ".cov.kind", "diagonal");
  const auto params = c.list(prefix + ".cov.params", {1.0});
  const std::size_t p = c.count(prefix + ".p", 0);
  if (kind == "diagonal") {
    if (params.size() == 1 && p > 1) return CovarianceSpec::diagonal(std::vector<double>(p, params[0]));
    if (p && params.size() != p)
      throw Error(ErrorKind::config, prefix + ".cov.params has " + std::to_string(params.size()) +
                                         " variances but " + prefix + ".p = " + std::to_string(p));
    return CovarianceSpec::diagonal(params);
  }
  if (kind == "equicorrelated") {
    if (params.size() != 2) throw Error(ErrorKind::config, prefix + ".cov.params must be 'rho, sigma2'");
    if (!p) throw Error(ErrorKind::config, prefix + ".p is required for equicorrelated covariance");
    return CovarianceSpec::equicorrelated(params[0], params[1], p);
  }
  if (kind == "dense") {
    const auto d = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(params.size()))));
    if (d * d != params.size() || (p && d != p))
      throw Error(ErrorKind::config, prefix + ".cov.params must hold p*p row-major entries");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = params[i * d + j];
    return CovarianceSpec::dense(m);
  }
  throw Error(ErrorKind::config, prefix + ".cov.kind must be diagonal, equicorrelated or dense");
}

inline DistributionFamily family_from_config(const Config& c, const std::string& prefix = "family") {
  const Base base = base_from_string(c.str(prefix + ".base", "gaussian"));
  CovarianceSpec cov = covariance_from_config(c, prefix);
  switch (base) {
    case Base::gaussian: return DistributionFamily::gaussian(cov);
    case Base::rademacher: return DistributionFamily::rademacher(cov);
    case Base::laplace: return DistributionFamily::laplace(cov);
    case Base::subweibull: return DistributionFamily::subweibull(c.num(prefix + ".alpha", 1.0), cov);
    case Base::student_t: return DistributionFamily::student_t(c.num(prefix + ".df", 5.0), cov);
  }
  throw Error(ErrorKind::config, "unreachable family base");
}

/// Writes the family back as config keys; family_from_config inverts this exactly.
inline void family_to_config(const DistributionFamily& f, Config& c, const std::string& prefix = "family") {
  c.set(prefix + ".base", to_string(f.base()));
  if (f.base() == Base::subweibull) c.set(prefix + ".alpha", f.alpha());
  if (f.base() == Base::student_t) c.set(prefix + ".df", f.df());
  const auto& cov = f.covariance();
  c.set(prefix + ".cov.kind", to_string(cov.kind()));
  c.set(prefix + ".p", static_cast<double>(cov.dim()));
  std::vector<double> params = cov.params();
  if (cov.kind() == CovKind::equicorrelated) params.resize(2);
  c.set(prefix + ".cov.params", join_doubles(params));
}

}  // namespace hdclt::randvec
