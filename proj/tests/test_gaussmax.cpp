#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hdclt/gaussmax.hpp"
#include "oracles.hpp"

using namespace hdclt;
using namespace hdclt::gaussmax;

TEST(ExactSupCdf, SmallCases) {
  const std::vector<double> two = {1.0, 1.0};
  const double a = oracle::abs_normal_cdf(1.0);
  EXPECT_NEAR(exact_sup_cdf_diag(two, 1.0), a * a, 1e-14);
  EXPECT_NEAR(exact_sup_cdf_diag(two, 1.0), 0.46607, 1e-5);
  EXPECT_EQ(exact_sup_cdf_diag(two, 0.0), 0.0);
  EXPECT_EQ(exact_sup_cdf_diag(two, INFINITY), 1.0);
  const std::vector<double> one = {1.0};
  EXPECT_NEAR(exact_sup_cdf_diag(one, 0.6744897501960817), 0.5, 1e-14);
}

TEST(ExactSupCdf, Monotone) {
  std::vector<double> v = {0.5, 1.0, 3.0};
  double prev = 0.0;
  for (double r = 0.05; r < 8.0; r += 0.05) {
    const double c = exact_sup_cdf_diag(v, r);
    EXPECT_GE(c, prev);
    prev = c;
  }
  std::vector<double> smaller = {0.5, 1.0, 2.0};
  for (double r : {0.5, 1.0, 2.0}) EXPECT_GE(exact_sup_cdf_diag(smaller, r), exact_sup_cdf_diag(v, r));
  EXPECT_THROW(exact_sup_cdf_diag(std::vector<double>{1.0, -1.0}, 1.0), Error);
}

TEST(ExactSupCdf, QuantileInverts) {
  const std::vector<double> v(16, 1.0);
  const double q = exact_sup_quantile_diag(v, 0.5);
  EXPECT_NEAR(exact_sup_cdf_diag(v, q), 0.5, 1e-13);
  EXPECT_NEAR(q, oracle::max_abs_normal_quantile(16, 0.5), 1e-10);
}

TEST(Summary, ExactAndMonteCarlo) {
  const auto s = estimate_summary(CovarianceSpec::diagonal({1.0}), 1000, 0);
  EXPECT_EQ(s.method, Method::exact_diag);
  EXPECT_NEAR(s.median_mu, 0.67449, 1e-5);

  // rho near one collapses to a single coordinate
  const auto c = estimate_summary(CovarianceSpec::equicorrelated(0.999999, 1.0, 8), 20000, 3);
  EXPECT_EQ(c.method, Method::monte_carlo);
  EXPECT_NEAR(c.median_mu, 0.67449, 0.03);
  EXPECT_LE(c.mu_ci.first, c.median_mu);
  EXPECT_GE(c.mu_ci.second, c.median_mu);

  const auto e = estimate_summary(CovarianceSpec::equicorrelated(0.5, 1.0, 16), 20000, 3);
  EXPECT_EQ(e.sigma_min, 1.0);
  EXPECT_EQ(e.sigma_max, 1.0);
  EXPECT_GT(e.median_mu, 0.67449);
  EXPECT_LT(e.median_mu, oracle::max_abs_normal_quantile(16, 0.5));
}

TEST(Band, ExactValues) {
  const auto one = CovarianceSpec::diagonal({1.0});
  const auto b = band_probability(one, 1.0, 0.1, 1000, 0);
  EXPECT_TRUE(b.exact);
  EXPECT_NEAR(b.estimate, 2.0 * (oracle::normal_cdf(1.1) - oracle::normal_cdf(0.9)), 1e-14);
  EXPECT_NEAR(b.estimate, 0.096788, 1e-6);
  EXPECT_EQ(band_probability(one, 1.0, 0.0, 1000, 0).estimate, 0.0);

  const auto two = CovarianceSpec::diagonal({1.0, 1.0});
  const std::vector<double> v = {1.0, 1.0};
  EXPECT_NEAR(band_probability(two, 1.0, 0.1, 1000, 0).estimate,
              exact_sup_cdf_diag(v, 1.1) - exact_sup_cdf_diag(v, 0.9), 1e-15);
  for (double eps : {0.01, 0.05, 0.1, 0.3})
    EXPECT_LE(band_probability(two, 1.0, eps, 1000, 0).estimate,
              band_probability(two, 1.0, eps * 1.5, 1000, 0).estimate);
}

TEST(Band, MonteCarloNearExactForIndependent) {
  // equicorrelated with rho = 0 is stored diagonal; a dense identity forces MC
  const auto dense = CovarianceSpec::dense(Eigen::MatrixXd::Identity(3, 3) + 1e-300 * Eigen::MatrixXd::Ones(3, 3));
  const auto mc = band_probability(dense, 1.5, 0.2, 100000, 5);
  const std::vector<double> v(3, 1.0);
  const double exact = exact_sup_cdf_diag(v, 1.7) - exact_sup_cdf_diag(v, 1.3);
  EXPECT_NEAR(mc.estimate, exact, 4.0 * mc.se);
}

TEST(SupNorms, DeterministicAcrossWorkers) {
  const auto cov = CovarianceSpec::equicorrelated(0.3, 2.0, 5);
  const auto a = sample_sup_norms(cov, 3000, 9, experiment_id("t"), 1);
  const auto b = sample_sup_norms(cov, 3000, 9, experiment_id("t"), 4);
  EXPECT_EQ(a, b);
}

TEST(TailCheck, NoViolationsOnSmallGrid) {
  const auto cov = CovarianceSpec::diagonal(std::vector<double>(4, 1.0));
  const auto s = estimate_summary(cov, 1000, 0);
  const std::vector<double> r = {0.5, 1.0, 2.0, 3.0};
  const std::vector<double> eps = {0.05, 0.2};
  const auto rep = check_tail_bounds(cov, s, r, eps, 20000, 1);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_EQ(rep.rows.size(), r.size() * (1 + eps.size()));
  const auto other = estimate_summary(CovarianceSpec::diagonal({4.0}), 1000, 0);
  EXPECT_THROW(check_tail_bounds(cov, other, r, eps, 20000, 1), Error);
}

TEST(AntiConc, ExactDiagonalWithinBound) {
  const auto cov = CovarianceSpec::diagonal(std::vector<double>(16, 1.0));
  const auto s = estimate_summary(cov, 1000, 0);
  const auto bundle = constants::anticonc_constants(s.median_mu, 1.0, 1.0, {0.0, 1.0});
  const std::vector<double> m = {0.0, 1.0}, eps = {0.1}, r = {1.0, 2.0, 3.0};
  const auto rows = check_anticoncentration(cov, bundle, m, eps, r, 1000, 0);
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& row : rows) EXPECT_TRUE(row.pass);
}

TEST(DefaultGrid, DistinctIds) {
  const auto grid = default_covariance_grid();
  std::vector<std::string> ids;
  for (const auto& c : grid) ids.push_back(c.id());
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::unique(ids.begin(), ids.end()), ids.end());
}
