#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "hdclt/config.hpp"
#include "hdclt/core/error.hpp"
#include "hdclt/core/normal.hpp"
#include "hdclt/core/parallel.hpp"
#include "hdclt/core/rng.hpp"
#include "hdclt/core/stats.hpp"
#include "hdclt/covariance.hpp"
#include "oracles.hpp"

using namespace hdclt;

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  auto a = make_stream(7, experiment_id("x"), 3);
  auto b = make_stream(7, experiment_id("x"), 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());

  std::set<std::uint64_t> first;
  for (std::uint64_t r = 0; r < 1000; ++r) first.insert(make_stream(7, experiment_id("x"), r)());
  first.insert(make_stream(8, experiment_id("x"), 0)());
  first.insert(make_stream(7, experiment_id("y"), 0)());
  first.insert(make_stream(7, experiment_id("x"), 0, 1)());
  EXPECT_EQ(first.size(), 1003u);
}

TEST(Rng, UniformOpenStaysInside) {
  auto rng = make_stream(1, 2, 3);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform_open(rng);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(Parallel, ResultIndependentOfWorkers) {
  auto run = [](unsigned w) {
    std::vector<double> out(5000);
    parallel_for(out.size(), w, [&](std::size_t i) {
      auto rng = make_stream(11, experiment_id("par"), i);
      out[i] = uniform_open(rng);
    });
    return out;
  };
  const auto one = run(1);
  EXPECT_EQ(one, run(3));
  EXPECT_EQ(one, run(8));
}

TEST(Normal, MatchesSeriesOracle) {
  for (double x : {-6.0, -2.5, -1.0, -0.1, 0.0, 0.3, 1.0, 1.96, 4.0})
    EXPECT_NEAR(normal_cdf(x), oracle::normal_cdf(x), 1e-15);
  EXPECT_NEAR(abs_normal_cdf(1.0), 0.6826894921370859, 1e-15);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(abs_normal_moment(3.0), 2.0 * std::sqrt(2.0 / M_PI), 1e-14);
}

TEST(Stats, QuantilesAndSe) {
  std::vector<double> v = {5, 1, 4, 2, 3};
  std::sort(v.begin(), v.end());
  EXPECT_EQ(sample_median(v), 3.0);
  EXPECT_EQ(order_quantile(v, 0.4), 2.0);
  EXPECT_EQ(order_quantile(v, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(ecdf_sorted(v, 3.0), 0.6);
  EXPECT_DOUBLE_EQ(tail_sorted(v, 3.0), 0.4);
  EXPECT_DOUBLE_EQ(binomial_se(0.5, 100), 0.05);
  const auto ms = mean_and_se(std::vector<double>{1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_NEAR(ms.se, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
}

TEST(Errors, CarryKind) {
  try {
    require(false, ErrorKind::not_spd, "boom");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_spd);
    EXPECT_EQ(to_string(e.kind()), "not_spd");
  }
}

TEST(Config, ParsesAndReportsAllErrors) {
  const auto c = Config::parse("a = 1\n# note\nb=2.5, 3 # trailing\n\nname = x\n");
  EXPECT_EQ(c.num("a"), 1.0);
  EXPECT_EQ(c.list("b"), (std::vector<double>{2.5, 3.0}));
  EXPECT_EQ(c.str("name"), "x");
  EXPECT_EQ(c.count("missing", 4), 4u);
  try {
    Config::parse("oops\n= 3\nok = 1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(Config::parse("a = x").num("a"), Error);
}

TEST(Config, FormatRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 12345678.9, -2.5}) EXPECT_EQ(std::stod(format_double(x)), x);
}

TEST(Covariance, Constructors) {
  const auto d = CovarianceSpec::diagonal({1.0, 4.0});
  EXPECT_TRUE(d.is_diagonal());
  EXPECT_EQ(d.sigma_min(), 1.0);
  EXPECT_EQ(d.sigma_max(), 2.0);

  const auto e = CovarianceSpec::equicorrelated(0.5, 2.0, 3);
  EXPECT_FALSE(e.is_diagonal());
  EXPECT_DOUBLE_EQ(e.matrix()(0, 1), 1.0);
  const Eigen::MatrixXd back = e.cholesky() * e.cholesky().transpose();
  EXPECT_LT((back - e.matrix()).cwiseAbs().maxCoeff(), 1e-14);

  EXPECT_TRUE(CovarianceSpec::equicorrelated(0.0, 1.0, 4).is_diagonal());
  EXPECT_NE(CovarianceSpec::diagonal(std::vector<double>(16, 1.0)).id(),
            CovarianceSpec::diagonal([] {
              std::vector<double> v(16, 1.0);
              v[15] = 4.0;
              return v;
            }())
                .id());
}

TEST(Covariance, RejectsNonSpd) {
  EXPECT_THROW(CovarianceSpec::diagonal({1.0, 0.0}), Error);
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 2, 1;
  try {
    CovarianceSpec::dense(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_spd);
  }
  m << 1, 0.5, 0.4, 1;
  EXPECT_THROW(CovarianceSpec::dense(m), Error);
}
