#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "hdclt/randvec.hpp"
#include "oracles.hpp"

using namespace hdclt;
using namespace hdclt::randvec;

namespace {

CovarianceSpec unit(std::size_t p) { return CovarianceSpec::diagonal(std::vector<double>(p, 1.0)); }

std::vector<DistributionFamily> all_families(const CovarianceSpec& cov) {
  return {DistributionFamily::gaussian(cov), DistributionFamily::rademacher(cov), DistributionFamily::laplace(cov),
          DistributionFamily::subweibull(1.0, cov), DistributionFamily::subweibull(0.5, cov),
          DistributionFamily::student_t(5.0, cov)};
}

}  // namespace

TEST(Family, Construction) {
  EXPECT_THROW(DistributionFamily::subweibull(0.0, unit(1)), Error);
  EXPECT_THROW(DistributionFamily::subweibull(2.5, unit(1)), Error);
  EXPECT_THROW(DistributionFamily::student_t(2.0, unit(1)), Error);
  EXPECT_EQ(base_from_string("laplace"), Base::laplace);
  EXPECT_THROW(base_from_string("cauchy"), Error);
  const auto f = DistributionFamily::rademacher(CovarianceSpec::diagonal({1.0, 4.0}));
  const auto g = matched_gaussian(f);
  EXPECT_TRUE(g.is_gaussian());
  EXPECT_EQ(g.covariance(), f.covariance());
  EXPECT_EQ(matched_gaussian(g), g);
}

TEST(Family, StandardizedMomentsHaveUnitVariance) {
  for (const auto& f : all_families(unit(1))) EXPECT_NEAR(f.std_abs_moment(2.0), 1.0, 1e-12) << f.id();
  const auto t = DistributionFamily::student_t(3.5, unit(1));
  try {
    t.std_abs_moment(4.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::moment_diverges);
    EXPECT_NE(std::string(e.what()).find("student_t"), std::string::npos);
  }
}

TEST(Sampling, SupportAndMeans) {
  const auto r = sample_x(DistributionFamily::rademacher(unit(1)), 1000, 3);
  for (Eigen::Index i = 0; i < r.rows(); ++i) EXPECT_EQ(std::abs(r(i, 0)), 1.0);

  const auto g = sample_x(DistributionFamily::gaussian(unit(2)), 100000, 5);
  for (Eigen::Index j = 0; j < 2; ++j) EXPECT_LT(std::abs(g.col(j).mean()), 4.0 / std::sqrt(1e5));
}

TEST(Sampling, WorkersDoNotChangeDraws) {
  const auto f = DistributionFamily::laplace(CovarianceSpec::equicorrelated(0.5, 1.0, 3));
  EXPECT_EQ(sample_x(f, 500, 9, 1), sample_x(f, 500, 9, 6));
}

TEST(Sampling, CovarianceConverges) {
  const auto cov = CovarianceSpec::equicorrelated(0.5, 1.0, 3);
  for (const auto& f : all_families(cov)) {
    const auto x = sample_x(f, 1000000, 17);
    const double n = static_cast<double>(x.rows());
    for (Eigen::Index a = 0; a < 3; ++a) {
      for (Eigen::Index b = a; b < 3; ++b) {
        const Eigen::ArrayXd prod = x.col(a).array() * x.col(b).array();
        const double m = prod.mean();
        const double se = std::sqrt((prod - m).square().sum() / (n - 1) / n);
        EXPECT_NEAR(m, cov.matrix()(a, b), 5.0 * se) << f.id() << " " << a << b;
      }
    }
  }
}

TEST(Sampling, SubWeibullTail) {
  const auto f = DistributionFamily::subweibull(1.0, unit(1));
  const auto x = sample_x(f, 100000, 21);
  const double c = std_psi_norm(f);
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const double frac = (x.col(0).array().abs() > t).cast<double>().mean();
    EXPECT_LE(frac, 2.0 * std::exp(-t / c) + 3.0 * std::sqrt(frac * (1 - frac) / 1e5));
    EXPECT_NEAR(frac, f.std_abs_sf(t), 4.0 * std::sqrt(f.std_abs_sf(t) / 1e5) + 1e-12);
  }
}

TEST(Sampling, SumsMatchLawOfSummedCoordinates) {
  // n^{-1/2} sum of n signs: exact binomial law
  const auto f = DistributionFamily::rademacher(unit(1));
  const auto norms = [&] {
    std::vector<double> v(200000);
    PathSampler path(f, 16, 16);
    CoordinateDrawer draw(f);
    Eigen::VectorXd buf;
    for (std::size_t r = 0; r < v.size(); ++r) {
      auto rng = make_stream(3, 4, r);
      v[r] = path(rng, draw, buf);
    }
    return v;
  }();
  for (double r : {0.25, 0.75, 1.25, 2.0}) {
    double c = 0;
    for (double x : norms) c += x > r;
    const double p = c / norms.size(), exact = oracle::rademacher_tail(16, r);
    EXPECT_NEAR(p, exact, 4.0 * std::sqrt(exact * (1 - exact) / norms.size()));
  }
}

TEST(Orlicz, BoundValues) {
  EXPECT_NEAR(orlicz_bound(1, 1, 1, 1), 12.0 / std::numbers::e, 1e-14);
  EXPECT_NEAR(orlicz_bound(2, 1.5, 10, 3), 8.0 * orlicz_bound(1, 1.5, 10, 3), 1e-10);
  EXPECT_THROW(orlicz_bound(1, 0, 1, 1), Error);
  const auto g = DistributionFamily::gaussian(unit(1));
  EXPECT_NEAR(std_psi_norm(g), std::sqrt(8.0 / 3.0), 1e-15);
  EXPECT_LE(std::sqrt(2.0 / std::numbers::pi), orlicz_bound(std_psi_norm(g), 2, 1, 1));
}

TEST(Orlicz, DominatesSubWeibullMoments) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    for (std::size_t p : {1u, 16u, 256u}) {
      const auto f = DistributionFamily::subweibull(alpha, unit(p));
      const auto x = sample_x(f, 10000, 31);
      const Eigen::VectorXd sup = x.cwiseAbs().rowwise().maxCoeff();
      for (double q : {1.0, 2.0, 3.0}) {
        const Eigen::ArrayXd pw = sup.array().pow(q);
        const double m = pw.mean();
        const double se = std::sqrt((pw - m).square().sum() / (pw.size() - 1.0) / pw.size());
        EXPECT_GE(orlicz_bound(psi_norm_bound(f), alpha, static_cast<double>(p), q) - m, -3.0 * se)
            << alpha << " " << p << " " << q;
      }
    }
  }
}

TEST(PseudoMoments, ClosedFormL) {
  PseudoMomentOptions opt;
  opt.mu = 0.67449;
  const PseudoMoments g(DistributionFamily::gaussian(unit(1)), 100, opt);
  EXPECT_NEAR(g.L_n(), 2.0 * std::sqrt(8.0 / std::numbers::pi), 1e-12);
  EXPECT_NEAR(g.L_n(), 3.1915, 1e-4);
  const PseudoMoments r(DistributionFamily::rademacher(unit(1)), 100, opt);
  EXPECT_NEAR(r.L_n(), 1.0 + std::sqrt(8.0 / std::numbers::pi), 1e-12);
  EXPECT_EQ(r.method(), MomentMethod::closed_form);

  // quadrature cross-check of E|Z|^3
  boost::math::quadrature::exp_sinh<double> q;
  const double m3 = 2.0 * q.integrate([](double x) { return x > 60 ? 0.0 : x * x * x * std::exp(-x * x / 2) / std::sqrt(2 * std::numbers::pi); });
  EXPECT_NEAR(g.L_n(), 2.0 * m3, 1e-9);
}

TEST(PseudoMoments, TruncatedSecondMonotone) {
  PseudoMomentOptions opt;
  opt.mu = 1.0;
  const PseudoMoments pm(DistributionFamily::laplace(unit(4)), 64, opt);
  double prev = INFINITY;
  for (double phi : {0.01, 0.05, 0.1, 0.3, 1.0, 3.0}) {
    const double m = pm.M_n(phi);
    EXPECT_LE(m, prev);
    prev = m;
  }
  const PseudoMoments r(DistributionFamily::rademacher(unit(1)), 4, opt);
  // sqrt(n) phi / log(ep) = 200: nothing to truncate for signs, and the Gaussian
  // part is bounded by the remainder at the end of its tail table
  EXPECT_LT(r.M_n(100.0), 1e-12);
  EXPECT_EQ(r.M_n(100.0), r.M_n(1000.0));
  EXPECT_THROW(pm.M_n(0.0), Error);
}

TEST(PseudoMoments, NuAndDivergence) {
  PseudoMomentOptions opt;
  opt.mu = 1.0;
  const PseudoMoments pm(DistributionFamily::gaussian(unit(1)), 10, opt);
  EXPECT_NEAR(pm.nu(2.0), std::sqrt(2.0), 1e-8);
  const PseudoMoments t(DistributionFamily::student_t(4.0, unit(2)), 10, opt);
  EXPECT_THROW(t.nu(5.0), Error);
  EXPECT_NO_THROW(t.nu(3.0));
}

TEST(PseudoMoments, CorrelatedUsesMonteCarlo) {
  PseudoMomentOptions opt;
  opt.mc_reps = 20000;
  const PseudoMoments pm(DistributionFamily::laplace(CovarianceSpec::equicorrelated(0.5, 1.0, 4)), 64, opt);
  const auto rep = pm.report(1.0, 0.5, {3.0});
  EXPECT_GT(rep.L_n, 0.0);
  EXPECT_GT(rep.nu_q.at(3.0), 0.0);
  EXPECT_EQ(rep.method, MomentMethod::monte_carlo);
}

TEST(FamilyConfig, RoundTrip) {
  for (const auto& f : all_families(CovarianceSpec::equicorrelated(0.25, 2.0, 5))) {
    Config c;
    family_to_config(f, c);
    EXPECT_EQ(family_from_config(c), f) << f.id();
  }
  Config c = Config::parse("family.base = subweibull\nfamily.alpha = 0.5\nfamily.p = 3\nfamily.cov.params = 1, 2, 3\n");
  const auto f = family_from_config(c);
  EXPECT_EQ(f.p(), 3u);
  EXPECT_EQ(f.alpha(), 0.5);
  Config bad = Config::parse("family.p = 2\nfamily.cov.params = 1, 2, 3\n");
  EXPECT_THROW(family_from_config(bad), Error);
}

TEST(SampleCsv, HeaderAndRows) {
  std::ostringstream os;
  write_sample_csv(sample_x(DistributionFamily::rademacher(unit(2)), 3, 1), os);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "x1,x2");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}
