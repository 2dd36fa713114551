#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hdclt/empproc.hpp"
#include "hdclt/posi.hpp"
#include "oracles.hpp"

using namespace hdclt;

namespace {

posi::DesignMatrix ortho2() { return posi::read_design_csv(std::string(HDCLT_CONFIG_DIR) + "/ortho2.csv"); }

}  // namespace

TEST(Submodels, CountsAndOrder) {
  EXPECT_EQ(posi::count_submodels(2, 2), 3u);
  EXPECT_EQ(posi::count_submodels(5, 1), 5u);
  EXPECT_EQ(posi::count_submodels(10, 10), 1023u);
  EXPECT_EQ(posi::count_submodels(3, 7), 7u);
  const auto m = posi::enumerate_submodels(3, 2);
  ASSERT_EQ(m.size(), 6u);
  EXPECT_EQ(posi::format_submodel(m[0]), "{1}");
  EXPECT_EQ(posi::format_submodel(m[3]), "{1,2}");
  EXPECT_EQ(posi::format_submodel(m[5]), "{2,3}");
  try {
    posi::enumerate_submodels(40, 20, 1000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::cap_exceeded);
  }
}

TEST(Kappa, OrthonormalAndCorrelated) {
  const auto x = ortho2();
  EXPECT_EQ(x.n(), 2u);
  const auto k = posi::rip_kappa(x, 2);
  EXPECT_EQ(k.value, 0.0);
  EXPECT_FALSE(k.violated);

  Eigen::MatrixXd c(3, 2);
  c << 1, 1, 1, 0, 0, 1;
  // Gram = [[2/3, 1/3], [1/3, 2/3]], eigenvalues 1/3 and 1
  const auto kc = posi::rip_kappa(posi::DesignMatrix(c), 2);
  EXPECT_NEAR(kc.value, 2.0 / 3.0, 1e-14);
  EXPECT_EQ(kc.offending, "{1,2}");

  Eigen::MatrixXd s(2, 2);
  s << 1, 1, 1, 1;
  EXPECT_TRUE(posi::rip_kappa(posi::DesignMatrix(s), 2).violated);
  EXPECT_THROW(posi::simulate_max_t(posi::DesignMatrix(s), 2, 1.0, {0.05}, 1000, 1), Error);
}

TEST(MaxT, SingleColumnMedian) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 1);
  const auto r = posi::simulate_max_t(posi::DesignMatrix(x), 1, 1.0, {0.5}, 100000, 2);
  EXPECT_NEAR(r.mu_posi, 0.67449, 0.01);
  EXPECT_EQ(r.n_models, 1u);
}

TEST(MaxT, OrthonormalQuantileAndScale) {
  const auto x = ortho2();
  const auto r = posi::simulate_max_t(x, 2, 1.0, {0.05, 0.5}, 50000, 3);
  EXPECT_EQ(r.n_models, 3u);
  EXPECT_EQ(r.n_statistics, 4u);
  const double exact = oracle::max_abs_normal_quantile(2, 0.05);
  EXPECT_NEAR(exact, 2.2365, 1e-4);
  EXPECT_NEAR(r.quantile.at(0.05), exact, 4.0 * r.quantile_se.at(0.05));
  EXPECT_NEAR(r.mu_posi, oracle::max_abs_normal_quantile(2, 0.5), 0.02);

  const auto s = posi::simulate_max_t(x, 2, 9.0, {0.05}, 50000, 3);
  EXPECT_NEAR(s.quantile.at(0.05), r.quantile.at(0.05), 1e-12);
  const auto w = posi::simulate_max_t(x, 2, 1.0, {0.05}, 50000, 3, 7);
  EXPECT_EQ(w.quantile.at(0.05), r.quantile.at(0.05));
}

TEST(Bounds, WidthAndMam) {
  EXPECT_NEAR(posi::posi_width_bound(0.0, 2, 2), std::sqrt(2.0 * std::log(4.0)), 1e-15);
  EXPECT_NEAR(posi::posi_width_bound(0.0, 2, 2), 1.6651, 1e-4);
  EXPECT_NEAR(posi::posi_width_bound(0.5, 4, 2, 2.0),
              std::sqrt(2 * std::log(8.0)) + std::sqrt(4 * std::log(12.0)), 1e-14);
  EXPECT_THROW(posi::posi_width_bound(1.0, 2, 2), Error);
  // 2 (1.25 + 5) + 1 + 1
  EXPECT_NEAR(posi::mam_bound(1, 1, 1, 1, 1, 1, 1), 14.5, 1e-14);
  EXPECT_THROW(posi::mam_bound(1, 1, 1, 0, 1, 1, 1), Error);
}

TEST(Empproc, SingleObservation) {
  const auto z = empproc::estimate_Zn(1, empproc::Multiplier::normal, 100000, 4);
  EXPECT_NEAR(z.value, std::sqrt(2.0 / std::numbers::pi), 4.0 * z.se);
  const auto t = empproc::estimate_Zn(1, empproc::Multiplier::student_t3, 100000, 4);
  // E|T_3| / sqrt(3) = 2 / pi
  EXPECT_NEAR(t.value, 2.0 / std::numbers::pi, 4.0 * t.se);
  EXPECT_EQ(empproc::estimate_Zn(8, empproc::Multiplier::normal, 500, 4, 1).value,
            empproc::estimate_Zn(8, empproc::Multiplier::normal, 500, 4, 8).value);
}

TEST(Empproc, ExactnessAndEntropy) {
  const auto rep = empproc::check_exactness(64, 1000, 5);
  EXPECT_EQ(rep.replicates, 1000u);
  EXPECT_EQ(rep.mismatches, 0u);
  EXPECT_EQ(rep.entropy_violations, 0u);
  EXPECT_LE(rep.max_traces, 65u);

  empproc::Sample tie{{0.5, 0.5, 0.1}, {1.0, 2.0, -4.0}};
  EXPECT_EQ(empproc::trace_count(tie), 3u);
  EXPECT_DOUBLE_EQ(empproc::halfline_sup(tie), empproc::halfline_sup_brute(tie));
  EXPECT_FALSE(empproc::entropy_ok(10, 8));
}

TEST(Empproc, WidthDominance) {
  const std::size_t n = 64;
  const auto z = empproc::estimate_Zn(n, empproc::Multiplier::normal, 5000, 6);
  const auto w = empproc::gaussian_width_bound(n, [](double) { return 1.0; }, 5000, 7);
  EXPECT_EQ(w.u_points, 5u);
  const double corr = empproc::moment_correction(n, empproc::Multiplier::normal, w.width);
  EXPECT_GE(corr, 0.0);
  EXPECT_TRUE(empproc::check_dominance(z, w, corr).pass);
  EXPECT_TRUE(std::isinf(empproc::moment_correction(n, empproc::Multiplier::student_t3, w.width)));
  EXPECT_THROW(empproc::multiplier_from_string("cauchy"), Error);
}
