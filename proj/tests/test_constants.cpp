#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hdclt/constants.hpp"
#include "oracles.hpp"

using namespace hdclt;
using namespace hdclt::constants;

namespace {

constexpr double kPi = std::numbers::pi;

// C0 = 1, frakC = 0, everything else at its default
UniversalConstants unit_constants() {
  UniversalConstants uc;
  uc.C0 = 1.0;
  uc.frakC = 0.0;
  return uc;
}

}  // namespace

TEST(GaussianConstants, Phi2Phi4K) {
  EXPECT_NEAR(phi2(1, 1, 1), 32.0 * kPi * 3.6 * 3.6, 1e-9);
  EXPECT_NEAR(phi2(1, 1, 1), 1302.88, 0.005);
  EXPECT_NEAR(phi4(1, 1, 1), 1.0 + 56.0 * 2.5 * 5.1 + 32.0 * kPi * 3.6 * 3.6 * 45.0, 1e-8);
  EXPECT_NEAR(phi4(1, 1, 1), 59344.8, 0.2);
  // the first branch wins for small mu and large sigma_max
  EXPECT_NEAR(phi2(0, 1, 10), 51.0 * 41.0, 1e-9);
  EXPECT_DOUBLE_EQ(density_constant(0.0, 1.0), 5.2);
  EXPECT_THROW(phi2(1, 2, 1), Error);
  EXPECT_THROW(phi4(-1, 1, 1), Error);
}

TEST(GaussianConstants, AntiConcentrationBranches) {
  const auto b = phi_ac_branches(0.0, 1.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(b.small_r, 9.0);
  // the log objective decreases past r = 6, so the sup sits at the left end
  const double at6 = 2.0 * phi2(1, 1, 1) * 7.0 * std::exp(-2.0) * std::exp(-9.0 * 4.0 / 32.0);
  EXPECT_NEAR(b.large_r, at6, 1e-9 * at6);
  EXPECT_EQ(b.value, std::max(b.small_r, b.large_r));

  // interior maximum: compare with a dense scan
  const auto c = phi_ac_branches(2.0, 0.0, 0.5, 3.0);
  double best = 0.0;
  for (double r = 9.0; r < 200.0; r += 1e-3)
    best = std::max(best, 2.0 * phi2(0, 0.5, 3) * r * r * (r + 1) * std::exp(-r * r / 162.0) * std::exp(-9.0 * 9.0 / 288.0));
  EXPECT_NEAR(c.large_r, best, 1e-8 * best);

  const auto bundle = anticonc_constants(1.0, 1.0, 1.0, {0.0, 1.0, 2.0});
  EXPECT_EQ(bundle.phi_ac.size(), 3u);
  EXPECT_LT(bundle.phi_ac_at(0.0), bundle.phi_ac_at(1.0));
  EXPECT_DOUBLE_EQ(bundle.phi1, 1.0);
  EXPECT_DOUBLE_EQ(bundle.phi0, 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(bundle.phi3, 20.0);
  const auto sym = anticonc_constants(1.0, 1.0, 1.0, {0.0}, ThetaPolicy::symbolic, 2.0);
  EXPECT_DOUBLE_EQ(sym.phi_ac_at(0.0), 2.0 * (2.0 * 1.0 + 4.0 * 1.0));
}

TEST(Rates, T31HandCase) {
  const auto pm = MomentInputs::constant(1.0, 1.0, 1.0, 0.0);
  const auto b = rate_uniform_t31(pm, 1, 64, 1.0, unit_constants());
  const double eps = std::cbrt(2.0) / 2.0;
  EXPECT_NEAR(b.derived.at("eps_n"), eps, 1e-15);
  EXPECT_NEAR(b.term("anticoncentration"), 4.0 * eps, 1e-14);
  EXPECT_EQ(b.term("truncated_second"), 0.0);
  EXPECT_NEAR(b.term("weighted_third"), 1.0 / (4.0 * std::cbrt(2.0)), 1e-14);
  EXPECT_NEAR(b.total, 4.0 * std::cbrt(2.0) / 2.0 + 1.0 / (4.0 * std::cbrt(2.0)), 1e-14);
  EXPECT_NEAR(b.total, 2.71827, 1e-5);
  EXPECT_TRUE(b.vacuous);
  const auto zero = MomentInputs::constant(0.0, 1.0, 1.0, 0.0);
  try {
    rate_uniform_t31(zero, 1, 64, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate);
  }
}

TEST(Rates, FiniteMomentExponents) {
  const auto pm = MomentInputs::constant(1.0, 1.0, 1.0, 0.0);
  EXPECT_NEAR(rate_finite_moment(pm, 4, 100, 1.5, 1.0).derived.at("n_exponent"), 1.0 / 6.0, 1e-15);
  const auto b = rate_finite_moment(pm, 4, 100, 1.0, 1.0);
  EXPECT_EQ(b.theorem, Theorem::E32);
  EXPECT_NEAR(b.derived.at("n_exponent"), 1.0 / 8.0, 1e-15);
  EXPECT_EQ(rate_finite_moment(pm, 4, 100, 0.5, 1.0).theorem, Theorem::APPA);
}

TEST(Rates, P32HandCase) {
  const auto b = rate_prop32(1.0, 1, 64, 1.0, unit_constants());
  EXPECT_EQ(b.term("geometric"), std::ldexp(1.0, -63));
  EXPECT_DOUBLE_EQ(b.term("main"), 4.0);
  EXPECT_EQ(b.total, 4.0 + std::ldexp(1.0, -63));
  EXPECT_EQ(rate_prop32(1.0, 1, 1, 1.0).term("geometric"), 1.0);
}

TEST(Rates, T33HandCase) {
  const auto pm = MomentInputs::constant(1.0, 1.0, 1.0, 0.0);
  const auto b = rate_optimal_t33(pm, 1, 64, 1.0, 1.0);
  EXPECT_NEAR(b.term("main"), 0.5, 1e-15);
  EXPECT_EQ(b.term("geometric"), std::ldexp(1.0, -64));
  EXPECT_THROW(rate_optimal_t33(pm, 1, 64, 0.5, 1.0), Error);
}

TEST(Rates, T34TermByTerm) {
  const auto pm = MomentInputs::constant(1.0, 1.0, 1.0, 0.0);
  const auto b = rate_nonuniform_t34(pm, 1, 64, 1, 1.0, 0.0, 1.0, 1.0, unit_constants());
  ASSERT_EQ(b.terms.size(), 5u);
  EXPECT_NEAR(b.term("anticoncentration0"), 8.0, 1e-13);
  EXPECT_NEAR(b.term("anticoncentration_m"), 2.0 + std::cbrt(2.0), 1e-13);
  EXPECT_EQ(b.term("truncated_second"), 0.0);
  EXPECT_NEAR(b.term("weighted_third"), 1.0 / 128.0, 1e-15);
  EXPECT_EQ(b.term("tail"), 0.0);
  EXPECT_NEAR(b.total, 10.0 + std::cbrt(2.0) + 1.0 / 128.0, 1e-12);
  EXPECT_THROW(rate_nonuniform_t34(pm, 1, 64, 1, 1.0, std::nullopt, 1.0, 1.0), Error);

  const auto z = MomentInputs::constant(1e-300, 0.0, 0.0, 0.0);
  const auto t = rate_nonuniform_t34(z, 1, 64, 1, 1.0, 0.25, 1.0, 1.0, unit_constants());
  EXPECT_NEAR(t.total, t.term("tail") + t.term("anticoncentration0") + t.term("anticoncentration_m"), 1e-15);
  EXPECT_EQ(t.term("tail"), 0.25);
}

TEST(Rates, T35HandCase) {
  const auto pm = MomentInputs::constant(1.0, 1.0, 1.0, 0.0);
  const auto b = rate_nonuniform_t35(pm, 1, 4096, 1, 1, 1.0, unit_constants());
  const double eps = std::pow(2.0, -1.0 / 6.0);
  EXPECT_NEAR(b.derived.at("eps_n"), eps, 1e-14);
  EXPECT_EQ(b.term("geometric"), 0.0);
  EXPECT_NEAR(b.total, 18.4 * eps, 1e-12);
  const auto z = MomentInputs::constant(1.0, 1.0, 0.0, 0.0);
  EXPECT_EQ(rate_nonuniform_t35(z, 1, 64, 1, 1, 1.0).term("geometric"), 0.0);
  try {
    rate_nonuniform_t35(pm, 1, 64, 2, 1, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("tau >= m"), std::string::npos);
  }
}

TEST(Rates, SubWeibullDisplays) {
  const auto pm = MomentInputs::constant(1.0, 1.0, 1.0, 0.0);
  SubWeibullInputs sw;
  sw.K_p = 1.5;
  sw.alpha = 1.5;
  sw.m = 1.0;
  const auto r = rate_subweibull("C37r", sw, pm, 4, 1e4);
  EXPECT_EQ(r.term("heavy_tail"), 0.0);
  sw.alpha = 0.5;
  EXPECT_GT(rate_subweibull("C37r", sw, pm, 4, 1e4).term("heavy_tail"), 0.0);

  sw.alpha = 1.0;
  const auto c = rate_subweibull("C36b", sw, pm, 1, 1e6);
  EXPECT_NEAR(c.term("main"), std::cbrt(1.0) / std::pow(1e6, 1.0 / 6.0), 1e-15);
  try {
    rate_subweibull("C36b", sw, pm, 1e6, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::guard_violated);
    EXPECT_NE(std::string(e.what()).find("alpha*log(n/log(ep))"), std::string::npos);
  }
  EXPECT_THROW(rate_subweibull("C99", sw, pm, 4, 100), Error);
}

TEST(Rates, MomentDifference) {
  const auto b = moment_diff_bound(1, 1, 1, 1, 1, 64);
  EXPECT_NEAR(b.term("uniform"), 0.5, 1e-15);
  EXPECT_NEAR(b.term("nonuniform"), 0.5, 1e-15);
  EXPECT_NEAR(b.total, 1.0, 1e-15);
  EXPECT_THROW(moment_diff_bound(1, 0, 1, 1, 1, 64), Error);
  EXPECT_NO_THROW(moment_diff_bound(1, 0, 2.5, 1, 1, 64));
}

TEST(Rates, CramerBranchesMatchAudit) {
  const auto bundle = anticonc_constants(1.0, 1.0, 1.0, {0.0});
  const auto uc = unit_constants();
  const auto b = cramer_constants({1.0, 1.0, 0.0}, bundle, 1, 4, uc);
  const auto c = cramer_from_inputs(b.inputs_echo);
  const auto a = oracle::cramer_audit(1, 1, 1, 1, 1, 0, 1, 4, bundle.phi2, bundle.phi4, bundle.phi_ac_at(0.0));
  EXPECT_LE(oracle::rel_diff(c.B, a.B), 1e-12);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_LE(oracle::rel_diff(c.pi_tilde_terms[i], a.pi_tilde_terms[i]), 1e-12);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_LE(oracle::rel_diff(c.pi_branches[i], a.pi_branches[i]), 1e-12) << i;
    EXPECT_LE(oracle::rel_diff(c.m_branches[i], a.m_branches[i]), 1e-12) << i;
    EXPECT_LE(oracle::rel_diff(c.b0_branches[i], a.b0_branches[i]), 1e-12) << i;
  }
  EXPECT_EQ(b.derived.at("M"), c.M);
  EXPECT_TRUE(b.validity.checked);
  EXPECT_THROW(cramer_constants({1.0, 1.0, 0.0}, bundle, 1, 3), Error);
  // B_s decreases in s
  EXPECT_GE(c.B_s(0), c.B_s(1));
  EXPECT_GE(c.B_s(1), c.B_s(5));
}

TEST(Rates, CramerCorollary) {
  UniversalConstants uc;
  const auto b = cramer_subweibull_c52(1.0, 1.0, 1.0, 1, 64, 1.0, uc);
  EXPECT_NEAR(b.total, 2.0 / 2.0, 1e-15);
  EXPECT_THROW(cramer_subweibull_c52(1.0, 0.5, 1.0, 1, 64, 1.0), Error);

  for (double p : {1.0, 10.0, 1000.0}) {
    for (double mu : {0.0, 1.0}) {
      const double n = c52_min_n(p, mu);
      auto rhs = [&](double k) {
        return std::pow(log_ep(p), 64.0 / 15.0) * std::pow(1.0 + std::log(k), 32.0 / 5.0) * std::pow(mu + 1.0, -34.0 / 5.0);
      };
      EXPECT_EQ(n, std::floor(n));
      EXPECT_GE(n, rhs(n));
      if (n > 4.0) {
        EXPECT_LT(n - 1.0, rhs(n - 1.0));
      }
      if (n < 1e6) {
        double scan = 4.0;
        while (scan < rhs(scan)) scan += 1.0;
        EXPECT_EQ(n, scan) << p << " " << mu;
      }
    }
  }
}

TEST(Rates, MonotoneOverRandomInputs) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const double p = std::floor(1 + 1000 * u(rng)), n = std::floor(2 + 1e5 * u(rng));
    const double L = 0.1 + 10 * u(rng), nu = 0.1 + 5 * u(rng), phi = 0.5 + 50 * u(rng), tau = 1 + 3 * u(rng);
    const double up = 1.0 + u(rng);
    auto pm = [](double l, double v) { return MomentInputs::constant(l, 0.0, v, 0.0); };

    EXPECT_GE(rate_prop32(nu, p, n, phi).total, rate_prop32(nu, p, n + 1, phi).total);
    EXPECT_LE(rate_prop32(nu, p, n, phi).total, rate_prop32(nu * up, p, n, phi * up).total);

    EXPECT_GE(rate_optimal_t33(pm(L, nu), p, n, tau, phi).total, rate_optimal_t33(pm(L, nu), p, n * up, tau, phi).total);
    EXPECT_LE(rate_optimal_t33(pm(L, nu), p, n, tau, phi).total, rate_optimal_t33(pm(L * up, nu), p, n, tau, phi).total);
    EXPECT_LE(rate_optimal_t33(pm(L, nu), p, n, tau, phi).total, rate_optimal_t33(pm(L, nu * up), p, n, tau, phi).total);
    EXPECT_LE(rate_optimal_t33(pm(L, nu), p, n, tau, phi).total, rate_optimal_t33(pm(L, nu), p, n, tau, phi * up).total);

    EXPECT_GE(rate_finite_moment(pm(L, nu), p, n, tau, phi).total, rate_finite_moment(pm(L, nu), p, n * up, tau, phi).total);
    EXPECT_LE(rate_finite_moment(pm(L, nu), p, n, tau, phi).total, rate_finite_moment(pm(L * up, nu * up), p, n, tau, phi * up).total);

    EXPECT_GE(rate_uniform_t31(pm(L, nu), p, n, phi).total, rate_uniform_t31(pm(L, nu), p, n * up, phi).total);
    EXPECT_LE(rate_uniform_t31(pm(L, nu), p, n, phi).total, rate_uniform_t31(pm(L, nu), p, n, phi * up).total);
  }
}

TEST(Rates, RecomputeFromEcho) {
  const auto pm = MomentInputs::constant(2.0, 3.0, 1.5, 0.01);
  const auto b = rate_uniform_t31(pm, 16, 1000, 3.0);
  const auto again = recompute(b);
  EXPECT_EQ(again.total, b.total);
  EXPECT_EQ(again.terms.size(), b.terms.size());
}
