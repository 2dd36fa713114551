#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace hdclt {

// Standard normal CDF through erfc; absolute error is at the level of a few
// ulps on |x| <= 8, which the exact oracles rely on.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Upper tail 1 - N(x), accurate in the far tail.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// P(|Z| <= x) for x >= 0.
inline double abs_normal_cdf(double x) {
  if (x <= 0.0) return 0.0;
  return std::erf(x / std::numbers::sqrt2);
}

inline double normal_quantile(double prob) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * prob);
}

// E|Z|^q for standard normal Z.
inline double abs_normal_moment(double q) {
  return std::pow(2.0, q / 2.0) * std::tgamma((q + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
}

}  // namespace hdclt
