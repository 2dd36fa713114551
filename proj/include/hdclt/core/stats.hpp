#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "hdclt/core/normal.hpp"

namespace hdclt {

// Fixed-shape pairwise summation: the tree depends only on the length, so
// the result is identical for identical inputs no matter who produced them.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double mean(std::span<const double> xs) {
  return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_and_se(std::span<const double> xs) {
  MeanSe out;
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return out;
  out.mean = mean(xs);
  if (xs.size() < 2) return out;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - out.mean) * (xs[i] - out.mean);
  const double var = pairwise_sum(sq) / (n - 1.0);
  out.se = std::sqrt(var / n);
  return out;
}

inline double binomial_se(double prob, std::size_t reps) {
  return std::sqrt(std::max(0.0, prob * (1.0 - prob)) / static_cast<double>(reps));
}

// Fraction of sorted values <= r.
inline double ecdf_sorted(std::span<const double> sorted, double r) {
  auto it = std::upper_bound(sorted.begin(), sorted.end(), r);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

// Fraction of sorted values > r.
inline double tail_sorted(std::span<const double> sorted, double r) {
  return 1.0 - ecdf_sorted(sorted, r);
}

// Order-statistic quantile: the ceil(level * n)-th smallest value.
inline double order_quantile(std::span<const double> sorted, double level) {
  const auto n = sorted.size();
  auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  return sorted[k - 1];
}

inline double sample_median(std::span<const double> sorted) {
  const auto n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

// Distribution-free confidence interval for the median from order
// statistics, using the normal approximation to Binomial(n, 1/2).
inline std::pair<double, double> median_ci(std::span<const double> sorted, double level = 0.99) {
  const auto n = static_cast<double>(sorted.size());
  const double z = normal_quantile(0.5 + level / 2.0);
  const double half_width = z * std::sqrt(n) / 2.0;
  const auto lo = static_cast<std::ptrdiff_t>(std::floor(n / 2.0 - half_width));
  const auto hi = static_cast<std::ptrdiff_t>(std::ceil(n / 2.0 + half_width));
  const auto last = static_cast<std::ptrdiff_t>(sorted.size()) - 1;
  return {sorted[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(lo, 0, last))],
          sorted[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(hi, 0, last))]};
}

}  // namespace hdclt
