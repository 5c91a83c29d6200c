#pragma once

// Reference implementations of the rank statistics, written for clarity
// rather than speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "argue/meta_eval.hpp"

namespace testing_support {

using argue::meta::kTieTolerance;

// O(n^2) tau-b with explicit pair counting.
inline double brute_tau_b(const std::vector<double>& a, const std::vector<double>& b) {
  long long conc = 0, disc = 0, tie_a = 0, tie_b = 0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0) ++tie_a;
      if (db == 0) ++tie_b;
      if (da == 0 || db == 0) continue;
      if ((da > 0) == (db > 0)) ++conc;
      else ++disc;
    }
  }
  const long long n0 = static_cast<long long>(n * (n - 1) / 2);
  const double denom = std::sqrt(double(n0 - tie_a) * double(n0 - tie_b));
  return denom == 0 ? 0.0 : double(conc - disc) / denom;
}

// Exhaustive two-sided p over all 2^n sign patterns of the given ranks.
inline double brute_wilcoxon_p(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::fabs(x[i] - y[i]) > kTieTolerance) d.push_back(x[i] - y[i]);
  }
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return std::fabs(d[i]) < std::fabs(d[j]); });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(std::fabs(d[order[j + 1]]) - std::fabs(d[order[i]])) <= kTieTolerance) ++j;
    const double mean = (double(i + 1) + double(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mean;
    i = j + 1;
  }
  double w_plus = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank[i];
    if (d[i] > 0) w_plus += rank[i];
  }
  const double t = std::min(w_plus, total - w_plus);
  std::size_t at_most = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) w += rank[i];
    }
    if (w <= t + 1e-9) ++at_most;
  }
  return std::min(1.0, 2.0 * double(at_most) / double(std::uint64_t{1} << n));
}

}  // namespace testing_support
