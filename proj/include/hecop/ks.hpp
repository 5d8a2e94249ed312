#pragma once

// Kolmogorov-Smirnov statistics with asymptotic critical values.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "hecop/errors.hpp"

namespace hecop {

/// Asymptotic Kolmogorov quantiles c(alpha): P(sqrt(n) D > c) = alpha.
inline constexpr double kKsC05 = 1.3581;
inline constexpr double kKsC01 = 1.6276;

struct KsResult {
  double statistic = 0.0;
  double crit05 = 0.0;
  double crit01 = 0.0;
  bool reject05() const { return statistic > crit05; }
  bool reject01() const { return statistic > crit01; }
};

/// sup |F_n - F| for a continuous CDF F.
inline double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InvalidArgument("ks_statistic: empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

inline KsResult ks_one_sample(std::span<const double> sample, const std::function<double(double)>& cdf) {
  const double n = static_cast<double>(sample.size());
  return {ks_statistic(sample, cdf), kKsC05 / std::sqrt(n), kKsC01 / std::sqrt(n)};
}

/// sup |F_a - F_b| over the pooled sample (ties handled by advancing both).
inline double ks_two_sample_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

/// Two-sample test; both samples need at least 100 points for the
/// asymptotic critical values to apply.
inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 100 || b.size() < 100) throw InvalidArgument("ks_two_sample needs >= 100 points per sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double scale = std::sqrt((na + nb) / (na * nb));
  return {ks_two_sample_statistic(a, b), kKsC05 * scale, kKsC01 * scale};
}

}  // namespace hecop
