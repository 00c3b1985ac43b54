#pragma once

// Upper-tail Welch t-test, Student t tail probabilities via the regularized
// incomplete beta function, and notched box-and-whisker summaries.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "lagtrend/error.hpp"

namespace lagtrend {

namespace detail {

// Continued fraction for I_x(a, b), modified Lentz. Converges fast for
// x < (a + 1) / (a + b + 2).
inline double incomplete_beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw RuntimeError("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * detail::incomplete_beta_cf(a, b, x) / a;
  return 1.0 - std::exp(log_front) * detail::incomplete_beta_cf(b, a, 1.0 - x) / b;
}

/// P(T > t) for Student's t with `dof` degrees of freedom.
inline double t_distribution_upper_tail(double t, double dof) {
  if (!(dof > 0.0)) throw ConfigError("t distribution: degrees of freedom must be positive");
  if (std::isnan(t)) throw ConfigError("t distribution: t is NaN");
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return t > 0 ? tail : 1.0 - tail;
}

/// The t with P(T > t) = p, by bisection on the tail function.
inline double t_distribution_upper_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("t quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p > 0.5) return -t_distribution_upper_quantile(1.0 - p, dof);
  double lo = 0.0, hi = 1.0;
  while (t_distribution_upper_tail(hi, dof) > p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw RuntimeError("t quantile: bracket overflow");
  }
  for (int i = 0; i < 400 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (t_distribution_upper_tail(mid, dof) > p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct WelchResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 0.0;
  double min_difference = 0.0;  // lower one-sided (1 - alpha) bound on mean_a - mean_b
  double mean_difference = 0.0;
  double standard_error = 0.0;
  double alpha = 0.0;
};

namespace detail {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double n = 0.0;
};

inline Moments moments(std::span<const double> xs) {
  Moments m;
  m.n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= m.n;
  for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= m.n - 1.0;
  return m;
}

}  // namespace detail

/// One-sided Welch test of H1: mean(a) > mean(b), using unbiased sample
/// variances and the Welch-Satterthwaite degrees of freedom. When both
/// variances vanish but the means differ, t is infinite, p is 0 or 1 and
/// the degrees of freedom fall back to n_a + n_b - 2.
inline WelchResult welch_upper_tail(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() < 2 || b.size() < 2) throw DataError("welch: both samples need at least two values");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("welch: alpha must lie in (0, 1)");
  const auto ma = detail::moments(a);
  const auto mb = detail::moments(b);
  if (!std::isfinite(ma.variance) || !std::isfinite(mb.variance)) throw DataError("welch: non-finite variance");
  const double va = ma.variance / ma.n;
  const double vb = mb.variance / mb.n;
  WelchResult r;
  r.alpha = alpha;
  r.mean_difference = ma.mean - mb.mean;
  r.standard_error = std::sqrt(va + vb);
  if (r.standard_error == 0.0) {
    if (r.mean_difference == 0.0) throw DataError("welch: t undefined for identical constant samples");
    r.t_statistic = r.mean_difference > 0 ? std::numeric_limits<double>::infinity()
                                          : -std::numeric_limits<double>::infinity();
    r.degrees_of_freedom = ma.n + mb.n - 2.0;
    r.p_value = r.mean_difference > 0 ? 0.0 : 1.0;
    r.min_difference = r.mean_difference;
    return r;
  }
  r.t_statistic = r.mean_difference / r.standard_error;
  r.degrees_of_freedom = (va + vb) * (va + vb) / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
  r.p_value = t_distribution_upper_tail(r.t_statistic, r.degrees_of_freedom);
  r.min_difference =
      r.mean_difference - t_distribution_upper_quantile(alpha, r.degrees_of_freedom) * r.standard_error;
  return r;
}

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DataError("quantile: empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct BoxStats {
  std::size_t n = 0;
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  double notch_half_width = 0.0;
  double notch_low = 0.0;
  double notch_high = 0.0;
  std::vector<double> outliers;  // ascending
};

/// Whiskers end at the most extreme data points inside
/// [Q1 - 1.5 IQR, Q3 + 1.5 IQR], never inside the box. Notches span
/// median +- 1.57 IQR / sqrt(n).
inline BoxStats box_stats(std::span<const double> sample) {
  if (sample.size() < 5) throw DataError("box_stats: need at least five values");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  BoxStats b;
  b.n = s.size();
  b.min = s.front();
  b.max = s.back();
  b.q1 = quantile_sorted(s, 0.25);
  b.median = quantile_sorted(s, 0.5);
  b.q3 = quantile_sorted(s, 0.75);
  const double iqr = b.q3 - b.q1;
  const double upper_fence = b.q3 + 1.5 * iqr;
  const double lower_fence = b.q1 - 1.5 * iqr;
  b.whisker_high = b.q3;
  b.whisker_low = b.q1;
  for (double x : s) {
    if (x <= upper_fence) b.whisker_high = std::max(b.whisker_high, x);
    if (x >= lower_fence) b.whisker_low = std::min(b.whisker_low, x);
    if (x < lower_fence || x > upper_fence) b.outliers.push_back(x);
  }
  b.notch_half_width = 1.57 * iqr / std::sqrt(static_cast<double>(b.n));
  b.notch_low = b.median - b.notch_half_width;
  b.notch_high = b.median + b.notch_half_width;
  return b;
}

}  // namespace lagtrend
