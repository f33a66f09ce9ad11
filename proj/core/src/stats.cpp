#include "ewboot/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "ewboot/errors.hpp"

namespace ewboot::stats {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw SizeError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double q) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, q);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

double mean(std::span<const double> values) {
  if (values.empty()) throw SizeError("mean of an empty sample");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return s / static_cast<double>(values.size() - 1);
}

double median_standard_error(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  return std::sqrt(std::numbers::pi / 2.0) * std::sqrt(sample_variance(values) /
                                                       static_cast<double>(values.size()));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs p in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double gaussian_moment(int p) {
  if (p < 0) throw DomainError("moment order must be non-negative");
  if (p % 2 == 1) return 0.0;
  double r = 1.0;
  for (int k = p - 1; k > 1; k -= 2) r *= k;
  return r;
}

TrendTest kendall_trend(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw SizeError("kendall_trend: length mismatch");
  const std::size_t m = x.size();
  if (m < 3) throw SizeError("kendall_trend needs at least three points");
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double dx = x[j] - x[i];
      const double dy = y[j] - y[i];
      const double prod = (dx > 0 ? 1 : dx < 0 ? -1 : 0) * (dy > 0 ? 1 : dy < 0 ? -1 : 0);
      s += prod;
    }
  }
  auto tie_terms = [](std::span<const double> v, double& t0, double& t1, double& t2) {
    std::map<double, double> counts;
    for (double e : v) counts[e] += 1.0;
    t0 = t1 = t2 = 0.0;
    for (const auto& [value, t] : counts) {
      t0 += t * (t - 1.0) / 2.0;
      t1 += t * (t - 1.0) * (2.0 * t + 5.0);
      t2 += t * (t - 1.0) * (t - 2.0);
    }
  };
  double tx0, tx1, tx2, ty0, ty1, ty2;
  tie_terms(x, tx0, tx1, tx2);
  tie_terms(y, ty0, ty1, ty2);
  const double md = static_cast<double>(m);
  const double n0 = md * (md - 1.0) / 2.0;
  const double var = (md * (md - 1.0) * (2.0 * md + 5.0) - tx1 - ty1) / 18.0 +
                     tx2 * ty2 / (9.0 * md * (md - 1.0) * (md - 2.0)) +
                     (2.0 * tx0) * (2.0 * ty0) / (2.0 * md * (md - 1.0));
  TrendTest out;
  const double denom = std::sqrt((n0 - tx0) * (n0 - ty0));
  out.tau_b = denom > 0.0 ? s / denom : 0.0;
  out.z = var > 0.0 ? s / std::sqrt(var) : 0.0;
  out.p_increasing = 1.0 - normal_cdf(out.z);
  return out;
}

}  // namespace ewboot::stats
