#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ewboot::stats {

// Empirical quantile by linear interpolation between order statistics at
// position h = (m - 1) q + 1 (1-based), the "type 7" rule. Input need not be
// sorted. q in [0, 1]; empty input throws SizeError.
double quantile(std::span<const double> values, double q);
// Same on an already sorted (ascending) range.
double quantile_sorted(std::span<const double> sorted, double q);

double median(std::span<const double> values);
double mean(std::span<const double> values);
// Unbiased (m - 1) sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> values);

// Standard error of a sample median under a normal approximation,
// sqrt(pi / 2) * sd / sqrt(m).
double median_standard_error(std::span<const double> values);

double normal_cdf(double x);
// Inverse standard normal CDF (Acklam's rational approximation refined by one
// Halley step; absolute error well below 1e-12 on (0, 1)).
double normal_quantile(double p);

// Double factorial (p - 1)!! for even p, i.e. E Z^p for Z ~ N(0, 1).
double gaussian_moment(int p);

struct TrendTest {
  double tau_b = 0.0;     // Kendall tau-b
  double z = 0.0;         // normal approximation with tie correction
  double p_increasing = 1.0;  // one-sided p-value for an increasing trend
};

// Kendall tau-b between x and y with the tie-corrected variance of S.
TrendTest kendall_trend(std::span<const double> x, std::span<const double> y);

}  // namespace ewboot::stats
