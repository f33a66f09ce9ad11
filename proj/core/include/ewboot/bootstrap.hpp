#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ewboot/cox.hpp"
#include "ewboot/weights.hpp"

namespace ewboot {

struct BootstrapOptions {
  unsigned threads = 1;
  // Escalate an excluded fraction above max_excluded_fraction to an error.
  bool strict = false;
  double max_excluded_fraction = 0.05;
  FitOptions fit{};
};

// B exchangeably weighted refits around a base fit.
struct BootstrapRun {
  WeightScheme scheme = WeightScheme::efron();
  double c2 = 1.0;           // normalizing constant c^2 of the scheme
  std::size_t n = 0;
  std::size_t B = 0;
  Eigen::MatrixXd theta_stars;            // usable replicates, one per row, in b order
  std::vector<std::size_t> excluded;      // replicate indices b that were flagged
  CoxFit base_fit;
  std::uint64_t seed = 0;
  bool unstable = false;                  // excluded fraction above the threshold

  std::size_t usable() const noexcept { return static_cast<std::size_t>(theta_stars.rows()); }
  const Eigen::VectorXd& theta_hat() const noexcept { return base_fit.theta_hat; }
};

// Replicate b uses weights drawn on RandomStream(seed).substream("boot", b),
// so theta_stars does not depend on the thread count or scheduling.
BootstrapRun run_bootstrap(const SurvivalDataset& data, const CoxFit& base_fit,
                           const WeightScheme& scheme, std::size_t B, std::uint64_t seed,
                           const BootstrapOptions& options = {});

// (n / (B_u c^2)) sum_b (theta*_b - mean theta*)(theta*_b - mean theta*)'.
Eigen::MatrixXd variance_estimate(const BootstrapRun& run);

// Per coordinate: (1 / B_u) sum_b (sqrt(n) (theta*_b - theta_hat))^p.
Eigen::VectorXd moment_estimate(const BootstrapRun& run, int p);

enum class IntervalKind { TType, Percentile, Hybrid };
std::string to_string(IntervalKind kind);

struct ConfidenceSet {
  IntervalKind kind = IntervalKind::TType;
  double level = 0.95;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  bool degenerate = false;  // bootstrap spread is identically zero

  bool contains(const Eigen::VectorXd& theta) const;
};

// Marginal studentized interval from a sample of t statistics:
// [theta_hat - sqrt(sigma_jj / n) q_{1 - alpha/2}(t), theta_hat - sqrt(sigma_jj / n) q_{alpha/2}(t)].
std::pair<double, double> studentized_interval(double theta_hat, std::span<const double> t_values,
                                               double sigma_jj, std::size_t n, double alpha);

// Bootstrap-t set. Coordinate j studentizes by the bootstrap variance:
// t_j(b) = (sqrt(n) / c) (theta*_j(b) - theta_hat_j) / sqrt(Sigma*_jj), then
// rescales by sigma_hat_jj.
ConfidenceSet t_confidence_set(const BootstrapRun& run, const Eigen::MatrixXd& sigma_hat,
                               double alpha);
// theta_hat + q(theta* - theta_hat) / c at alpha/2 and 1 - alpha/2.
ConfidenceSet percentile_confidence_set(const BootstrapRun& run, double alpha);
// theta_hat - q(theta* - theta_hat) / c, reflected.
ConfidenceSet hybrid_confidence_set(const BootstrapRun& run, double alpha);

}  // namespace ewboot
