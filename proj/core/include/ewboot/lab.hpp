#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ewboot/bootstrap.hpp"
#include "ewboot/cox.hpp"
#include "ewboot/random.hpp"
#include "ewboot/weights.hpp"

namespace ewboot {

// Exact sup-distance between the empirical CDF of `sample` and the
// N(mean, variance) CDF, using both one-sided gaps at every sample point.
double ks_distance(std::span<const double> sample, double mean, double variance);

// Which consistent estimate of Sigma the t-type set is rescaled by.
enum class SigmaSource { Plugin, Profile, Bootstrap };
std::string to_string(SigmaSource source);
SigmaSource parse_sigma_source(std::string_view text);

struct ExperimentConfig {
  SimulationConfig simulation{};
  WeightScheme scheme = WeightScheme::efron();
  std::vector<std::size_t> n_grid{400};
  std::size_t B = 2000;
  std::size_t mc_reps = 500;
  double alpha = 0.05;
  std::vector<int> moments{1, 2, 3, 4};
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool strict = false;
  SigmaSource sigma = SigmaSource::Plugin;

  void validate() const;  // throws ConfigError
};

// Desk-scale defaults: d = 1, theta0 = 0.5, constant baseline 1, z ~ U(0, 1),
// exponential censoring at rate 0.55 (about 30% censored), n = 400, B = 2000.
ExperimentConfig desk_profile();

// Everything one Monte Carlo replicate (one simulated dataset plus its
// bootstrap) contributes to the experiments.
struct ReplicateOutcome {
  std::size_t rep = 0;
  bool usable = false;
  std::string failure;  // why the replicate was dropped, when !usable
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd sigma_plugin;
  Eigen::MatrixXd sigma_profile;
  Eigen::MatrixXd sigma_star;
  Eigen::VectorXd ks;                    // per coordinate
  std::vector<Eigen::VectorXd> moments;  // moments[p - 1], p = 1..max order
  std::vector<ConfidenceSet> intervals;  // t, percentile, hybrid (empty if alpha >= 1)
  std::size_t excluded = 0;
  double c2 = 1.0;
};

// Replicate r at sample size n draws its data from
// RandomStream(seed).substream("mc", n).substream(r); independent of threads.
std::vector<ReplicateOutcome> simulate_replicates(const ExperimentConfig& config, std::size_t n);

struct ReportRecord {
  std::string experiment;
  std::size_t n = 0;
  std::string statistic;
  int coordinate = -1;  // -1 when not per-coordinate
  double value = 0.0;
  std::optional<double> mc_se;
  std::optional<double> target;
  std::optional<bool> pass;
};

struct ExperimentReport {
  std::string experiment;
  ExperimentConfig config;
  std::vector<ReportRecord> records;

  bool all_pass() const;
};

ExperimentReport summarize_distribution(const ExperimentConfig& config, std::size_t n,
                                        std::span<const ReplicateOutcome> outcomes);
ExperimentReport summarize_variance_and_moments(const ExperimentConfig& config, std::size_t n,
                                                std::span<const ReplicateOutcome> outcomes);
ExperimentReport summarize_coverage(const ExperimentConfig& config, std::size_t n,
                                    std::span<const ReplicateOutcome> outcomes);

// Coordinatewise KS of (sqrt(n)/c)(theta* - theta_hat) against N(0, Sigma_jj),
// median over datasets; pass when the median is at most 0.05.
ExperimentReport distribution_consistency_experiment(const ExperimentConfig& config);
// Mean Sigma* against the MC variance of sqrt(n)(theta_hat - theta0) (15%)
// and the plug-in oracle (20%); bootstrap moments against N(0, c^2 Sigma).
ExperimentReport variance_and_moment_experiment(const ExperimentConfig& config);
// Coverage of the three interval kinds with binomial standard errors.
ExperimentReport coverage_experiment(const ExperimentConfig& config);

// Positive laws for the ||.||_{2,1} sandwich check.
struct GammaComponent {
  double weight = 1.0;
  double shape = 1.0;
  double rate = 1.0;
};

struct PositiveLaw {
  enum class Kind { Degenerate, Uniform, GammaMixture } kind = Kind::Degenerate;
  double value = 1.0;               // Degenerate
  double lower = 0.0, upper = 1.0;  // Uniform
  std::vector<GammaComponent> components;

  double sample(RandomStream& rng) const;
  std::string describe() const;
};

// Random mixture of one to three Gamma laws with shapes in [0.5, 5] and rates in [0.5, 3].
PositiveLaw random_gamma_mixture(RandomStream& rng);

struct NormInequalityMargin {
  double l2 = 0.0;
  double l21 = 0.0;
  double lr = 0.0;
  double r = 3.0;
  double lower_margin = 0.0;  // ||Y||_{2,1} - ||Y||_2 / 2
  double upper_margin = 0.0;  // r/(r-2) ||Y||_r - ||Y||_{2,1}
  double lower_se = 0.0;
  double upper_se = 0.0;
  bool violation = false;     // a margin below -3 standard errors
};

// Estimates ||Y||_2, ||Y||_{2,1} and ||Y||_r from a sample and checks
// ||Y||_2 / 2 <= ||Y||_{2,1} <= r/(r-2) ||Y||_r. r <= 2 throws DomainError.
NormInequalityMargin norm_inequality_check(const PositiveLaw& law, double r,
                                           std::size_t sample_size, RandomStream& rng);

// Bounded function on [0, 1] with its exact mean under U(0, 1).
struct TestFunction {
  std::string name;
  std::function<double(double)> f;
  double mean = 0.0;
};

// {x, x^2, x^3} with means 1/2, 1/3, 1/4.
std::vector<TestFunction> polynomial_class();

struct MultiplierCheck {
  int p = 1;
  std::size_t n = 50;
  std::size_t n0 = 5;
  WeightScheme scheme = WeightScheme::efron();
  std::size_t mc_draws = 20000;
};

struct MultiplierResult {
  double lhs = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  double rhs_se = 0.0;
  double first_term = 0.0;
  double second_term = 0.0;
  double r_n = 0.0;      // integral of sqrt(P(W_{n1} >= u))
  bool holds = false;    // lhs <= rhs + 3 combined standard errors
  bool precise = false;  // combined standard error below 10% of the margin
};

// Monte Carlo evaluation of both sides of the L_p multiplier inequality for
// Z_i(f) = f(X_i) - E f, X_i ~ U(0, 1), with ||.|| the max over the class.
MultiplierResult multiplier_inequality_check(const MultiplierCheck& check,
                                             std::span<const TestFunction> function_class,
                                             RandomStream& rng);

}  // namespace ewboot
