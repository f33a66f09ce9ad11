#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ewboot/random.hpp"

namespace ewboot {

struct SurvivalObservation {
  double y = 0.0;
  int delta = 0;
  std::vector<double> z;
};

// Right-censored observations (y, delta, z) on the follow-up window [0, tau].
// Immutable after construction; safe to share between threads.
class SurvivalDataset {
 public:
  // z is row-major n x d. tau defaults to max(y) when not finite.
  SurvivalDataset(std::vector<double> y, std::vector<int> delta, std::vector<double> z,
                  std::size_t d, double tau = std::numeric_limits<double>::infinity());

  static SurvivalDataset from_observations(std::span<const SurvivalObservation> obs,
                                           double tau = std::numeric_limits<double>::infinity());

  std::size_t n() const noexcept { return y_.size(); }
  std::size_t d() const noexcept { return d_; }
  double tau() const noexcept { return tau_; }
  double y(std::size_t i) const { return y_[i]; }
  int delta(std::size_t i) const { return delta_[i]; }
  std::span<const double> z(std::size_t i) const { return {z_.data() + i * d_, d_}; }
  std::size_t event_count() const noexcept { return events_; }

  // Indices sorted by y descending; ties keep input order.
  const std::vector<std::size_t>& order_desc() const noexcept { return order_; }
  // [begin, end) ranges into order_desc() sharing one distinct time, latest first.
  struct TimeGroup {
    std::size_t begin;
    std::size_t end;
  };
  const std::vector<TimeGroup>& time_groups() const noexcept { return groups_; }

 private:
  std::vector<double> y_;
  std::vector<int> delta_;
  std::vector<double> z_;
  std::size_t d_;
  double tau_;
  std::size_t events_ = 0;
  std::vector<std::size_t> order_;
  std::vector<TimeGroup> groups_;
};

// Non-decreasing right-continuous step function with positive jumps.
struct CumulativeHazard {
  std::vector<double> jump_times;  // strictly increasing
  std::vector<double> jump_sizes;  // positive

  // Sum of jumps at times <= t.
  double operator()(double t) const;
  double total() const;
};

struct PartialLikelihood {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// Weighted log partial likelihood, i.e. the log-likelihood with the
// cumulative hazard profiled out:
//   sum_i w_i delta_i [theta'z_i - log sum_j w_j exp(theta'z_j) 1{y_j >= y_i}]
// with Breslow handling of ties, plus its exact gradient and hessian.
PartialLikelihood log_partial_likelihood(const Eigen::VectorXd& theta,
                                         const SurvivalDataset& data,
                                         std::span<const double> weights);

// Profiled cumulative hazard at fixed theta: at each distinct event time,
// (weighted events) / (weighted at-risk sum of exp(theta'z)).
CumulativeHazard weighted_breslow(const Eigen::VectorXd& theta, const SurvivalDataset& data,
                                  std::span<const double> weights);

std::vector<double> unit_weights(std::size_t n);

struct FitOptions {
  double tolerance = 1e-9;  // on the sup-norm of the score
  int max_iterations = 50;
  int max_halvings = 30;
  double theta_cap = 50.0;
  std::optional<Eigen::VectorXd> initial_theta;
  // Optional bound M on eta(tau); exceeding it only sets a warning flag.
  std::optional<double> hazard_bound;
};

struct CoxFit {
  Eigen::VectorXd theta_hat;
  CumulativeHazard eta_hat;
  double log_partial_likelihood = 0.0;
  double score_sup_norm = 0.0;
  // Negative hessian of the weighted log partial likelihood at theta_hat.
  Eigen::MatrixXd observed_information;
  bool converged = false;
  bool monotone_likelihood = false;
  bool hazard_bound_exceeded = false;
  int iterations = 0;
};

// Newton-Raphson with step halving on the weighted log partial likelihood.
// Throws UnfittableError when no event has positive weight. Divergence past
// theta_cap, or a vanishing score along an unbounded ascent direction, sets
// monotone_likelihood and returns converged = false.
CoxFit fit(const SurvivalDataset& data, std::span<const double> weights,
           const FitOptions& options = {});

// Empirical efficient information: (1/n) sum of outer products of the
// efficient score with population expectations replaced by risk-set averages
// and eta by the Breslow estimate at theta_hat. Throws SingularMatrixError.
Eigen::MatrixXd plugin_efficient_information(const CoxFit& fit, const SurvivalDataset& data);

// -(1/n) hessian of the unit-weight log partial likelihood at theta_hat.
Eigen::MatrixXd profile_information(const CoxFit& fit, const SurvivalDataset& data);

// Inverse of a symmetric positive definite information matrix; throws
// SingularMatrixError (with the condition number) when it is numerically singular.
Eigen::MatrixXd invert_information(const Eigen::MatrixXd& information);

// ---------------------------------------------------------------------------
// Simulation

enum class BaselineKind { Constant, Weibull };
enum class CovariateLaw { Uniform, Rademacher };

struct Baseline {
  BaselineKind kind = BaselineKind::Constant;
  double rate = 1.0;   // Constant: lambda(t) = rate
  double shape = 1.0;  // Weibull: eta0(t) = (t / scale)^shape
  double scale = 1.0;

  double cumulative(double t) const;
  double inverse_cumulative(double x) const;
};

struct SimulationConfig {
  std::vector<double> theta0{0.5};
  Baseline baseline{};
  CovariateLaw covariates = CovariateLaw::Uniform;
  double censoring_rate = 0.0;  // independent exponential censoring; 0 disables
  double tau = std::numeric_limits<double>::infinity();  // administrative cutoff
  std::size_t n = 400;

  void validate() const;  // throws ConfigError naming the offending key
};

// T = eta0^{-1}(E exp(-theta0'z)), E ~ Exp(1); y = min(T, C, tau),
// delta = 1{T <= C, T <= tau}.
SurvivalDataset simulate_dataset(const SimulationConfig& config, RandomStream& rng);

struct RateRow {
  std::size_t n = 0;
  double median = 0.0;  // median of sqrt(n) sup_{t <= tau} |eta_hat - eta0|
  double median_se = 0.0;
  double mean = 0.0;
  std::vector<double> values;
};

struct RateDiagnostic {
  std::vector<RateRow> rows;
  double kendall_tau = 0.0;
  double trend_p_value = 1.0;  // one-sided, increasing trend in n
  bool bounded = false;        // no significant increasing trend at 5%
};

// sup_{0 <= t <= tau} |eta_hat(t) - eta0(t)|, evaluated exactly on the jump grid.
double hazard_sup_distance(const CumulativeHazard& eta_hat, const Baseline& baseline, double tau);

RateDiagnostic nuisance_rate_diagnostic(const SimulationConfig& config,
                                        std::span<const std::size_t> n_grid,
                                        std::size_t replications, const RandomStream& rng,
                                        unsigned threads = 1);

}  // namespace ewboot
