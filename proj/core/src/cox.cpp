#include "ewboot/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ewboot/errors.hpp"
#include "ewboot/parallel.hpp"
#include "ewboot/stats.hpp"

namespace ewboot {

// ---------------------------------------------------------------------------
// Dataset

SurvivalDataset::SurvivalDataset(std::vector<double> y, std::vector<int> delta,
                                 std::vector<double> z, std::size_t d, double tau)
    : y_(std::move(y)), delta_(std::move(delta)), z_(std::move(z)), d_(d), tau_(tau) {
  if (d_ == 0) throw SizeError("covariate dimension must be positive");
  if (y_.empty()) throw SizeError("dataset has no observations");
  if (delta_.size() != y_.size() || z_.size() != y_.size() * d_) {
    throw SizeError("dataset columns have inconsistent lengths");
  }
  double max_y = 0.0;
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (!std::isfinite(y_[i]) || y_[i] < 0.0) {
      throw ValidationError("observation " + std::to_string(i) + ": y must be finite and >= 0");
    }
    if (delta_[i] != 0 && delta_[i] != 1) {
      throw ValidationError("observation " + std::to_string(i) + ": delta must be 0 or 1");
    }
    for (std::size_t k = 0; k < d_; ++k) {
      if (!std::isfinite(z_[i * d_ + k])) {
        throw ValidationError("observation " + std::to_string(i) + ": covariates must be finite");
      }
    }
    max_y = std::max(max_y, y_[i]);
    events_ += static_cast<std::size_t>(delta_[i]);
  }
  if (!std::isfinite(tau_)) tau_ = max_y;
  if (max_y > tau_) throw ValidationError("observation time exceeds the follow-up horizon tau");

  order_.resize(y_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [this](std::size_t a, std::size_t b) { return y_[a] > y_[b]; });
  std::size_t begin = 0;
  for (std::size_t k = 1; k <= order_.size(); ++k) {
    if (k == order_.size() || y_[order_[k]] != y_[order_[begin]]) {
      groups_.push_back({begin, k});
      begin = k;
    }
  }
}

SurvivalDataset SurvivalDataset::from_observations(std::span<const SurvivalObservation> obs,
                                                   double tau) {
  if (obs.empty()) throw SizeError("dataset has no observations");
  const std::size_t d = obs.front().z.size();
  std::vector<double> y, z;
  std::vector<int> delta;
  for (const auto& o : obs) {
    if (o.z.size() != d) throw SizeError("observations have inconsistent covariate dimension");
    y.push_back(o.y);
    delta.push_back(o.delta);
    z.insert(z.end(), o.z.begin(), o.z.end());
  }
  return SurvivalDataset(std::move(y), std::move(delta), std::move(z), d, tau);
}

double CumulativeHazard::operator()(double t) const {
  const auto end = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return std::accumulate(jump_sizes.begin(),
                         jump_sizes.begin() + (end - jump_times.begin()), 0.0);
}

double CumulativeHazard::total() const {
  return std::accumulate(jump_sizes.begin(), jump_sizes.end(), 0.0);
}

std::vector<double> unit_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

// ---------------------------------------------------------------------------
// Risk-set sweep

namespace {

// One pass over the data in descending time accumulating the weighted
// risk-set sums S0 = sum w e^{theta'z}, S1 = sum w e^{theta'z} z and
// S2 = sum w e^{theta'z} z z'. The sums are held relative to the running
// maximum of theta'z so that no exponent overflows.
class RiskSetSweep {
 public:
  RiskSetSweep(const SurvivalDataset& data, std::span<const double> weights)
      : data_(data), weights_(weights), d_(data.d()) {
    if (weights.size() != data.n()) throw SizeError("weight vector length must equal n");
    double event_weight = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
        throw DomainError("weights must be finite and non-negative");
      }
      if (data.delta(i) == 1) event_weight += weights[i];
    }
    if (!(event_weight > 0.0)) throw UnfittableError("no event carries positive weight");
    lin_.resize(data.n());
    s1_.resize(d_);
    s2_.resize(d_ * d_);
    zbar_.resize(d_);
  }

  // Visitor receives (time, weighted events, log S0, zbar, S2/S0 pointer,
  // weighted sum of events' linear predictors, weighted sum of events' z).
  template <class OnEventTime>
  void run(const Eigen::VectorXd& theta, bool second_order, OnEventTime&& on_event) {
    const auto& order = data_.order_desc();
    for (std::size_t i = 0; i < data_.n(); ++i) {
      const auto zi = data_.z(i);
      double s = 0.0;
      for (std::size_t k = 0; k < d_; ++k) s += theta[static_cast<Eigen::Index>(k)] * zi[k];
      lin_[i] = s;
    }
    double shift = -std::numeric_limits<double>::infinity();
    double s0 = 0.0;
    std::fill(s1_.begin(), s1_.end(), 0.0);
    std::fill(s2_.begin(), s2_.end(), 0.0);
    std::vector<double> event_z(d_);
    for (const auto& group : data_.time_groups()) {
      double events = 0.0;
      double event_lin = 0.0;
      std::fill(event_z.begin(), event_z.end(), 0.0);
      for (std::size_t pos = group.begin; pos < group.end; ++pos) {
        const std::size_t i = order[pos];
        const double w = weights_[i];
        if (w == 0.0) continue;
        if (lin_[i] > shift) {
          const double rescale = std::isfinite(shift) ? std::exp(shift - lin_[i]) : 0.0;
          s0 *= rescale;
          for (auto& v : s1_) v *= rescale;
          if (second_order) {
            for (auto& v : s2_) v *= rescale;
          }
          shift = lin_[i];
        }
        const double e = w * std::exp(lin_[i] - shift);
        const auto zi = data_.z(i);
        s0 += e;
        for (std::size_t a = 0; a < d_; ++a) {
          s1_[a] += e * zi[a];
          if (second_order) {
            for (std::size_t b = 0; b <= a; ++b) s2_[a * d_ + b] += e * zi[a] * zi[b];
          }
        }
        if (data_.delta(i) == 1) {
          events += w;
          event_lin += w * lin_[i];
          for (std::size_t a = 0; a < d_; ++a) event_z[a] += w * zi[a];
        }
      }
      if (events == 0.0) continue;
      if (!(s0 > 0.0)) throw DegenerateRiskSetError("empty risk set at an event time");
      const double log_s0 = shift + std::log(s0);
      for (std::size_t a = 0; a < d_; ++a) zbar_[a] = s1_[a] / s0;
      on_event(data_.y(order[group.begin]), events, log_s0, zbar_, s2_, s0, event_lin, event_z);
    }
  }

  std::size_t d() const noexcept { return d_; }

 private:
  const SurvivalDataset& data_;
  std::span<const double> weights_;
  std::size_t d_;
  std::vector<double> lin_;
  std::vector<double> s1_;
  std::vector<double> s2_;
  std::vector<double> zbar_;
};

PartialLikelihood evaluate(RiskSetSweep& sweep, const Eigen::VectorXd& theta) {
  const std::size_t d = sweep.d();
  PartialLikelihood out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  out.hessian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  double value = 0.0;
  sweep.run(theta, true,
            [&](double, double events, double log_s0, const std::vector<double>& zbar,
                const std::vector<double>& s2, double s0, double event_lin,
                const std::vector<double>& event_z) {
              value += event_lin - events * log_s0;
              for (std::size_t a = 0; a < d; ++a) {
                const auto ia = static_cast<Eigen::Index>(a);
                out.gradient[ia] += event_z[a] - events * zbar[a];
                for (std::size_t b = 0; b <= a; ++b) {
                  const auto ib = static_cast<Eigen::Index>(b);
                  const double cov = s2[a * d + b] / s0 - zbar[a] * zbar[b];
                  out.hessian(ia, ib) -= events * cov;
                }
              }
            });
  for (Eigen::Index a = 0; a < out.hessian.rows(); ++a) {
    for (Eigen::Index b = 0; b < a; ++b) out.hessian(b, a) = out.hessian(a, b);
  }
  out.value = value;
  return out;
}

CumulativeHazard breslow(RiskSetSweep& sweep, const Eigen::VectorXd& theta) {
  CumulativeHazard h;
  sweep.run(theta, false,
            [&](double t, double events, double log_s0, const std::vector<double>&,
                const std::vector<double>&, double, double, const std::vector<double>&) {
              h.jump_times.push_back(t);
              h.jump_sizes.push_back(std::exp(std::log(events) - log_s0));
            });
  std::reverse(h.jump_times.begin(), h.jump_times.end());
  std::reverse(h.jump_sizes.begin(), h.jump_sizes.end());
  return h;
}

double sup_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

PartialLikelihood log_partial_likelihood(const Eigen::VectorXd& theta,
                                         const SurvivalDataset& data,
                                         std::span<const double> weights) {
  if (static_cast<std::size_t>(theta.size()) != data.d()) {
    throw SizeError("theta dimension must equal the covariate dimension");
  }
  RiskSetSweep sweep(data, weights);
  return evaluate(sweep, theta);
}

CumulativeHazard weighted_breslow(const Eigen::VectorXd& theta, const SurvivalDataset& data,
                                  std::span<const double> weights) {
  if (static_cast<std::size_t>(theta.size()) != data.d()) {
    throw SizeError("theta dimension must equal the covariate dimension");
  }
  RiskSetSweep sweep(data, weights);
  return breslow(sweep, theta);
}

// ---------------------------------------------------------------------------
// Newton solver

CoxFit fit(const SurvivalDataset& data, std::span<const double> weights,
           const FitOptions& options) {
  const auto d = static_cast<Eigen::Index>(data.d());
  RiskSetSweep sweep(data, weights);
  Eigen::VectorXd theta = options.initial_theta.value_or(Eigen::VectorXd::Zero(d));
  if (theta.size() != d) throw SizeError("initial theta has the wrong dimension");

  CoxFit out;
  PartialLikelihood current = evaluate(sweep, theta);
  for (;;) {
    const double score = sup_norm(current.gradient);
    Eigen::VectorXd step;
    const Eigen::MatrixXd neg_hessian = -current.hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_hessian);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
        ldlt.vectorD().minCoeff() > 0.0) {
      step = ldlt.solve(current.gradient);
    } else {
      step = neg_hessian.completeOrthogonalDecomposition().solve(current.gradient);
    }
    if (score < options.tolerance) {
      // A vanishing score with a non-vanishing Newton step means the surface
      // is flattening out along an unbounded ascent direction.
      if (sup_norm(step) <= 1e-6 * (1.0 + sup_norm(theta))) {
        out.converged = true;
      } else {
        out.monotone_likelihood = true;
      }
      break;
    }
    if (out.iterations >= options.max_iterations) break;

    bool accepted = false;
    double scale = 1.0;
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(current.value));
    for (int h = 0; h <= options.max_halvings; ++h, scale *= 0.5) {
      Eigen::VectorXd candidate = theta + scale * step;
      PartialLikelihood next = evaluate(sweep, candidate);
      if (std::isfinite(next.value) && next.value >= current.value - slack) {
        theta = std::move(candidate);
        current = std::move(next);
        accepted = true;
        break;
      }
    }
    ++out.iterations;
    if (!accepted) break;
    if (sup_norm(theta) > options.theta_cap) {
      out.monotone_likelihood = true;
      break;
    }
  }

  out.theta_hat = theta;
  out.log_partial_likelihood = current.value;
  out.score_sup_norm = sup_norm(current.gradient);
  out.observed_information = -current.hessian;
  out.eta_hat = breslow(sweep, theta);
  if (options.hazard_bound && out.eta_hat.total() > *options.hazard_bound) {
    out.hazard_bound_exceeded = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Information estimates

Eigen::MatrixXd invert_information(const Eigen::MatrixXd& information) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(information);
  const double max_ev = eig.eigenvalues().maxCoeff();
  const double min_ev = eig.eigenvalues().minCoeff();
  const double cond = (min_ev > 0.0) ? max_ev / min_ev : std::numeric_limits<double>::infinity();
  if (!(max_ev > 0.0) || !(min_ev > 1e-12 * max_ev)) {
    throw SingularMatrixError(
        "information matrix is singular (condition number " + std::to_string(cond) + ")", cond);
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

Eigen::MatrixXd plugin_efficient_information(const CoxFit& fit, const SurvivalDataset& data) {
  const std::size_t n = data.n();
  const std::size_t d = data.d();
  const auto w = unit_weights(n);
  RiskSetSweep sweep(data, w);

  // Event times in ascending order with dLambda and the risk-set mean zbar.
  std::vector<double> times, dlambda, zbars;
  sweep.run(fit.theta_hat, false,
            [&](double t, double events, double log_s0, const std::vector<double>& zbar,
                const std::vector<double>&, double, double, const std::vector<double>&) {
              times.push_back(t);
              dlambda.push_back(std::exp(std::log(events) - log_s0));
              zbars.insert(zbars.end(), zbar.begin(), zbar.end());
            });
  const std::size_t m = times.size();
  // Reverse into ascending order; accumulate A(t) = sum dLambda and
  // B(t) = sum zbar dLambda over event times <= t.
  std::vector<double> cum_a(m), cum_b(m * d);
  double a_acc = 0.0;
  std::vector<double> b_acc(d, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t src = m - 1 - k;
    a_acc += dlambda[src];
    for (std::size_t j = 0; j < d; ++j) b_acc[j] += zbars[src * d + j] * dlambda[src];
    cum_a[k] = a_acc;
    std::copy(b_acc.begin(), b_acc.end(), cum_b.begin() + static_cast<std::ptrdiff_t>(k * d));
  }
  std::vector<double> asc_times(times.rbegin(), times.rend());

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd score(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const auto zi = data.z(i);
    double lin = 0.0;
    for (std::size_t j = 0; j < d; ++j) lin += fit.theta_hat[static_cast<Eigen::Index>(j)] * zi[j];
    const double risk = std::exp(lin);
    const auto pos = static_cast<std::size_t>(
        std::upper_bound(asc_times.begin(), asc_times.end(), data.y(i)) - asc_times.begin());
    for (std::size_t j = 0; j < d; ++j) {
      double integral = 0.0;
      if (pos > 0) integral = zi[j] * cum_a[pos - 1] - cum_b[(pos - 1) * d + j];
      double s = -risk * integral;
      if (data.delta(i) == 1) {
        // y_i is itself an event time, the last one <= y_i.
        s += zi[j] - zbars[(m - pos) * d + j];
      }
      score[static_cast<Eigen::Index>(j)] = s;
    }
    info.noalias() += score * score.transpose();
  }
  info /= static_cast<double>(n);
  info = 0.5 * (info + info.transpose());
  invert_information(info);  // singularity check with condition-number report
  return info;
}

Eigen::MatrixXd profile_information(const CoxFit& fit, const SurvivalDataset& data) {
  const auto w = unit_weights(data.n());
  const auto pl = log_partial_likelihood(fit.theta_hat, data, w);
  return -pl.hessian / static_cast<double>(data.n());
}

// ---------------------------------------------------------------------------
// Simulation

double Baseline::cumulative(double t) const {
  if (kind == BaselineKind::Constant) return rate * t;
  return std::pow(t / scale, shape);
}

double Baseline::inverse_cumulative(double x) const {
  if (kind == BaselineKind::Constant) return x / rate;
  return scale * std::pow(x, 1.0 / shape);
}

void SimulationConfig::validate() const {
  if (theta0.empty()) throw ConfigError("simulation.theta0", "must have at least one coordinate");
  for (double t : theta0) {
    if (!std::isfinite(t)) throw ConfigError("simulation.theta0", "must be finite");
  }
  if (baseline.kind == BaselineKind::Constant) {
    if (!(baseline.rate > 0.0) || !std::isfinite(baseline.rate)) {
      throw ConfigError("simulation.baseline_rate", "must be positive");
    }
  } else {
    if (!(baseline.shape > 0.0) || !std::isfinite(baseline.shape)) {
      throw ConfigError("simulation.weibull_shape", "must be positive");
    }
    if (!(baseline.scale > 0.0) || !std::isfinite(baseline.scale)) {
      throw ConfigError("simulation.weibull_scale", "must be positive");
    }
  }
  if (!(censoring_rate >= 0.0) || !std::isfinite(censoring_rate)) {
    throw ConfigError("simulation.censoring_rate", "must be non-negative");
  }
  if (!(tau > 0.0)) throw ConfigError("simulation.tau", "must be positive");
  if (n < 2) throw ConfigError("simulation.n", "must be at least 2");
}

SurvivalDataset simulate_dataset(const SimulationConfig& config, RandomStream& rng) {
  config.validate();
  const std::size_t d = config.theta0.size();
  std::vector<double> y(config.n), z(config.n * d);
  std::vector<int> delta(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    double lin = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double zk = config.covariates == CovariateLaw::Uniform
                            ? rng.uniform()
                            : (rng.below(2) == 0 ? -1.0 : 1.0);
      z[i * d + k] = zk;
      lin += config.theta0[k] * zk;
    }
    const double t = config.baseline.inverse_cumulative(rng.exponential() * std::exp(-lin));
    const double c = config.censoring_rate > 0.0 ? rng.exponential(config.censoring_rate)
                                                 : std::numeric_limits<double>::infinity();
    y[i] = std::min({t, c, config.tau});
    delta[i] = (t <= c && t <= config.tau) ? 1 : 0;
  }
  return SurvivalDataset(std::move(y), std::move(delta), std::move(z), d, config.tau);
}

double hazard_sup_distance(const CumulativeHazard& eta_hat, const Baseline& baseline, double tau) {
  // eta_hat is constant on [t_k, t_{k+1}) while eta0 increases, so the
  // supremum is attained at an interval end point (left limit on the right).
  double level = 0.0;
  double left = 0.0;
  double best = 0.0;
  auto visit = [&](double right) {
    best = std::max({best, std::abs(level - baseline.cumulative(left)),
                     std::abs(level - baseline.cumulative(right))});
  };
  for (std::size_t k = 0; k < eta_hat.jump_times.size(); ++k) {
    const double t = eta_hat.jump_times[k];
    if (t > tau) break;
    visit(t);
    level += eta_hat.jump_sizes[k];
    left = t;
  }
  visit(tau);
  return best;
}

RateDiagnostic nuisance_rate_diagnostic(const SimulationConfig& config,
                                        std::span<const std::size_t> n_grid,
                                        std::size_t replications, const RandomStream& rng,
                                        unsigned threads) {
  if (n_grid.empty()) throw SizeError("rate diagnostic needs a non-empty n grid");
  if (replications < 1) throw SizeError("rate diagnostic needs at least one replication");
  if (!std::isfinite(config.tau)) {
    throw ConfigError("simulation.tau", "rate diagnostic needs a finite follow-up horizon");
  }
  RateDiagnostic out;
  std::vector<double> all_n, all_stat;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    SimulationConfig cfg = config;
    cfg.n = n_grid[g];
    RateRow row;
    row.n = cfg.n;
    row.values.resize(replications);
    parallel_for(replications, threads, [&](std::size_t r) {
      RandomStream stream = rng.substream("rate", g).substream(r);
      const auto data = simulate_dataset(cfg, stream);
      const auto f = fit(data, unit_weights(data.n()));
      row.values[r] = std::sqrt(static_cast<double>(cfg.n)) *
                      hazard_sup_distance(f.eta_hat, cfg.baseline, data.tau());
    });
    row.median = stats::median(row.values);
    row.median_se = stats::median_standard_error(row.values);
    row.mean = stats::mean(row.values);
    for (double v : row.values) {
      all_n.push_back(static_cast<double>(row.n));
      all_stat.push_back(v);
    }
    out.rows.push_back(std::move(row));
  }
  if (all_n.size() >= 3) {
    const auto trend = stats::kendall_trend(all_n, all_stat);
    out.kendall_tau = trend.tau_b;
    out.trend_p_value = trend.p_increasing;
  }
  out.bounded = out.trend_p_value >= 0.05;
  return out;
}

}  // namespace ewboot
