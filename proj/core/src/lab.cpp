#include "ewboot/lab.hpp"

#include <algorithm>
#include <cmath>

#include "ewboot/errors.hpp"
#include "ewboot/format.hpp"
#include "ewboot/parallel.hpp"
#include "ewboot/stats.hpp"

namespace ewboot {

double ks_distance(std::span<const double> sample, double mean, double variance) {
  if (sample.empty()) throw SizeError("ks_distance needs a non-empty sample");
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw DomainError("ks_distance needs a positive finite variance");
  }
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = std::sqrt(variance);
  const double m = static_cast<double>(sorted.size());
  double best = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = stats::normal_cdf((sorted[i] - mean) / sd);
    best = std::max({best, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
  }
  return best;
}

std::string to_string(SigmaSource source) {
  switch (source) {
    case SigmaSource::Plugin:
      return "plugin";
    case SigmaSource::Profile:
      return "profile";
    case SigmaSource::Bootstrap:
      return "bootstrap";
  }
  return "?";
}

SigmaSource parse_sigma_source(std::string_view text) {
  if (text == "plugin") return SigmaSource::Plugin;
  if (text == "profile") return SigmaSource::Profile;
  if (text == "bootstrap") return SigmaSource::Bootstrap;
  throw ConfigError("sigma", "expected plugin, profile or bootstrap");
}

void ExperimentConfig::validate() const {
  simulation.validate();
  if (n_grid.empty()) throw ConfigError("experiment.n_grid", "must not be empty");
  for (auto n : n_grid) {
    if (n < 2) throw ConfigError("experiment.n_grid", "sample sizes must be at least 2");
  }
  if (B < 2) throw ConfigError("bootstrap.B", "must be at least 2");
  if (mc_reps < 1) throw ConfigError("experiment.mc_reps", "must be at least 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("experiment.alpha", "must lie in (0, 1]");
  for (int p : moments) {
    if (p < 1 || p > 4) throw ConfigError("experiment.moments", "orders must lie in 1..4");
  }
}

ExperimentConfig desk_profile() {
  ExperimentConfig c;
  c.simulation.theta0 = {0.5};
  c.simulation.baseline = Baseline{BaselineKind::Constant, 1.0, 1.0, 1.0};
  c.simulation.covariates = CovariateLaw::Uniform;
  c.simulation.censoring_rate = 0.55;
  c.simulation.tau = 4.0;
  c.simulation.n = 400;
  c.n_grid = {400};
  c.B = 2000;
  c.mc_reps = 500;
  c.alpha = 0.05;
  return c;
}

std::vector<ReplicateOutcome> simulate_replicates(const ExperimentConfig& config, std::size_t n) {
  config.validate();
  const int max_order =
      config.moments.empty() ? 0 : *std::max_element(config.moments.begin(), config.moments.end());
  const RandomStream root = RandomStream(config.seed).substream("mc", n);
  std::vector<ReplicateOutcome> outcomes(config.mc_reps);

  parallel_for(config.mc_reps, config.threads, [&](std::size_t r) {
    ReplicateOutcome& out = outcomes[r];
    out.rep = r;
    RandomStream stream = root.substream(r);
    SimulationConfig sim = config.simulation;
    sim.n = n;
    const SurvivalDataset data = simulate_dataset(sim, stream);
    CoxFit base;
    try {
      base = fit(data, unit_weights(n));
    } catch (const UnfittableError&) {
      out.failure = "dataset has no events";
      return;
    }
    if (!base.converged) {
      out.failure = "base fit did not converge";
      return;
    }
    out.theta_hat = base.theta_hat;
    try {
      out.sigma_plugin = invert_information(plugin_efficient_information(base, data));
      out.sigma_profile = invert_information(profile_information(base, data));
    } catch (const SingularMatrixError&) {
      out.failure = "singular information estimate";
      return;
    }

    BootstrapOptions options;
    options.threads = 1;
    options.strict = config.strict;
    const auto run = run_bootstrap(data, base, config.scheme, config.B,
                                   stream.substream("bootstrap").key(), options);
    out.excluded = run.excluded.size();
    out.c2 = run.c2;
    if (run.usable() < 2) {
      out.failure = "fewer than two usable bootstrap replicates";
      return;
    }
    out.sigma_star = variance_estimate(run);

    const auto d = base.theta_hat.size();
    const double scale = std::sqrt(static_cast<double>(n) / run.c2);
    out.ks.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      std::vector<double> t(run.usable());
      for (std::size_t b = 0; b < run.usable(); ++b) {
        t[b] = scale * (run.theta_stars(static_cast<Eigen::Index>(b), j) - base.theta_hat[j]);
      }
      out.ks[j] = ks_distance(t, 0.0, out.sigma_plugin(j, j));
    }
    for (int p = 1; p <= max_order; ++p) out.moments.push_back(moment_estimate(run, p));

    if (config.alpha < 1.0) {
      const Eigen::MatrixXd& sigma = config.sigma == SigmaSource::Plugin    ? out.sigma_plugin
                                     : config.sigma == SigmaSource::Profile ? out.sigma_profile
                                                                            : out.sigma_star;
      out.intervals.push_back(t_confidence_set(run, sigma, config.alpha));
      out.intervals.push_back(percentile_confidence_set(run, config.alpha));
      out.intervals.push_back(hybrid_confidence_set(run, config.alpha));
    }
    out.usable = true;
  });
  return outcomes;
}

bool ExperimentReport::all_pass() const {
  return std::all_of(records.begin(), records.end(),
                     [](const ReportRecord& r) { return !r.pass.has_value() || *r.pass; });
}

namespace {

std::vector<const ReplicateOutcome*> usable_outcomes(std::span<const ReplicateOutcome> outcomes) {
  std::vector<const ReplicateOutcome*> out;
  for (const auto& o : outcomes) {
    if (o.usable) out.push_back(&o);
  }
  if (out.empty()) throw InsufficientReplicatesError("no usable Monte Carlo replicates");
  return out;
}

ReportRecord record(const std::string& experiment, std::size_t n, std::string statistic,
                    int coordinate, double value) {
  ReportRecord r;
  r.experiment = experiment;
  r.n = n;
  r.statistic = std::move(statistic);
  r.coordinate = coordinate;
  r.value = value;
  return r;
}

void add_bookkeeping(ExperimentReport& report, std::size_t n,
                     std::span<const ReplicateOutcome> outcomes) {
  std::size_t usable = 0, excluded = 0;
  for (const auto& o : outcomes) {
    usable += o.usable ? 1 : 0;
    excluded += o.excluded;
  }
  report.records.push_back(
      record(report.experiment, n, "usable_datasets", -1, static_cast<double>(usable)));
  report.records.push_back(
      record(report.experiment, n, "excluded_bootstrap_replicates", -1, static_cast<double>(excluded)));
}

}  // namespace

ExperimentReport summarize_distribution(const ExperimentConfig& config, std::size_t n,
                                        std::span<const ReplicateOutcome> outcomes) {
  ExperimentReport report;
  report.experiment = "distribution";
  report.config = config;
  const auto used = usable_outcomes(outcomes);
  for (const auto* o : used) {
    if (o->sigma_star.cwiseAbs().maxCoeff() == 0.0) {
      throw ZeroVarianceError(
          "bootstrap distribution has zero variance; the weight scheme does not resample");
    }
  }
  const auto d = used.front()->theta_hat.size();
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<double> ks;
    for (const auto* o : used) ks.push_back(o->ks[j]);
    auto med = record(report.experiment, n, "ks_median", static_cast<int>(j), stats::median(ks));
    med.mc_se = stats::median_standard_error(ks);
    med.target = 0.05;
    med.pass = med.value <= 0.05;
    report.records.push_back(med);
    auto mean = record(report.experiment, n, "ks_mean", static_cast<int>(j), stats::mean(ks));
    mean.mc_se = std::sqrt(stats::sample_variance(ks) / static_cast<double>(ks.size()));
    report.records.push_back(mean);
  }
  add_bookkeeping(report, n, outcomes);
  return report;
}

ExperimentReport summarize_variance_and_moments(const ExperimentConfig& config, std::size_t n,
                                                std::span<const ReplicateOutcome> outcomes) {
  ExperimentReport report;
  report.experiment = "variance_moments";
  report.config = config;
  const auto used = usable_outcomes(outcomes);
  const double m = static_cast<double>(used.size());
  const double root_n = std::sqrt(static_cast<double>(n));
  const auto d = used.front()->theta_hat.size();
  for (Eigen::Index j = 0; j < d; ++j) {
    const int coord = static_cast<int>(j);
    std::vector<double> scaled_err, star, plugin;
    for (const auto* o : used) {
      scaled_err.push_back(root_n * (o->theta_hat[j] - config.simulation.theta0[static_cast<std::size_t>(j)]));
      star.push_back(o->sigma_star(j, j));
      plugin.push_back(o->sigma_plugin(j, j));
    }
    const double mc_var = stats::sample_variance(scaled_err);
    const double mc_var_se = mc_var * std::sqrt(2.0 / std::max(1.0, m - 1.0));
    const double star_mean = stats::mean(star);
    const double star_se = std::sqrt(stats::sample_variance(star) / m);
    const double plugin_mean = stats::mean(plugin);
    const double plugin_se = std::sqrt(stats::sample_variance(plugin) / m);

    auto add = [&](std::string name, double value, double se) {
      auto r = record(report.experiment, n, std::move(name), coord, value);
      r.mc_se = se;
      report.records.push_back(r);
    };
    add("mc_variance", mc_var, mc_var_se);
    add("sigma_star_mean", star_mean, star_se);
    add("plugin_sigma_mean", plugin_mean, plugin_se);

    auto ratio = [&](std::string name, double num, double num_se, double den, double den_se,
                     double tol) {
      const double value = num / den;
      auto r = record(report.experiment, n, std::move(name), coord, value);
      r.mc_se = value * std::hypot(num_se / num, den_se / den);
      r.target = 1.0;
      r.pass = std::abs(value - 1.0) <= tol;
      report.records.push_back(r);
    };
    ratio("ratio_sigma_star_to_mc_variance", star_mean, star_se, mc_var, mc_var_se, 0.15);
    ratio("ratio_sigma_star_to_plugin", star_mean, star_se, plugin_mean, plugin_se, 0.20);

    for (int p : config.moments) {
      std::vector<double> normalized;
      for (const auto* o : used) {
        const double sigma = o->sigma_plugin(j, j);
        const double denom = std::pow(o->c2 * sigma, p / 2.0);
        normalized.push_back(o->moments[static_cast<std::size_t>(p - 1)][j] / denom);
      }
      const double target = stats::gaussian_moment(p);
      auto r = record(report.experiment, n, "moment_p" + std::to_string(p) + "_normalized_median",
                      coord, stats::median(normalized));
      r.mc_se = stats::median_standard_error(normalized);
      r.target = target;
      r.pass = (p % 2 == 1) ? std::abs(r.value) <= 0.1 : std::abs(r.value / target - 1.0) <= 0.15;
      report.records.push_back(r);
    }
  }
  add_bookkeeping(report, n, outcomes);
  return report;
}

ExperimentReport summarize_coverage(const ExperimentConfig& config, std::size_t n,
                                    std::span<const ReplicateOutcome> outcomes) {
  ExperimentReport report;
  report.experiment = "coverage";
  report.config = config;
  const auto used = usable_outcomes(outcomes);
  const double m = static_cast<double>(used.size());
  const double nominal = 1.0 - config.alpha;
  if (config.alpha >= 1.0 && config.strict) {
    throw DomainError("alpha = 1 gives a level-0 interval");
  }
  const Eigen::VectorXd theta0 = Eigen::Map<const Eigen::VectorXd>(
      config.simulation.theta0.data(), static_cast<Eigen::Index>(config.simulation.theta0.size()));
  for (auto kind : {IntervalKind::TType, IntervalKind::Percentile, IntervalKind::Hybrid}) {
    double covered = 0.0;
    for (const auto* o : used) {
      if (o->intervals.empty()) continue;  // level-0 set is empty
      covered += o->intervals[static_cast<std::size_t>(kind)].contains(theta0) ? 1.0 : 0.0;
    }
    const double p = covered / m;
    auto r = record(report.experiment, n, "coverage_" + to_string(kind), -1, p);
    r.mc_se = std::sqrt(p * (1.0 - p) / m);
    r.target = nominal;
    const double band = kind == IntervalKind::TType ? 0.03 : 0.04;
    r.pass = config.alpha < 1.0 ? std::abs(p - nominal) <= band : p == 0.0;
    report.records.push_back(r);
  }
  add_bookkeeping(report, n, outcomes);
  return report;
}

namespace {

template <class Summarize>
ExperimentReport run_experiment(const ExperimentConfig& config, Summarize&& summarize) {
  config.validate();
  ExperimentReport out;
  out.config = config;
  for (std::size_t n : config.n_grid) {
    const auto outcomes = simulate_replicates(config, n);
    auto part = summarize(config, n, outcomes);
    out.experiment = part.experiment;
    out.records.insert(out.records.end(), part.records.begin(), part.records.end());
  }
  return out;
}

}  // namespace

ExperimentReport distribution_consistency_experiment(const ExperimentConfig& config) {
  return run_experiment(config, summarize_distribution);
}

ExperimentReport variance_and_moment_experiment(const ExperimentConfig& config) {
  return run_experiment(config, summarize_variance_and_moments);
}

ExperimentReport coverage_experiment(const ExperimentConfig& config) {
  if (config.alpha >= 1.0 && config.strict) {
    throw DomainError("alpha = 1 gives a level-0 interval");
  }
  return run_experiment(config, summarize_coverage);
}

// ---------------------------------------------------------------------------
// ||.||_{2,1} sandwich

double PositiveLaw::sample(RandomStream& rng) const {
  switch (kind) {
    case Kind::Degenerate:
      return value;
    case Kind::Uniform:
      return lower + (upper - lower) * rng.uniform();
    case Kind::GammaMixture: {
      double total = 0.0;
      for (const auto& c : components) total += c.weight;
      double u = rng.uniform() * total;
      for (const auto& c : components) {
        if (u < c.weight) return rng.gamma(c.shape, c.rate);
        u -= c.weight;
      }
      const auto& last = components.back();
      return rng.gamma(last.shape, last.rate);
    }
  }
  return value;
}

std::string PositiveLaw::describe() const {
  switch (kind) {
    case Kind::Degenerate:
      return "degenerate(" + format_double(value) + ")";
    case Kind::Uniform:
      return "uniform(" + format_double(lower) + "," + format_double(upper) + ")";
    case Kind::GammaMixture: {
      std::string s = "gamma_mixture(";
      for (std::size_t i = 0; i < components.size(); ++i) {
        if (i) s += ";";
        s += format_double(components[i].weight) + ":" + format_double(components[i].shape) +
             "/" + format_double(components[i].rate);
      }
      return s + ")";
    }
  }
  return "?";
}

PositiveLaw random_gamma_mixture(RandomStream& rng) {
  PositiveLaw law;
  law.kind = PositiveLaw::Kind::GammaMixture;
  const std::size_t k = 1 + rng.below(3);
  for (std::size_t i = 0; i < k; ++i) {
    law.components.push_back(
        {0.1 + rng.uniform(), 0.5 + 4.5 * rng.uniform(), 0.5 + 2.5 * rng.uniform()});
  }
  return law;
}

namespace {

struct NormTriple {
  double l2, l21, lr;
};

NormTriple norms(std::span<const double> sample, double r) {
  double s2 = 0.0, sr = 0.0;
  for (double y : sample) {
    s2 += y * y;
    sr += std::pow(y, r);
  }
  const double m = static_cast<double>(sample.size());
  return {std::sqrt(s2 / m), l21_norm(empirical_survival(sample)), std::pow(sr / m, 1.0 / r)};
}

}  // namespace

NormInequalityMargin norm_inequality_check(const PositiveLaw& law, double r,
                                           std::size_t sample_size, RandomStream& rng) {
  if (!(r > 2.0)) throw DomainError("norm inequality needs r > 2");
  if (sample_size < 1) throw SizeError("norm inequality needs a non-empty sample");
  std::vector<double> sample(sample_size);
  for (auto& y : sample) {
    y = law.sample(rng);
    if (!(y >= 0.0)) throw DomainError("law produced a negative value");
  }
  const double factor = r / (r - 2.0);
  NormInequalityMargin out;
  out.r = r;
  const auto full = norms(sample, r);
  out.l2 = full.l2;
  out.l21 = full.l21;
  out.lr = full.lr;
  out.lower_margin = full.l21 - 0.5 * full.l2;
  out.upper_margin = factor * full.lr - full.l21;

  constexpr std::size_t batches = 20;
  if (sample_size >= 2 * batches) {
    const std::size_t size = sample_size / batches;
    std::vector<double> lower, upper;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto part = norms(std::span<const double>(sample).subspan(b * size, size), r);
      lower.push_back(part.l21 - 0.5 * part.l2);
      upper.push_back(factor * part.lr - part.l21);
    }
    out.lower_se = std::sqrt(stats::sample_variance(lower) / batches);
    out.upper_se = std::sqrt(stats::sample_variance(upper) / batches);
  }
  out.violation = out.lower_margin < -3.0 * out.lower_se || out.upper_margin < -3.0 * out.upper_se;
  return out;
}

// ---------------------------------------------------------------------------
// L_p multiplier inequality

std::vector<TestFunction> polynomial_class() {
  return {{"x", [](double x) { return x; }, 0.5},
          {"x^2", [](double x) { return x * x; }, 1.0 / 3.0},
          {"x^3", [](double x) { return x * x * x; }, 0.25}};
}

namespace {

struct MeanWithError {
  double mean = 0.0;
  double se = 0.0;
};

MeanWithError mean_se(std::span<const double> v) {
  return {stats::mean(v), std::sqrt(stats::sample_variance(v) / static_cast<double>(v.size()))};
}

// (E V)^{1/p} with a delta-method standard error.
MeanWithError root_norm(const MeanWithError& m, int p) {
  if (m.mean <= 0.0) return {0.0, 0.0};
  const double value = std::pow(m.mean, 1.0 / p);
  return {value, value / p * m.se / m.mean};
}

}  // namespace

MultiplierResult multiplier_inequality_check(const MultiplierCheck& check,
                                             std::span<const TestFunction> function_class,
                                             RandomStream& rng) {
  if (check.p < 1) throw DomainError("multiplier inequality needs p >= 1");
  if (check.n0 < 1 || check.n0 >= check.n) throw DomainError("need 1 <= n0 < n");
  if (function_class.empty()) throw SizeError("function class must not be empty");
  if (check.mc_draws < 2) throw SizeError("multiplier inequality needs at least two draws");
  const std::size_t n = check.n;
  const std::size_t k = function_class.size();
  const int p = check.p;
  const double root_n = std::sqrt(static_cast<double>(n));

  std::vector<double> lhs_draws(check.mc_draws), z_norm_draws(check.mc_draws),
      max_w_draws(check.mc_draws), partial_draws(check.mc_draws);
  const std::size_t weights_per_draw =
      std::min(n, std::max<std::size_t>(1, 200'000 / check.mc_draws));
  std::vector<double> pooled_weights;
  pooled_weights.reserve(weights_per_draw * check.mc_draws);

  RandomStream x_stream = rng.substream("x");
  RandomStream w_stream = rng.substream("w");
  std::vector<double> z(n * k);
  std::vector<double> weighted(k), partial(k);
  for (std::size_t t = 0; t < check.mc_draws; ++t) {
    double z_norm_acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = x_stream.uniform();
      double row_max = 0.0;
      for (std::size_t f = 0; f < k; ++f) {
        const double v = function_class[f].f(x) - function_class[f].mean;
        z[i * k + f] = v;
        row_max = std::max(row_max, std::abs(v));
      }
      z_norm_acc += std::pow(row_max, p);
    }
    const auto w = generate_weights(check.scheme, n, w_stream);

    std::fill(weighted.begin(), weighted.end(), 0.0);
    std::fill(partial.begin(), partial.end(), 0.0);
    double max_partial = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < k; ++f) weighted[f] += w.values[i] * z[i * k + f];
      if (i + 1 > check.n0) {
        double norm = 0.0;
        for (std::size_t f = 0; f < k; ++f) {
          partial[f] += z[i * k + f];
          norm = std::max(norm, std::abs(partial[f]));
        }
        max_partial = std::max(max_partial, norm / std::sqrt(static_cast<double>(i + 1)));
      }
    }
    double sup = 0.0;
    for (double v : weighted) sup = std::max(sup, std::abs(v) / root_n);
    lhs_draws[t] = std::pow(sup, p);
    z_norm_draws[t] = z_norm_acc / static_cast<double>(n);
    max_w_draws[t] = std::pow(*std::max_element(w.values.begin(), w.values.end()), p);
    partial_draws[t] = std::pow(max_partial, p);
    pooled_weights.insert(pooled_weights.end(), w.values.begin(),
                          w.values.begin() + static_cast<std::ptrdiff_t>(weights_per_draw));
  }

  MultiplierResult out;
  const auto lhs = root_norm(mean_se(lhs_draws), p);
  const auto z_norm = root_norm(mean_se(z_norm_draws), p);
  const auto max_w = root_norm(mean_se(max_w_draws), p);
  const auto partial_norm = root_norm(mean_se(partial_draws), p);

  out.r_n = l21_norm(empirical_survival(pooled_weights));
  double r_n_se = 0.0;
  constexpr std::size_t batches = 20;
  if (check.mc_draws >= 2 * batches) {
    const std::size_t per = (check.mc_draws / batches) * weights_per_draw;
    std::vector<double> parts;
    for (std::size_t b = 0; b < batches; ++b) {
      parts.push_back(
          l21_norm(empirical_survival(std::span<const double>(pooled_weights).subspan(b * per, per))));
    }
    r_n_se = std::sqrt(stats::sample_variance(parts) / batches);
  }
  const double r_n_root = std::pow(out.r_n, 1.0 / p);
  const double r_n_root_se = r_n_root / p * (out.r_n > 0.0 ? r_n_se / out.r_n : 0.0);

  out.first_term = static_cast<double>(check.n0) * z_norm.mean * max_w.mean / root_n;
  const double first_rel = std::hypot(z_norm.mean > 0 ? z_norm.se / z_norm.mean : 0.0,
                                      max_w.mean > 0 ? max_w.se / max_w.mean : 0.0);
  out.second_term = r_n_root * partial_norm.mean;
  const double second_rel =
      std::hypot(r_n_root > 0 ? r_n_root_se / r_n_root : 0.0,
                 partial_norm.mean > 0 ? partial_norm.se / partial_norm.mean : 0.0);
  out.lhs = lhs.mean;
  out.lhs_se = lhs.se;
  out.rhs = out.first_term + out.second_term;
  out.rhs_se = std::hypot(out.first_term * first_rel, out.second_term * second_rel);
  const double combined = std::hypot(out.lhs_se, out.rhs_se);
  out.holds = out.lhs <= out.rhs + 3.0 * combined;
  out.precise = combined < 0.1 * std::abs(out.rhs - out.lhs);
  return out;
}

}  // namespace ewboot
