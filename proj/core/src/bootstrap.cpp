#include "ewboot/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "ewboot/errors.hpp"
#include "ewboot/parallel.hpp"
#include "ewboot/stats.hpp"

namespace ewboot {

BootstrapRun run_bootstrap(const SurvivalDataset& data, const CoxFit& base_fit,
                           const WeightScheme& scheme, std::size_t B, std::uint64_t seed,
                           const BootstrapOptions& options) {
  if (!base_fit.converged) throw DomainError("bootstrap needs a converged base fit");
  if (B < 2) throw SizeError("bootstrap needs B >= 2");
  const std::size_t n = data.n();
  const auto d = base_fit.theta_hat.size();

  FitOptions fit_options = options.fit;
  if (!fit_options.initial_theta) fit_options.initial_theta = base_fit.theta_hat;

  const RandomStream root(seed);
  std::vector<std::optional<Eigen::VectorXd>> results(B);
  parallel_for(B, options.threads, [&](std::size_t b) {
    RandomStream stream = root.substream("boot", b);
    const auto w = generate_weights(scheme, n, stream);
    try {
      const CoxFit f = fit(data, w.values, fit_options);
      if (f.converged) results[b] = f.theta_hat;
    } catch (const UnfittableError&) {
      // all events received zero weight; counted as excluded
    }
  });

  BootstrapRun run;
  run.scheme = scheme;
  run.c2 = normalizing_c2(scheme);
  run.n = n;
  run.B = B;
  run.base_fit = base_fit;
  run.seed = seed;
  std::size_t usable = 0;
  for (const auto& r : results) usable += r.has_value() ? 1 : 0;
  run.theta_stars.resize(static_cast<Eigen::Index>(usable), d);
  Eigen::Index row = 0;
  for (std::size_t b = 0; b < B; ++b) {
    if (results[b]) {
      run.theta_stars.row(row++) = results[b]->transpose();
    } else {
      run.excluded.push_back(b);
    }
  }
  const double fraction = static_cast<double>(run.excluded.size()) / static_cast<double>(B);
  run.unstable = fraction > options.max_excluded_fraction;
  if (run.unstable && options.strict) {
    throw UnstableResamplingError(std::to_string(run.excluded.size()) + " of " +
                                  std::to_string(B) + " bootstrap replicates were excluded");
  }
  return run;
}

namespace {

void require_replicates(const BootstrapRun& run) {
  if (run.usable() < 2) {
    throw InsufficientReplicatesError("fewer than two usable bootstrap replicates");
  }
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, j);
  return out;
}

ConfidenceSet make_set(IntervalKind kind, double alpha, Eigen::Index d) {
  ConfidenceSet cs;
  cs.kind = kind;
  cs.level = 1.0 - alpha;
  cs.lower.resize(d);
  cs.upper.resize(d);
  return cs;
}

}  // namespace

Eigen::MatrixXd variance_estimate(const BootstrapRun& run) {
  require_replicates(run);
  // Shifted by the first replicate so a constant cloud gives exactly zero.
  const Eigen::MatrixXd shifted = run.theta_stars.rowwise() - run.theta_stars.row(0);
  const Eigen::RowVectorXd mean = shifted.colwise().mean();
  const Eigen::MatrixXd centered = shifted.rowwise() - mean;
  const double scale =
      static_cast<double>(run.n) / (static_cast<double>(run.usable()) * run.c2);
  Eigen::MatrixXd v = scale * (centered.transpose() * centered);
  return 0.5 * (v + v.transpose());
}

Eigen::VectorXd moment_estimate(const BootstrapRun& run, int p) {
  if (p < 1) throw DomainError("moment order must be at least 1");
  require_replicates(run);
  const double root_n = std::sqrt(static_cast<double>(run.n));
  const auto d = run.theta_stars.cols();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (Eigen::Index r = 0; r < run.theta_stars.rows(); ++r) {
    for (Eigen::Index j = 0; j < d; ++j) {
      out[j] += std::pow(root_n * (run.theta_stars(r, j) - run.theta_hat()[j]), p);
    }
  }
  return out / static_cast<double>(run.usable());
}

std::string to_string(IntervalKind kind) {
  switch (kind) {
    case IntervalKind::TType:
      return "t_type";
    case IntervalKind::Percentile:
      return "percentile";
    case IntervalKind::Hybrid:
      return "hybrid";
  }
  return "?";
}

bool ConfidenceSet::contains(const Eigen::VectorXd& theta) const {
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (!(lower[j] <= theta[j] && theta[j] <= upper[j])) return false;
  }
  return true;
}

std::pair<double, double> studentized_interval(double theta_hat, std::span<const double> t_values,
                                               double sigma_jj, std::size_t n, double alpha) {
  require_alpha(alpha);
  if (!(sigma_jj > 0.0)) throw SingularMatrixError("variance estimate is not positive", 0.0);
  std::vector<double> sorted(t_values.begin(), t_values.end());
  std::sort(sorted.begin(), sorted.end());
  const double se = std::sqrt(sigma_jj / static_cast<double>(n));
  return {theta_hat - se * stats::quantile_sorted(sorted, 1.0 - alpha / 2.0),
          theta_hat - se * stats::quantile_sorted(sorted, alpha / 2.0)};
}

ConfidenceSet t_confidence_set(const BootstrapRun& run, const Eigen::MatrixXd& sigma_hat,
                               double alpha) {
  require_alpha(alpha);
  require_replicates(run);
  const auto d = run.theta_stars.cols();
  if (sigma_hat.rows() != d || sigma_hat.cols() != d) {
    throw SizeError("sigma_hat must be d x d");
  }
  const Eigen::MatrixXd boot_var = variance_estimate(run);
  ConfidenceSet cs = make_set(IntervalKind::TType, alpha, d);

  if (boot_var.cwiseAbs().maxCoeff() == 0.0) {
    const Eigen::RowVectorXd first = run.theta_stars.row(0);
    if (first.transpose() != run.theta_hat()) {
      throw ZeroVarianceError("bootstrap replicates are constant but differ from theta_hat");
    }
    cs.lower = cs.upper = run.theta_hat();
    cs.degenerate = true;
    return cs;
  }

  const double root_n = std::sqrt(static_cast<double>(run.n));
  const double c = std::sqrt(run.c2);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(boot_var(j, j) > 0.0)) {
      throw SingularMatrixError("bootstrap variance is singular in coordinate " + std::to_string(j),
                                std::numeric_limits<double>::infinity());
    }
    const double scale = root_n / (c * std::sqrt(boot_var(j, j)));
    std::vector<double> t(static_cast<std::size_t>(run.theta_stars.rows()));
    for (Eigen::Index r = 0; r < run.theta_stars.rows(); ++r) {
      t[static_cast<std::size_t>(r)] = scale * (run.theta_stars(r, j) - run.theta_hat()[j]);
    }
    const auto [lo, hi] = studentized_interval(run.theta_hat()[j], t, sigma_hat(j, j), run.n, alpha);
    cs.lower[j] = lo;
    cs.upper[j] = hi;
  }
  return cs;
}

namespace {

ConfidenceSet quantile_set(const BootstrapRun& run, double alpha, IntervalKind kind) {
  require_alpha(alpha);
  require_replicates(run);
  const auto d = run.theta_stars.cols();
  const double c = std::sqrt(run.c2);
  ConfidenceSet cs = make_set(kind, alpha, d);
  bool all_zero = true;
  for (Eigen::Index j = 0; j < d; ++j) {
    auto dev = column(run.theta_stars, j);
    for (auto& v : dev) {
      v = (v - run.theta_hat()[j]) / c;
      all_zero = all_zero && v == 0.0;
    }
    std::sort(dev.begin(), dev.end());
    const double q_lo = stats::quantile_sorted(dev, alpha / 2.0);
    const double q_hi = stats::quantile_sorted(dev, 1.0 - alpha / 2.0);
    if (kind == IntervalKind::Percentile) {
      cs.lower[j] = run.theta_hat()[j] + q_lo;
      cs.upper[j] = run.theta_hat()[j] + q_hi;
    } else {
      cs.lower[j] = run.theta_hat()[j] - q_hi;
      cs.upper[j] = run.theta_hat()[j] - q_lo;
    }
  }
  cs.degenerate = all_zero;
  return cs;
}

}  // namespace

ConfidenceSet percentile_confidence_set(const BootstrapRun& run, double alpha) {
  return quantile_set(run, alpha, IntervalKind::Percentile);
}

ConfidenceSet hybrid_confidence_set(const BootstrapRun& run, double alpha) {
  return quantile_set(run, alpha, IntervalKind::Hybrid);
}

}  // namespace ewboot
