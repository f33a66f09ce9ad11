#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ewboot/bootstrap.hpp"
#include "ewboot/errors.hpp"
#include "ewboot/stats.hpp"

namespace ewboot {
namespace {

SimulationConfig desk_simulation(std::size_t n) {
  SimulationConfig c;
  c.theta0 = {0.5};
  c.censoring_rate = 0.55;
  c.tau = 4.0;
  c.n = n;
  return c;
}

struct Fitted {
  SurvivalDataset data;
  CoxFit base;
};

Fitted fitted(std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  auto data = simulate_dataset(desk_simulation(n), rng);
  auto base = fit(data, unit_weights(n));
  return {std::move(data), std::move(base)};
}

// A run assembled by hand around theta_hat.
BootstrapRun manual_run(std::size_t n, double c2, double theta_hat, std::vector<double> stars) {
  BootstrapRun run;
  run.n = n;
  run.c2 = c2;
  run.B = stars.size();
  run.base_fit.theta_hat = Eigen::VectorXd::Constant(1, theta_hat);
  run.base_fit.converged = true;
  run.theta_stars = Eigen::Map<Eigen::VectorXd>(stars.data(), static_cast<Eigen::Index>(stars.size()));
  return run;
}

TEST(RunBootstrap, OnesSchemeReproducesBaseFit) {
  const auto f = fitted(150, 1);
  const auto run = run_bootstrap(f.data, f.base, WeightScheme::ones(), 20, 7);
  ASSERT_EQ(run.usable(), 20u);
  for (Eigen::Index b = 0; b < 20; ++b) EXPECT_EQ(run.theta_stars(b, 0), f.base.theta_hat[0]);
  EXPECT_EQ(variance_estimate(run)(0, 0), 0.0);
  for (int p = 1; p <= 4; ++p) EXPECT_EQ(moment_estimate(run, p)[0], 0.0);
  const auto sigma = invert_information(plugin_efficient_information(f.base, f.data));
  for (const auto& cs : {t_confidence_set(run, sigma, 0.05), percentile_confidence_set(run, 0.05),
                         hybrid_confidence_set(run, 0.05)}) {
    EXPECT_EQ(cs.lower[0], f.base.theta_hat[0]);
    EXPECT_EQ(cs.upper[0], f.base.theta_hat[0]);
    EXPECT_TRUE(cs.degenerate);
  }
}

TEST(RunBootstrap, OnesSchemeVarianceIsExactlyZeroAtDeskScale) {
  const auto f = fitted(400, 3);
  const auto run = run_bootstrap(f.data, f.base, WeightScheme::ones(), 200, 9);
  ASSERT_EQ(run.usable(), 200u);
  EXPECT_EQ(variance_estimate(run)(0, 0), 0.0);
  const auto sigma = invert_information(plugin_efficient_information(f.base, f.data));
  EXPECT_TRUE(t_confidence_set(run, sigma, 0.05).degenerate);
}

TEST(RunBootstrap, ThreadCountDoesNotChangeReplicates) {
  const auto f = fitted(120, 2);
  for (const auto& scheme : standard_schemes()) {
    BootstrapOptions one, eight;
    eight.threads = 8;
    const auto a = run_bootstrap(f.data, f.base, scheme, 64, 99, one);
    const auto b = run_bootstrap(f.data, f.base, scheme, 64, 99, eight);
    EXPECT_EQ(a.theta_stars, b.theta_stars) << scheme.to_string();
    EXPECT_EQ(a.excluded, b.excluded);
  }
}

TEST(RunBootstrap, EfronCentersAtThetaHat) {
  const auto f = fitted(200, 3);
  const auto run = run_bootstrap(f.data, f.base, WeightScheme::efron(), 2000, 5);
  std::vector<double> t(run.usable());
  for (std::size_t b = 0; b < t.size(); ++b) t[b] = run.theta_stars(static_cast<Eigen::Index>(b), 0);
  const double boot_se = std::sqrt(stats::sample_variance(t));
  EXPECT_LE(std::abs(stats::mean(t) - f.base.theta_hat[0]), 3.0 * boot_se);
}

TEST(RunBootstrap, RequiresConvergedBaseAndEnoughReplicates) {
  auto f = fitted(50, 4);
  EXPECT_THROW(run_bootstrap(f.data, f.base, WeightScheme::efron(), 1, 1), SizeError);
  f.base.converged = false;
  EXPECT_THROW(run_bootstrap(f.data, f.base, WeightScheme::efron(), 10, 1), DomainError);
}

TEST(RunBootstrap, StrictModeRejectsUnstableResampling) {
  // Few subjects and a strong covariate: many resamples are separated.
  const SurvivalDataset data({1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 1, 0}, {1.0, 0.0, 1.0, 0.0, 0.0, 1.0}, 1);
  const auto base = fit(data, unit_weights(6));
  ASSERT_TRUE(base.converged);
  const auto lax = run_bootstrap(data, base, WeightScheme::efron(), 200, 3);
  EXPECT_GT(lax.excluded.size(), 10u);
  EXPECT_TRUE(lax.unstable);
  EXPECT_EQ(lax.usable() + lax.excluded.size(), 200u);
  BootstrapOptions strict;
  strict.strict = true;
  EXPECT_THROW(run_bootstrap(data, base, WeightScheme::efron(), 200, 3, strict),
               UnstableResamplingError);
}

TEST(VarianceEstimate, HandFixture) {
  const auto run = manual_run(4, 1.0, 1.0, {0.9, 1.1});
  // (4 / 2) * (0.1^2 + 0.1^2)
  const double expected = 2.0 * ((0.9 - 1.0) * (0.9 - 1.0) + (1.1 - 1.0) * (1.1 - 1.0));
  EXPECT_NEAR(expected, 0.04, 1e-15);
  EXPECT_NEAR(variance_estimate(run)(0, 0), expected, 1e-14);
  const auto flat = manual_run(4, 1.0, 1.0, {1.3, 1.3, 1.3});
  EXPECT_EQ(variance_estimate(flat)(0, 0), 0.0);
}

TEST(VarianceEstimate, PermutationInvariantAndMomentIdentity) {
  const auto f = fitted(100, 6);
  auto run = run_bootstrap(f.data, f.base, WeightScheme::polya(1.0), 300, 8);
  const double v = variance_estimate(run)(0, 0);
  const double m1 = moment_estimate(run, 1)[0];
  const double m2 = moment_estimate(run, 2)[0];
  // Second raw moment = centered part + squared mean shift.
  EXPECT_NEAR(m2, v * run.c2 + m1 * m1, 1e-12 * m2);
  EXPECT_NEAR(v, (m2 - m1 * m1) / run.c2, 1e-12 * v);

  Eigen::MatrixXd reversed = run.theta_stars.colwise().reverse();
  std::swap(run.theta_stars, reversed);
  EXPECT_NEAR(variance_estimate(run)(0, 0), v, 1e-12 * v);
}

TEST(StudentizedInterval, HandFixture) {
  const std::vector<double> t{-2.0, -1.0, 1.0, 2.0};
  const auto [lo, hi] = studentized_interval(0.0, t, 1.0, 1, 0.5);
  EXPECT_DOUBLE_EQ(lo, -1.25);
  EXPECT_DOUBLE_EQ(hi, 1.25);
  EXPECT_THROW(studentized_interval(0.0, t, 1.0, 1, 0.0), DomainError);
  EXPECT_THROW(studentized_interval(0.0, t, 0.0, 1, 0.5), SingularMatrixError);
}

TEST(PercentileSet, HandFixture) {
  const auto run = manual_run(10, 1.0, 3.0, {1, 2, 3, 4, 5});
  const auto cs = percentile_confidence_set(run, 0.4);
  EXPECT_DOUBLE_EQ(cs.lower[0], 1.8);
  EXPECT_DOUBLE_EQ(cs.upper[0], 4.2);
  // c^2 = 4 halves the deviations.
  const auto wide = manual_run(10, 4.0, 3.0, {1, 2, 3, 4, 5});
  const auto half = percentile_confidence_set(wide, 0.4);
  EXPECT_DOUBLE_EQ(half.lower[0], 3.0 - 0.6);
  EXPECT_DOUBLE_EQ(half.upper[0], 3.0 + 0.6);
}

TEST(ConfidenceSets, SymmetricCloud) {
  std::vector<double> stars;
  for (double d : {0.01, 0.04, 0.05, 0.09, 0.2}) {
    stars.push_back(2.0 + d);
    stars.push_back(2.0 - d);
  }
  const auto run = manual_run(50, 1.0, 2.0, stars);
  const auto pct = percentile_confidence_set(run, 0.1);
  const auto hyb = hybrid_confidence_set(run, 0.1);
  const auto t = t_confidence_set(run, Eigen::MatrixXd::Constant(1, 1, 0.7), 0.1);
  EXPECT_NEAR(pct.lower[0], hyb.lower[0], 1e-12);
  EXPECT_NEAR(pct.upper[0], hyb.upper[0], 1e-12);
  for (const auto& cs : {pct, hyb, t}) {
    EXPECT_NEAR(cs.upper[0] - 2.0, 2.0 - cs.lower[0], 1e-12);
    EXPECT_LT(cs.lower[0], cs.upper[0]);
  }
}

TEST(ConfidenceSets, TypeTagsAndLevels) {
  const auto f = fitted(150, 9);
  const auto run = run_bootstrap(f.data, f.base, WeightScheme::efron(), 300, 2);
  const auto sigma = invert_information(plugin_efficient_information(f.base, f.data));
  const auto t = t_confidence_set(run, sigma, 0.1);
  EXPECT_EQ(t.kind, IntervalKind::TType);
  EXPECT_DOUBLE_EQ(t.level, 0.9);
  EXPECT_LT(t.lower[0], t.upper[0]);
  EXPECT_FALSE(t.degenerate);
  EXPECT_EQ(to_string(IntervalKind::Hybrid), "hybrid");
  EXPECT_THROW(t_confidence_set(run, Eigen::MatrixXd::Identity(2, 2), 0.1), SizeError);
  EXPECT_THROW(percentile_confidence_set(run, 1.0), DomainError);
}

TEST(ConfidenceSets, ConstantOffsetCloudIsRejected) {
  const auto run = manual_run(10, 1.0, 1.0, {1.5, 1.5, 1.5});
  EXPECT_THROW(t_confidence_set(run, Eigen::MatrixXd::Identity(1, 1), 0.1), ZeroVarianceError);
}

TEST(ConfidenceSets, WidthsShrinkAtRootN) {
  const RandomStream root(10);
  std::vector<double> ratio_t, ratio_p, ratio_h;
  for (std::size_t r = 0; r < 50; ++r) {
    std::vector<double> widths;
    for (std::size_t n : {400u, 1600u}) {
      RandomStream rng = root.substream("rep", r).substream(n);
      const auto data = simulate_dataset(desk_simulation(n), rng);
      const auto base = fit(data, unit_weights(n));
      const auto run = run_bootstrap(data, base, WeightScheme::efron(), 200, rng.substream("b").key());
      const auto sigma = invert_information(plugin_efficient_information(base, data));
      for (const auto& cs : {t_confidence_set(run, sigma, 0.05), percentile_confidence_set(run, 0.05),
                             hybrid_confidence_set(run, 0.05)}) {
        widths.push_back(cs.upper[0] - cs.lower[0]);
      }
    }
    ratio_t.push_back(widths[3] / widths[0]);
    ratio_p.push_back(widths[4] / widths[1]);
    ratio_h.push_back(widths[5] / widths[2]);
  }
  EXPECT_LE(stats::median(ratio_t), 0.6);
  EXPECT_LE(stats::median(ratio_p), 0.6);
  EXPECT_LE(stats::median(ratio_h), 0.6);
}

}  // namespace
}  // namespace ewboot
