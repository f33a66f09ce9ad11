#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ewboot/errors.hpp"
#include "ewboot/weights.hpp"

namespace ewboot {
namespace {

// Oracles --------------------------------------------------------------------

double binomial_pmf(int n, int k, double p) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                  k * std::log(p) + (n - k) * std::log1p(-p));
}

// E W^5 for W ~ Binomial(n, p) by direct summation over the support.
double binomial_fifth_moment(int n, double p) {
  double s = 0.0;
  for (int k = 0; k <= n; ++k) s += std::pow(k, 5) * binomial_pmf(n, k, p);
  return s;
}

// E W^p under Efron weights by enumerating all n^n index draws.
double enumerate_efron_moment(int n, int p) {
  const int total = static_cast<int>(std::pow(n, n));
  double s = 0.0;
  for (int code = 0; code < total; ++code) {
    int c = code, count = 0;
    for (int i = 0; i < n; ++i, c /= n) count += (c % n == 0);
    s += std::pow(count, p);
  }
  return s / total;
}

// E W^p under the double bootstrap by enumerating both stages.
double enumerate_double_moment(int n, int p) {
  const int total = static_cast<int>(std::pow(n, n));
  double s = 0.0;
  for (int first = 0; first < total; ++first) {
    std::vector<int> idx(n);
    int c = first;
    for (int i = 0; i < n; ++i, c /= n) idx[i] = c % n;
    for (int second = 0; second < total; ++second) {
      int c2 = second, count = 0;
      for (int i = 0; i < n; ++i, c2 /= n) count += (idx[c2 % n] == 0);
      s += std::pow(count, p);
    }
  }
  return s / (static_cast<double>(total) * total);
}

// E W^p for the urn with K balls per colour: enumerate ordered draws of n
// balls without replacement from nK.
double enumerate_urn_moment(int n, int k, int p) {
  const int balls = n * k;
  double s = 0.0, count_paths = 0.0;
  std::vector<int> chosen;
  std::vector<bool> used(balls, false);
  auto rec = [&](auto&& self) -> void {
    if (static_cast<int>(chosen.size()) == n) {
      int w = 0;
      for (int b : chosen) w += (b / k == 0);
      s += std::pow(w, p);
      count_paths += 1.0;
      return;
    }
    for (int b = 0; b < balls; ++b) {
      if (used[b]) continue;
      used[b] = true;
      chosen.push_back(b);
      self(self);
      chosen.pop_back();
      used[b] = false;
    }
  };
  rec(rec);
  return s / count_paths;
}

// E W^p for W ~ BetaBinomial(n, a, b), the Polya marginal.
double beta_binomial_moment(int n, double a, double b, int p) {
  double s = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                           std::lgamma(k + a) + std::lgamma(n - k + b) - std::lgamma(n + a + b) -
                           (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
    s += std::pow(k, p) * std::exp(log_pmf);
  }
  return s;
}

// Tests -----------------------------------------------------------------------

TEST(WeightScheme, ConstructorsValidate) {
  EXPECT_THROW(WeightScheme::jackknife(0.0), DomainError);
  EXPECT_THROW(WeightScheme::jackknife(1.0), DomainError);
  EXPECT_THROW(WeightScheme::polya(0.0), DomainError);
  EXPECT_THROW(WeightScheme::hypergeometric(1), DomainError);
  EXPECT_THROW(WeightScheme::iid({-1.0, 1.0}), DomainError);
}

TEST(WeightScheme, ParseRoundTrip) {
  for (const char* spec : {"efron", "double", "ones", "iid(exp1)", "iid(gamma4)",
                           "iid(gamma,shape=2,rate=3)", "jackknife(ratio=0.25)",
                           "polya(alpha=1.5)", "hypergeom(k=3)", "\"polya(alpha=1.0)\""}) {
    const auto s = WeightScheme::parse(spec);
    EXPECT_EQ(WeightScheme::parse(s.to_string()), s) << spec;
  }
  EXPECT_EQ(WeightScheme::parse("iid(exp1)").iid_law(), (IidLaw{1.0, 1.0}));
  EXPECT_EQ(WeightScheme::parse("iid(gamma4)").iid_law(), (IidLaw{4.0, 1.0}));
  EXPECT_EQ(WeightScheme::parse("hypergeom(k=2)").hypergeom_k(), 2);
}

TEST(WeightScheme, ParseRejectsGarbage) {
  for (const char* spec : {"", "bogus", "polya", "polya(alpha=)", "polya(alpha=0)",
                           "jackknife(ratio=1)", "hypergeom(k=2.5)", "efron(x=1)",
                           "polya(alpha=1", "iid(weird)"}) {
    EXPECT_THROW(WeightScheme::parse(spec), DomainError) << spec;
  }
}

TEST(WeightScheme, TheoreticalC2) {
  EXPECT_DOUBLE_EQ(theoretical_c2(WeightScheme::efron()), 1.0);
  EXPECT_DOUBLE_EQ(theoretical_c2(WeightScheme::iid({4.0, 1.0})), 0.25);
  EXPECT_DOUBLE_EQ(theoretical_c2(WeightScheme::iid({1.0, 1.0})), 1.0);
  EXPECT_DOUBLE_EQ(theoretical_c2(WeightScheme::double_bootstrap()), 2.0);
  EXPECT_DOUBLE_EQ(theoretical_c2(WeightScheme::polya(1.0)), 2.0);
  EXPECT_DOUBLE_EQ(theoretical_c2(WeightScheme::hypergeometric(2)), 0.5);
  EXPECT_DOUBLE_EQ(theoretical_c2(WeightScheme::jackknife(0.5)), 1.0);
  EXPECT_DOUBLE_EQ(theoretical_c2(WeightScheme::ones()), 0.0);
  EXPECT_DOUBLE_EQ(normalizing_c2(WeightScheme::ones()), 1.0);
}

TEST(GenerateWeights, EfronSmallN) {
  RandomStream rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const auto w = generate_weights(WeightScheme::efron(), 3, rng);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_TRUE(w.integer_valued);
    for (double v : w.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_EQ(v, std::floor(v));
    }
    EXPECT_EQ(w.sum(), 3.0);
  }
}

TEST(GenerateWeights, JackknifeIsPermutationOfTwosAndZeros) {
  RandomStream rng(12);
  EXPECT_EQ(jackknife_deleted(0.5, 4), 2u);
  for (int rep = 0; rep < 20; ++rep) {
    auto w = generate_weights(WeightScheme::jackknife(0.5), 4, rng).values;
    std::sort(w.begin(), w.end());
    EXPECT_EQ(w, (std::vector<double>{0, 0, 2, 2}));
  }
}

TEST(GenerateWeights, JackknifeDeletedIsClamped) {
  EXPECT_EQ(jackknife_deleted(0.01, 10), 1u);
  EXPECT_EQ(jackknife_deleted(0.99, 10), 9u);
  EXPECT_EQ(jackknife_deleted(0.3, 100), 30u);
}

TEST(GenerateWeights, IidMeanIsExactlyOne) {
  RandomStream rng(13);
  const auto w = generate_weights(WeightScheme::iid({1.0, 1.0}), 1000, rng);
  EXPECT_NEAR(w.sum() / 1000.0, 1.0, 1e-12);
}

TEST(GenerateWeights, EveryDrawIsNonNegativeAndSumsToN) {
  RandomStream rng(14);
  auto schemes = standard_schemes();
  schemes.push_back(WeightScheme::ones());
  schemes.push_back(WeightScheme::hypergeometric(5));
  schemes.push_back(WeightScheme::polya(0.3));
  for (const auto& s : schemes) {
    for (std::size_t n : {2u, 3u, 17u, 256u}) {
      for (int rep = 0; rep < 20; ++rep) {
        const auto w = generate_weights(s, n, rng);
        ASSERT_EQ(w.size(), n);
        for (double v : w.values) ASSERT_GE(v, 0.0) << s.to_string();
        if (w.integer_valued) {
          EXPECT_EQ(w.sum(), static_cast<double>(n)) << s.to_string();
        } else {
          EXPECT_NEAR(w.sum(), static_cast<double>(n), 1e-12 * n) << s.to_string();
        }
      }
    }
  }
}

TEST(GenerateWeights, RejectsTinyN) {
  RandomStream rng(1);
  EXPECT_THROW(generate_weights(WeightScheme::efron(), 1, rng), SizeError);
}

TEST(GenerateWeights, FixedSeedIsReproducible) {
  for (const auto& s : standard_schemes()) {
    RandomStream a(99), b(99);
    EXPECT_EQ(generate_weights(s, 100, a).values, generate_weights(s, 100, b).values);
  }
}

TEST(GenerateWeights, FirstTwoCoordinatesAreExchangeable) {
  // Sign test on W1 - W2 and a comparison of E W1 W2^2 with E W2 W1^2.
  for (const auto& s : standard_schemes()) {
    RandomStream rng(15);
    const int draws = 20000;
    int above = 0, below = 0;
    double m12 = 0.0, m21 = 0.0, m12_sq = 0.0;
    for (int t = 0; t < draws; ++t) {
      const auto w = generate_weights(s, 6, rng).values;
      above += w[0] > w[1];
      below += w[0] < w[1];
      const double a = w[0] * w[1] * w[1], b = w[1] * w[0] * w[0];
      m12 += a;
      m21 += b;
      m12_sq += (a - b) * (a - b);
    }
    const double signs = above + below;
    EXPECT_LE(std::abs(above - below), 4.0 * std::sqrt(signs)) << s.to_string();
    const double se = std::sqrt(m12_sq / draws / draws);
    EXPECT_LE(std::abs(m12 - m21) / draws, 4.0 * se + 1e-12) << s.to_string();
  }
}

TEST(C2, FiniteJackknifeIsDeterministic) {
  RandomStream rng(16);
  const auto s = WeightScheme::jackknife(0.5);
  EXPECT_DOUBLE_EQ(finite_c2(s, 100), 1.0);
  for (int rep = 0; rep < 5; ++rep) EXPECT_NEAR(empirical_c2(s, 100, 1, rng), 1.0, 1e-12);
  EXPECT_NEAR(empirical_c2(s, 100, 37, rng), 1.0, 1e-12);
}

TEST(C2, EmpiricalTracksTheoretical) {
  RandomStream rng(17);
  EXPECT_NEAR(empirical_c2(WeightScheme::efron(), 5000, 200, rng), 1.0, 0.05);
  EXPECT_NEAR(empirical_c2(WeightScheme::hypergeometric(2), 2000, 200, rng), 0.5, 0.025);
}

TEST(C2, FiniteValuesMatchClosedForms) {
  // Var of the marginal: Binomial(n, 1/n) gives (n - 1) / n.
  EXPECT_NEAR(finite_c2(WeightScheme::efron(), 10), 0.9, 1e-12);
  // h / (n - h) at n = 10, h = 3.
  EXPECT_NEAR(finite_c2(WeightScheme::jackknife(0.3), 10), 3.0 / 7.0, 1e-12);
  // Beta-binomial(n, alpha, (n - 1) alpha) variance.
  const int n = 10;
  const double a = 1.0, b = (n - 1) * a;
  const double bb_var = n * a * b * (a + b + n) / ((a + b) * (a + b) * (a + b + 1));
  EXPECT_NEAR(finite_c2(WeightScheme::polya(1.0), n), bb_var, 1e-12);
}

TEST(ExactMoments, MultinomialFifthMoment) {
  EXPECT_DOUBLE_EQ(exact_multinomial_fifth_moment(1, 1.0), 1.0);
  EXPECT_NEAR(exact_multinomial_fifth_moment(10, 0.1), 37.8424, 1e-9);
  EXPECT_NEAR(exact_multinomial_fifth_moment(10, 0.1), binomial_fifth_moment(10, 0.1), 1e-9);
  for (int n : {2, 5, 10, 100, 1000, 100000}) {
    const double v = exact_multinomial_fifth_moment(n, 1.0 / n);
    EXPECT_LT(v, 52.0) << n;
    EXPECT_NEAR(v, binomial_fifth_moment(n, 1.0 / n), 1e-8 * v) << n;
  }
  EXPECT_THROW(exact_multinomial_fifth_moment(10, 0.0), DomainError);
  EXPECT_THROW(exact_multinomial_fifth_moment(0, 0.5), SizeError);
}

TEST(ExactMoments, MatchEnumerationOracles) {
  for (int p = 1; p <= 5; ++p) {
    EXPECT_NEAR(exact_weight_moment(WeightScheme::efron(), 5, p), enumerate_efron_moment(5, p),
                1e-9)
        << p;
    EXPECT_NEAR(exact_weight_moment(WeightScheme::double_bootstrap(), 4, p),
                enumerate_double_moment(4, p), 1e-9)
        << p;
    EXPECT_NEAR(exact_weight_moment(WeightScheme::hypergeometric(2), 3, p),
                enumerate_urn_moment(3, 2, p), 1e-9)
        << p;
    EXPECT_NEAR(exact_weight_moment(WeightScheme::polya(1.0), 10, p),
                beta_binomial_moment(10, 1.0, 9.0, p), 1e-8)
        << p;
    EXPECT_NEAR(exact_weight_moment(WeightScheme::polya(0.4), 7, p),
                beta_binomial_moment(7, 0.4, 2.4, p), 1e-8)
        << p;
  }
  // Delete-h: W = n / (n - h) with probability (n - h) / n.
  EXPECT_NEAR(exact_weight_moment(WeightScheme::jackknife(0.5), 4, 5), 0.5 * std::pow(2.0, 5),
              1e-12);
}

TEST(ExactMoments, PolyaSecondFactorialMoment) {
  const auto s = WeightScheme::polya(1.0);
  const double factorial2 = exact_weight_moment(s, 10, 2) - exact_weight_moment(s, 10, 1);
  EXPECT_NEAR(factorial2, 18.0 / 11.0, 1e-12);
}

TEST(ExactMoments, IidAgainstMonteCarlo) {
  const auto s = WeightScheme::iid({2.0, 1.0});
  RandomStream rng(18);
  const int draws = 200000;
  double sum = 0.0, sq = 0.0;
  for (int t = 0; t < draws; ++t) {
    const double w = generate_weights(s, 5, rng).values[0];
    const double v = w * w * w;
    sum += v;
    sq += v * v;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sq / draws - mean * mean) / draws);
  EXPECT_NEAR(exact_weight_moment(s, 5, 3), mean, 4.0 * se);
}

TEST(ExactMoments, FifthMomentLimits) {
  EXPECT_DOUBLE_EQ(fifth_moment_limit(WeightScheme::efron()), 52.0);
  EXPECT_DOUBLE_EQ(fifth_moment_limit(WeightScheme::double_bootstrap()), 358.0);
  EXPECT_DOUBLE_EQ(fifth_moment_limit(WeightScheme::polya(1.0)), 541.0);
  // Exact finite-n moments converge to the limit.
  for (const auto& s : standard_schemes()) {
    const double lim = fifth_moment_limit(s);
    EXPECT_NEAR(exact_weight_moment(s, 200000, 5), lim, 1e-3 * lim) << s.to_string();
  }
}

TEST(L21Norm, StepOracles) {
  const std::vector<SurvivalStep> one{{1.0, 1.0}};
  EXPECT_DOUBLE_EQ(l21_norm(one), 1.0);
  const std::vector<double> jack{2, 2, 0, 0};
  EXPECT_NEAR(l21_norm(empirical_survival(jack)), std::sqrt(2.0), 1e-15);
  const std::vector<SurvivalStep> two{{1.0, 1.0}, {3.0, 0.25}};
  EXPECT_DOUBLE_EQ(l21_norm(two), 1.0 + 2.0 * 0.5);
}

TEST(L21Norm, QuadratureConvergesForUniform) {
  const double v = l21_norm([](double u) { return u >= 1.0 ? 0.0 : 1.0 - u; }, 1.0);
  EXPECT_NEAR(v, 2.0 / 3.0, 1e-10);
  // Exp(1): integral of exp(-u/2) = 2.
  const double e = l21_norm([](double u) { return std::exp(-u); }, 80.0, 4000);
  EXPECT_NEAR(e, 2.0, 1e-8);
}

TEST(L21Norm, ValidatesShape) {
  const std::vector<SurvivalStep> increasing{{1.0, 0.5}, {2.0, 0.7}};
  EXPECT_THROW(l21_norm(increasing), ValidationError);
  const std::vector<SurvivalStep> unordered{{2.0, 0.5}, {1.0, 0.2}};
  EXPECT_THROW(l21_norm(unordered), ValidationError);
  EXPECT_THROW(l21_norm([](double u) { return u; }, 1.0), ValidationError);
  const std::vector<double> negative{-1.0, 1.0};
  EXPECT_THROW(empirical_survival(negative), ValidationError);
}

TEST(TailSup, EmpiricalProfile) {
  // Atoms 1, 2, 4 with equal mass: t^2 P(Y > t) at t just below 2 and 4.
  const std::vector<double> y{1, 2, 4};
  EXPECT_NEAR(tail_sup(y, 1.0), std::max(4.0 * 2.0 / 3.0, 16.0 / 3.0), 1e-12);
  EXPECT_EQ(tail_sup(y, 4.0), 0.0);
}

TEST(WeightConditions, EfronFifthMomentBelowBound) {
  RandomStream rng(19);
  WeightCheckOptions options;
  options.moment_samples = 2'000'000;
  options.marginal_samples = 100'000;
  const std::vector<std::size_t> grid{10, 100, 1000};
  const auto report = check_weight_conditions(WeightScheme::efron(), grid, options, rng);
  EXPECT_DOUBLE_EQ(report.fifth_moment_bound, 52.0);
  for (const auto& d : report.per_n) EXPECT_LT(d.fifth_moment, 52.0) << d.n;
  EXPECT_TRUE(report.all_pass());
}

TEST(WeightConditions, JackknifePowerNormBounded) {
  // ||W^q||_{2,1} = 2^q sqrt(1/2) for delete-n/2 weights, below 2^{q - 1/2}.
  RandomStream rng(20);
  WeightCheckOptions options;
  options.moment_samples = 200'000;
  options.marginal_samples = 50'000;
  const std::vector<std::size_t> grid{10, 100};
  const auto report = check_weight_conditions(WeightScheme::jackknife(0.5), grid, options, rng);
  for (const auto& d : report.per_n) {
    EXPECT_LE(d.l21_power_estimate, std::pow(2.0, options.l21_power - 0.5) * (1 + 0.03));
  }
  EXPECT_TRUE(report.all_pass());
}

}  // namespace
}  // namespace ewboot
