#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ewboot/random.hpp"

namespace ewboot {

enum class SchemeKind {
  EfronMultinomial,
  IidNormalized,
  DeleteHJackknife,
  DoubleBootstrap,
  PolyaEggenberger,
  MultivariateHypergeometric,
  // All weights equal to one. Not a bootstrap; a test hook whose replicates
  // reproduce the base fit exactly.
  Ones,
};

// Positive i.i.d. multiplier law for IidNormalized, Gamma(shape, rate).
// Exponential(1) is shape = rate = 1.
struct IidLaw {
  double shape = 1.0;
  double rate = 1.0;

  double mean() const { return shape / rate; }
  double variance() const { return shape / (rate * rate); }
  bool operator==(const IidLaw&) const = default;
};

// One of the exchangeable weighting schemes, validated at construction.
class WeightScheme {
 public:
  static WeightScheme efron();
  static WeightScheme iid(IidLaw law);
  // Delete-h jackknife with h / n -> ratio, ratio in (0, 1).
  static WeightScheme jackknife(double ratio);
  static WeightScheme double_bootstrap();
  // Polya-Eggenberger (Dirichlet-multinomial) bootstrap, alpha > 0.
  static WeightScheme polya(double alpha);
  // Multivariate hypergeometric urn bootstrap with K >= 2 balls per colour.
  static WeightScheme hypergeometric(int k);
  static WeightScheme ones();

  // Parses the config-string form, e.g. "efron", "iid(exp1)", "iid(gamma4)",
  // "iid(gamma,shape=2,rate=1)", "jackknife(ratio=0.5)", "double",
  // "polya(alpha=1)", "hypergeom(k=2)", "ones". Throws DomainError.
  static WeightScheme parse(std::string_view spec);

  SchemeKind kind() const noexcept { return kind_; }
  const IidLaw& iid_law() const noexcept { return iid_law_; }
  double jackknife_ratio() const noexcept { return jackknife_ratio_; }
  double polya_alpha() const noexcept { return polya_alpha_; }
  int hypergeom_k() const noexcept { return hypergeom_k_; }

  // Canonical config string; parse(to_string()) == *this.
  std::string to_string() const;
  bool operator==(const WeightScheme&) const = default;

 private:
  explicit WeightScheme(SchemeKind kind) : kind_(kind) {}

  SchemeKind kind_;
  IidLaw iid_law_{};
  double jackknife_ratio_ = 0.0;
  double polya_alpha_ = 0.0;
  int hypergeom_k_ = 0;
};

// The six resampling schemes with representative parameters (Ones excluded).
std::vector<WeightScheme> standard_schemes();

struct WeightVector {
  std::vector<double> values;
  bool integer_valued = false;

  std::size_t size() const noexcept { return values.size(); }
  double sum() const;
};

// Number of deleted observations for the delete-h jackknife at size n:
// round(ratio * n) clamped to [1, n - 1].
std::size_t jackknife_deleted(double ratio, std::size_t n);

// Draws one weight vector. Requires n >= 2 (SizeError otherwise).
WeightVector generate_weights(const WeightScheme& scheme, std::size_t n, RandomStream& rng);

// Limit of (1/n) sum (W_i - 1)^2. Ones returns 0.
double theoretical_c2(const WeightScheme& scheme);
// c^2 used to normalize bootstrap spread: theoretical_c2, except that the
// degenerate Ones scheme uses 1 so that zero spread stays zero.
double normalizing_c2(const WeightScheme& scheme);
// Exact Var(W_{n1}) = E (1/n) sum (W_i - 1)^2 at finite n.
double finite_c2(const WeightScheme& scheme, std::size_t n);

// Mean over `replications` draws of (1/n) sum (W_i - 1)^2.
double empirical_c2(const WeightScheme& scheme, std::size_t n, std::size_t replications,
                    RandomStream& rng);

// E W^5 for W ~ Binomial(n, p1), the marginal of Mult_n(n, p), through its
// factorial moments n p1 + 15 n^(2) p1^2 + 25 n^(3) p1^3 + 10 n^(4) p1^4 + n^(5) p1^5.
double exact_multinomial_fifth_moment(std::size_t n, double p1);

// Exact raw moment E W_{n1}^p at finite n for every scheme.
double exact_weight_moment(const WeightScheme& scheme, std::size_t n, int p);
// lim_{n -> inf} E W_{n1}^5 (52 for Efron).
double fifth_moment_limit(const WeightScheme& scheme);

// Piecewise-constant survival function: `level` holds on (previous upper, upper].
struct SurvivalStep {
  double upper;
  double level;
};

// Integral of sqrt(S(u)) over [0, inf) for a step survival function; exact.
// Steps must have increasing `upper`, non-increasing levels in [0, 1].
double l21_norm(std::span<const SurvivalStep> steps);

// Integral of sqrt(S(u)) over [0, support_end] by composite Gauss-Legendre
// quadrature with a square-root end-point substitution. S must be
// non-increasing (checked on the evaluation grid) with S(support_end) = 0.
double l21_norm(const std::function<double(double)>& survival, double support_end,
                std::size_t panels = 2000);

// Empirical P(Y >= u) of a non-negative sample as steps.
std::vector<SurvivalStep> empirical_survival(std::span<const double> sample);

// sup_{t >= lambda} t^2 P(Y > t) under the empirical law of `sample`.
double tail_sup(std::span<const double> sample, double lambda);

struct TailPoint {
  double lambda;
  double value;
};

struct WeightDiagnostics {
  std::size_t n = 0;
  std::size_t draws = 0;
  double empirical_c2 = 0.0;
  double empirical_c2_se = 0.0;
  double theoretical_c2 = 0.0;
  double finite_c2 = 0.0;
  double l21_norm_estimate = 0.0;
  double l21_power = 2.5;            // exponent q for the ||W^q||_{2,1} estimate
  double l21_power_estimate = 0.0;
  std::vector<TailPoint> tail_profile;
  double fifth_moment = 0.0;         // Monte Carlo
  double fifth_moment_se = 0.0;
  double fifth_moment_exact = 0.0;
};

struct WeightCheckOptions {
  std::size_t replications = 200;
  // Pooled marginal values of W_{n1} used for the norm and tail estimates.
  std::size_t marginal_samples = 200'000;
  // Pooled coordinates used for the fifth-moment estimate.
  std::size_t moment_samples = 10'000'000;
  double l21_power = 2.5;
  std::vector<double> tail_grid{1.0, 2.0, 4.0, 8.0, 16.0};
};

struct WeightConditionReport {
  WeightScheme scheme = WeightScheme::efron();
  std::vector<WeightDiagnostics> per_n;
  double fifth_moment_bound = 0.0;
  double l21_bound = 0.0;
  bool l21_bounded = false;
  bool tail_decays = false;
  bool c2_tracks = false;
  bool fifth_moment_bounded = false;

  bool all_pass() const { return l21_bounded && tail_decays && c2_tracks && fifth_moment_bounded; }
};

WeightConditionReport check_weight_conditions(const WeightScheme& scheme,
                                              std::span<const std::size_t> n_grid,
                                              const WeightCheckOptions& options,
                                              RandomStream& rng);

}  // namespace ewboot
