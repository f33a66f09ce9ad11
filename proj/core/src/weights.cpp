#include "ewboot/weights.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>

#include "ewboot/errors.hpp"
#include "ewboot/format.hpp"
#include "ewboot/stats.hpp"

namespace ewboot {

// ---------------------------------------------------------------------------
// Scheme construction and parsing

WeightScheme WeightScheme::efron() { return WeightScheme(SchemeKind::EfronMultinomial); }

WeightScheme WeightScheme::iid(IidLaw law) {
  if (!(law.shape > 0.0) || !(law.rate > 0.0) || !std::isfinite(law.shape) ||
      !std::isfinite(law.rate)) {
    throw DomainError("iid weight law needs positive finite shape and rate");
  }
  WeightScheme s(SchemeKind::IidNormalized);
  s.iid_law_ = law;
  return s;
}

WeightScheme WeightScheme::jackknife(double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw DomainError("jackknife ratio must lie strictly inside (0, 1)");
  }
  WeightScheme s(SchemeKind::DeleteHJackknife);
  s.jackknife_ratio_ = ratio;
  return s;
}

WeightScheme WeightScheme::double_bootstrap() { return WeightScheme(SchemeKind::DoubleBootstrap); }

WeightScheme WeightScheme::polya(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw DomainError("polya alpha must be positive");
  }
  WeightScheme s(SchemeKind::PolyaEggenberger);
  s.polya_alpha_ = alpha;
  return s;
}

WeightScheme WeightScheme::hypergeometric(int k) {
  if (k < 2) throw DomainError("hypergeometric K must be at least 2");
  WeightScheme s(SchemeKind::MultivariateHypergeometric);
  s.hypergeom_k_ = k;
  return s;
}

WeightScheme WeightScheme::ones() { return WeightScheme(SchemeKind::Ones); }

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

struct SchemeArgs {
  std::vector<std::string_view> positional;
  std::map<std::string, std::string_view, std::less<>> named;
};

SchemeArgs split_args(std::string_view body) {
  SchemeArgs args;
  while (!body.empty()) {
    const auto comma = body.find(',');
    const auto item = trim(body.substr(0, comma));
    if (item.empty()) throw DomainError("empty argument in weight scheme");
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      args.positional.push_back(item);
    } else {
      auto key = trim(item.substr(0, eq));
      if (!args.named.emplace(std::string(key), trim(item.substr(eq + 1))).second) {
        throw DomainError("duplicate argument '" + std::string(key) + "' in weight scheme");
      }
    }
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return args;
}

double take_number(SchemeArgs& args, std::string_view key, std::optional<double> fallback) {
  auto it = args.named.find(key);
  if (it == args.named.end()) {
    if (fallback) return *fallback;
    throw DomainError("weight scheme is missing '" + std::string(key) + "'");
  }
  double v = 0.0;
  if (!parse_double(it->second, v)) {
    throw DomainError("weight scheme argument '" + std::string(key) + "' is not a number");
  }
  args.named.erase(it);
  return v;
}

void expect_consumed(const SchemeArgs& args, std::string_view name) {
  if (!args.positional.empty()) {
    throw DomainError("unexpected argument '" + std::string(args.positional.front()) +
                      "' for scheme " + std::string(name));
  }
  if (!args.named.empty()) {
    throw DomainError("unknown argument '" + args.named.begin()->first + "' for scheme " +
                      std::string(name));
  }
}

}  // namespace

WeightScheme WeightScheme::parse(std::string_view spec) {
  spec = trim(spec);
  if (spec.size() >= 2 && spec.front() == '"' && spec.back() == '"') {
    spec = trim(spec.substr(1, spec.size() - 2));
  }
  std::string_view name = spec;
  std::string_view body;
  if (const auto open = spec.find('('); open != std::string_view::npos) {
    if (spec.back() != ')') throw DomainError("unbalanced parentheses in weight scheme");
    name = trim(spec.substr(0, open));
    body = trim(spec.substr(open + 1, spec.size() - open - 2));
  }
  SchemeArgs args = split_args(body);

  if (name == "efron" || name == "ones" || name == "double") {
    expect_consumed(args, name);
    if (name == "efron") return efron();
    if (name == "ones") return ones();
    return double_bootstrap();
  }
  if (name == "jackknife") {
    const double ratio = take_number(args, "ratio", std::nullopt);
    expect_consumed(args, name);
    return jackknife(ratio);
  }
  if (name == "polya") {
    const double alpha = take_number(args, "alpha", std::nullopt);
    expect_consumed(args, name);
    return polya(alpha);
  }
  if (name == "hypergeom") {
    const double k = take_number(args, "k", std::nullopt);
    expect_consumed(args, name);
    if (k != std::floor(k) || k > 1e6) throw DomainError("hypergeometric K must be an integer");
    return hypergeometric(static_cast<int>(k));
  }
  if (name == "iid") {
    if (args.positional.size() != 1) {
      throw DomainError("iid scheme needs a law: exp1, gamma4 or gamma,shape=..,rate=..");
    }
    const auto law = args.positional.front();
    args.positional.clear();
    IidLaw out;
    if (law == "exp1") {
      out = {1.0, 1.0};
    } else if (law.starts_with("gamma") && law.size() > 5) {
      double shape = 0.0;
      if (!parse_double(law.substr(5), shape)) throw DomainError("bad gamma shape in iid law");
      out = {shape, 1.0};
    } else if (law == "gamma") {
      out.shape = take_number(args, "shape", std::nullopt);
      out.rate = take_number(args, "rate", 1.0);
    } else {
      throw DomainError("unknown iid law '" + std::string(law) + "'");
    }
    expect_consumed(args, name);
    return iid(out);
  }
  throw DomainError("unknown weight scheme '" + std::string(name) + "'");
}

std::string WeightScheme::to_string() const {
  switch (kind_) {
    case SchemeKind::EfronMultinomial:
      return "efron";
    case SchemeKind::DoubleBootstrap:
      return "double";
    case SchemeKind::Ones:
      return "ones";
    case SchemeKind::DeleteHJackknife:
      return "jackknife(ratio=" + format_double(jackknife_ratio_) + ")";
    case SchemeKind::PolyaEggenberger:
      return "polya(alpha=" + format_double(polya_alpha_) + ")";
    case SchemeKind::MultivariateHypergeometric:
      return "hypergeom(k=" + std::to_string(hypergeom_k_) + ")";
    case SchemeKind::IidNormalized:
      if (iid_law_.shape == 1.0 && iid_law_.rate == 1.0) return "iid(exp1)";
      if (iid_law_.rate == 1.0) return "iid(gamma" + format_double(iid_law_.shape) + ")";
      return "iid(gamma,shape=" + format_double(iid_law_.shape) +
             ",rate=" + format_double(iid_law_.rate) + ")";
  }
  return "?";
}

std::vector<WeightScheme> standard_schemes() {
  return {WeightScheme::efron(),
          WeightScheme::iid({1.0, 1.0}),
          WeightScheme::jackknife(0.5),
          WeightScheme::double_bootstrap(),
          WeightScheme::polya(1.0),
          WeightScheme::hypergeometric(2)};
}

double WeightVector::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

// ---------------------------------------------------------------------------
// Generation

std::size_t jackknife_deleted(double ratio, std::size_t n) {
  if (n < 2) throw SizeError("delete-h jackknife needs n >= 2");
  const auto h = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  return std::clamp<std::size_t>(h, 1, n - 1);
}

namespace {

void multinomial_uniform(std::size_t n, RandomStream& rng, std::vector<double>& out) {
  for (std::size_t k = 0; k < n; ++k) out[rng.below(n)] += 1.0;
}

// n draws from Mult(n, g / sum g). Sorted uniforms come from normalized
// exponential spacings and are merged against the cumulative masses, O(n).
void multinomial_from_masses(std::span<const double> masses, double total, std::size_t n,
                             RandomStream& rng, std::vector<double>& out) {
  std::vector<double> spacings(n + 1);
  double spacing_total = 0.0;
  for (auto& e : spacings) {
    e = rng.exponential();
    spacing_total += e;
  }
  std::size_t cell = 0;
  double upper = masses[0] / total;
  double u = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    u += spacings[k] / spacing_total;
    while (u >= upper && cell + 1 < masses.size()) {
      ++cell;
      upper += masses[cell] / total;
    }
    out[cell] += 1.0;
  }
}

}  // namespace

WeightVector generate_weights(const WeightScheme& scheme, std::size_t n, RandomStream& rng) {
  if (n < 2) throw SizeError("weight generation needs n >= 2");
  WeightVector w;
  w.values.assign(n, 0.0);
  w.integer_valued = true;
  switch (scheme.kind()) {
    case SchemeKind::Ones:
      std::fill(w.values.begin(), w.values.end(), 1.0);
      break;
    case SchemeKind::EfronMultinomial:
      multinomial_uniform(n, rng, w.values);
      break;
    case SchemeKind::DoubleBootstrap: {
      // Mult(n, W~/n) given W~ ~ Mult(n, 1/n): resample n indices uniformly,
      // then resample n times from that list of indices.
      std::vector<std::size_t> first(n);
      for (auto& idx : first) idx = rng.below(n);
      for (std::size_t k = 0; k < n; ++k) w.values[first[rng.below(n)]] += 1.0;
      break;
    }
    case SchemeKind::PolyaEggenberger: {
      std::vector<double> g(n);
      double total = 0.0;
      do {
        total = 0.0;
        for (auto& gi : g) {
          gi = rng.gamma(scheme.polya_alpha());
          total += gi;
        }
      } while (!(total > 0.0));
      multinomial_from_masses(g, total, n, rng, w.values);
      break;
    }
    case SchemeKind::MultivariateHypergeometric: {
      // Urn with K balls of each of n colours; draw n without replacement.
      const auto k = static_cast<std::size_t>(scheme.hypergeom_k());
      std::vector<std::uint32_t> urn(n * k);
      for (std::size_t b = 0; b < urn.size(); ++b) urn[b] = static_cast<std::uint32_t>(b / k);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.below(urn.size() - i);
        std::swap(urn[i], urn[j]);
        w.values[urn[i]] += 1.0;
      }
      break;
    }
    case SchemeKind::DeleteHJackknife: {
      const std::size_t h = jackknife_deleted(scheme.jackknife_ratio(), n);
      const double kept = static_cast<double>(n) / static_cast<double>(n - h);
      std::fill(w.values.begin(), w.values.begin() + static_cast<std::ptrdiff_t>(n - h), kept);
      for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(w.values[i], w.values[rng.below(i + 1)]);
      }
      w.integer_valued = false;
      break;
    }
    case SchemeKind::IidNormalized: {
      const IidLaw& law = scheme.iid_law();
      double total = 0.0;
      do {
        total = 0.0;
        for (auto& v : w.values) {
          v = law.shape == 1.0 ? rng.exponential(law.rate) : rng.gamma(law.shape, law.rate);
          total += v;
        }
      } while (!(total > 0.0));
      const double mean = total / static_cast<double>(n);
      for (auto& v : w.values) v /= mean;
      w.integer_valued = false;
      break;
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Constants and exact moments

double theoretical_c2(const WeightScheme& scheme) {
  switch (scheme.kind()) {
    case SchemeKind::EfronMultinomial:
      return 1.0;
    case SchemeKind::IidNormalized: {
      const auto& law = scheme.iid_law();
      return law.variance() / (law.mean() * law.mean());
    }
    case SchemeKind::DeleteHJackknife: {
      const double a = scheme.jackknife_ratio();
      return a / (1.0 - a);
    }
    case SchemeKind::DoubleBootstrap:
      return 2.0;
    case SchemeKind::PolyaEggenberger: {
      const double a = scheme.polya_alpha();
      return (a + 1.0) / a;
    }
    case SchemeKind::MultivariateHypergeometric: {
      const double k = scheme.hypergeom_k();
      return (k - 1.0) / k;
    }
    case SchemeKind::Ones:
      return 0.0;
  }
  return 0.0;
}

double normalizing_c2(const WeightScheme& scheme) {
  return scheme.kind() == SchemeKind::Ones ? 1.0 : theoretical_c2(scheme);
}

double finite_c2(const WeightScheme& scheme, std::size_t n) {
  if (n < 2) throw SizeError("finite_c2 needs n >= 2");
  return exact_weight_moment(scheme, n, 2) - 1.0;
}

double empirical_c2(const WeightScheme& scheme, std::size_t n, std::size_t replications,
                    RandomStream& rng) {
  if (replications < 1) throw SizeError("empirical_c2 needs at least one replication");
  double acc = 0.0;
  for (std::size_t r = 0; r < replications; ++r) {
    const auto w = generate_weights(scheme, n, rng);
    double s = 0.0;
    for (double v : w.values) s += (v - 1.0) * (v - 1.0);
    acc += s / static_cast<double>(n);
  }
  return acc / static_cast<double>(replications);
}

namespace {

// Stirling numbers of the second kind S(p, j), j = 0..p.
std::vector<double> stirling2_row(int p) {
  std::vector<std::vector<double>> s(p + 1, std::vector<double>(p + 1, 0.0));
  s[0][0] = 1.0;
  for (int i = 1; i <= p; ++i) {
    for (int j = 1; j <= i; ++j) s[i][j] = j * s[i - 1][j] + s[i - 1][j - 1];
  }
  return s[p];
}

double falling(double x, int j) {
  double r = 1.0;
  for (int i = 0; i < j; ++i) r *= x - i;
  return r;
}

double rising(double x, int j) {
  double r = 1.0;
  for (int i = 0; i < j; ++i) r *= x + i;
  return r;
}

// E W^p from factorial moments: sum_j S(p, j) E[W^(j)].
template <class FactorialMoment>
double raw_from_factorial(int p, FactorialMoment&& fm) {
  const auto s = stirling2_row(p);
  double total = 0.0;
  for (int j = 1; j <= p; ++j) total += s[j] * fm(j);
  return p == 0 ? 1.0 : total;
}

}  // namespace

double exact_multinomial_fifth_moment(std::size_t n, double p1) {
  if (n < 1) throw SizeError("multinomial moment needs n >= 1");
  if (!(p1 > 0.0 && p1 <= 1.0)) throw DomainError("cell probability must lie in (0, 1]");
  const double nd = static_cast<double>(n);
  return nd * p1 + 15.0 * falling(nd, 2) * std::pow(p1, 2) +
         25.0 * falling(nd, 3) * std::pow(p1, 3) + 10.0 * falling(nd, 4) * std::pow(p1, 4) +
         falling(nd, 5) * std::pow(p1, 5);
}

double exact_weight_moment(const WeightScheme& scheme, std::size_t n, int p) {
  if (n < 2) throw SizeError("exact weight moments need n >= 2");
  if (p < 0) throw DomainError("moment order must be non-negative");
  const double nd = static_cast<double>(n);
  auto efron_fm = [nd](int j) { return falling(nd, j) / std::pow(nd, j); };
  switch (scheme.kind()) {
    case SchemeKind::Ones:
      return 1.0;
    case SchemeKind::EfronMultinomial:
      return raw_from_factorial(p, efron_fm);
    case SchemeKind::DoubleBootstrap:
      // Given W~, W_{n1} ~ Bin(n, W~_1 / n): E[W^(j) | W~] = n^(j) (W~_1/n)^j.
      return raw_from_factorial(p, [&](int j) {
        return falling(nd, j) / std::pow(nd, j) * raw_from_factorial(j, efron_fm);
      });
    case SchemeKind::PolyaEggenberger: {
      const double a = scheme.polya_alpha();
      return raw_from_factorial(
          p, [&](int j) { return falling(nd, j) * rising(a, j) / rising(nd * a, j); });
    }
    case SchemeKind::MultivariateHypergeometric: {
      const double k = scheme.hypergeom_k();
      return raw_from_factorial(
          p, [&](int j) { return falling(nd, j) * falling(k, j) / falling(nd * k, j); });
    }
    case SchemeKind::DeleteHJackknife: {
      const auto h = static_cast<double>(jackknife_deleted(scheme.jackknife_ratio(), n));
      return (nd - h) / nd * std::pow(nd / (nd - h), p);
    }
    case SchemeKind::IidNormalized: {
      // W_{n1} = n * B with B ~ Beta(shape, (n - 1) shape); the rate cancels.
      const double k = scheme.iid_law().shape;
      return std::pow(nd, p) * rising(k, p) / rising(nd * k, p);
    }
  }
  return 0.0;
}

double fifth_moment_limit(const WeightScheme& scheme) {
  switch (scheme.kind()) {
    case SchemeKind::Ones:
      return 1.0;
    case SchemeKind::EfronMultinomial:
      // Bell number B_5: the fifth moment of Poisson(1).
      return raw_from_factorial(5, [](int) { return 1.0; });
    case SchemeKind::DoubleBootstrap:
      return raw_from_factorial(5, [](int j) { return raw_from_factorial(j, [](int) { return 1.0; }); });
    case SchemeKind::PolyaEggenberger: {
      const double a = scheme.polya_alpha();
      return raw_from_factorial(5, [a](int j) { return rising(a, j) / std::pow(a, j); });
    }
    case SchemeKind::MultivariateHypergeometric: {
      const double k = scheme.hypergeom_k();
      return raw_from_factorial(5, [k](int j) { return falling(k, j) / std::pow(k, j); });
    }
    case SchemeKind::DeleteHJackknife:
      return std::pow(1.0 / (1.0 - scheme.jackknife_ratio()), 4);
    case SchemeKind::IidNormalized: {
      const double k = scheme.iid_law().shape;
      return rising(k, 5) / std::pow(k, 5);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// ||.||_{2,1} and tail diagnostics

double l21_norm(std::span<const SurvivalStep> steps) {
  double prev_upper = 0.0;
  double prev_level = 1.0;
  double total = 0.0;
  for (const auto& s : steps) {
    if (!(s.upper > prev_upper)) throw ValidationError("survival steps must increase in u");
    if (!(s.level >= 0.0 && s.level <= 1.0)) {
      throw ValidationError("survival levels must lie in [0, 1]");
    }
    if (s.level > prev_level) throw ValidationError("survival function must be non-increasing");
    total += (s.upper - prev_upper) * std::sqrt(s.level);
    prev_upper = s.upper;
    prev_level = s.level;
  }
  return total;
}

double l21_norm(const std::function<double(double)>& survival, double support_end,
                std::size_t panels) {
  if (!(support_end > 0.0) || !std::isfinite(support_end)) {
    throw DomainError("support end must be positive and finite");
  }
  if (panels < 1) throw SizeError("quadrature needs at least one panel");
  // u = E (1 - v^2), du = 2 E v dv: a square-root zero of S at the upper end
  // becomes a smooth integrand in v.
  static constexpr std::array<double, 5> nodes{-0.9061798459386640, -0.5384693101056831, 0.0,
                                               0.5384693101056831, 0.9061798459386640};
  static constexpr std::array<double, 5> wts{0.2369268850561891, 0.4786286704993665,
                                             0.5688888888888889, 0.4786286704993665,
                                             0.2369268850561891};
  const double width = 1.0 / static_cast<double>(panels);
  double total = 0.0;
  double last_level = -1.0;  // levels visited in decreasing u
  for (std::size_t p = 0; p < panels; ++p) {
    const double a = static_cast<double>(p) * width;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const double v = a + 0.5 * width * (nodes[q] + 1.0);
      const double u = support_end * (1.0 - v * v);
      const double level = survival(u);
      if (!(level >= 0.0 && level <= 1.0)) {
        throw ValidationError("survival values must lie in [0, 1]");
      }
      if (level < last_level - 1e-15) {
        throw ValidationError("survival function must be non-increasing");
      }
      last_level = level;
      total += 0.5 * width * wts[q] * std::sqrt(level) * 2.0 * support_end * v;
    }
  }
  return total;
}

std::vector<SurvivalStep> empirical_survival(std::span<const double> sample) {
  if (sample.empty()) throw SizeError("empirical survival of an empty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 0.0) throw ValidationError("empirical survival needs a non-negative sample");
  const double m = static_cast<double>(sorted.size());
  std::vector<SurvivalStep> steps;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double v = sorted[i];
    // P(Y >= u) on (previous atom, v] counts everything from index i upward.
    if (v > 0.0) steps.push_back({v, static_cast<double>(sorted.size() - i) / m});
    while (i < sorted.size() && sorted[i] == v) ++i;
  }
  return steps;
}

double tail_sup(std::span<const double> sample, double lambda) {
  if (sample.empty()) throw SizeError("tail_sup of an empty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  // On [a_j, a_{j+1}) the function t^2 P(Y > t) increases, so its supremum
  // is the left limit a_{j+1}^2 P(Y > a_j).
  double best = 0.0;
  double prev_exceed = 1.0;  // P(Y > t) below the smallest atom
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double atom = sorted[i];
    if (atom > lambda) best = std::max(best, atom * atom * prev_exceed);
    while (i < sorted.size() && sorted[i] == atom) ++i;
    prev_exceed = static_cast<double>(sorted.size() - i) / m;
  }
  return best;
}

WeightConditionReport check_weight_conditions(const WeightScheme& scheme,
                                              std::span<const std::size_t> n_grid,
                                              const WeightCheckOptions& options,
                                              RandomStream& rng) {
  if (n_grid.empty()) throw SizeError("check_weight_conditions needs a non-empty n grid");
  if (options.replications < 1) throw SizeError("replications must be positive");

  WeightConditionReport report;
  report.scheme = scheme;
  report.fifth_moment_bound = fifth_moment_limit(scheme);
  for (std::size_t n : n_grid) {
    report.fifth_moment_bound =
        std::max(report.fifth_moment_bound, exact_weight_moment(scheme, n, 5));
  }
  // ||W||_{2,1} <= (r / (r - 2)) ||W||_r at r = 5.
  report.l21_bound = 5.0 / 3.0 * std::pow(report.fifth_moment_bound, 0.2);

  report.l21_bounded = report.tail_decays = report.c2_tracks = report.fifth_moment_bounded = true;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    const std::size_t n = n_grid[g];
    RandomStream stream = rng.substream("weights-check", g);
    const std::size_t draws =
        std::max({options.replications, (options.moment_samples + n - 1) / n,
                  (options.marginal_samples + n - 1) / n});
    const std::size_t per_draw =
        std::min(n, std::max<std::size_t>(1, (options.marginal_samples + draws - 1) / draws));

    std::vector<double> c2_draws(draws);
    std::vector<double> fifth_draws(draws);
    std::vector<double> marginal;
    marginal.reserve(draws * per_draw);
    for (std::size_t d = 0; d < draws; ++d) {
      const auto w = generate_weights(scheme, n, stream);
      double c2 = 0.0;
      double m5 = 0.0;
      for (double v : w.values) {
        c2 += (v - 1.0) * (v - 1.0);
        const double v2 = v * v;
        m5 += v2 * v2 * v;
      }
      c2_draws[d] = c2 / static_cast<double>(n);
      fifth_draws[d] = m5 / static_cast<double>(n);
      marginal.insert(marginal.end(), w.values.begin(),
                      w.values.begin() + static_cast<std::ptrdiff_t>(per_draw));
    }

    WeightDiagnostics diag;
    diag.n = n;
    diag.draws = draws;
    diag.theoretical_c2 = theoretical_c2(scheme);
    diag.finite_c2 = finite_c2(scheme, n);
    diag.empirical_c2 = stats::mean(c2_draws);
    diag.empirical_c2_se = std::sqrt(stats::sample_variance(c2_draws) / static_cast<double>(draws));
    diag.fifth_moment = stats::mean(fifth_draws);
    diag.fifth_moment_se =
        std::sqrt(stats::sample_variance(fifth_draws) / static_cast<double>(draws));
    diag.fifth_moment_exact = exact_weight_moment(scheme, n, 5);

    const auto steps = empirical_survival(marginal);
    diag.l21_norm_estimate = l21_norm(steps);
    diag.l21_power = options.l21_power;
    std::vector<double> powered(marginal.size());
    std::transform(marginal.begin(), marginal.end(), powered.begin(),
                   [&](double v) { return std::pow(v, options.l21_power); });
    diag.l21_power_estimate = l21_norm(empirical_survival(powered));
    for (double lambda : options.tail_grid) {
      diag.tail_profile.push_back({lambda, tail_sup(marginal, lambda)});
    }

    const double c2_gap = std::abs(diag.empirical_c2 - diag.finite_c2);
    if (c2_gap > std::max(0.05 * diag.finite_c2, 4.0 * diag.empirical_c2_se)) {
      report.c2_tracks = false;
    }
    if (diag.fifth_moment > report.fifth_moment_bound + 3.0 * diag.fifth_moment_se) {
      report.fifth_moment_bounded = false;
    }
    if (diag.l21_norm_estimate > report.l21_bound) report.l21_bounded = false;
    if (!diag.tail_profile.empty()) {
      const double first = diag.tail_profile.front().value;
      const double last = diag.tail_profile.back().value;
      if (!(last == 0.0 || last < first)) report.tail_decays = false;
    }
    report.per_n.push_back(std::move(diag));
  }
  return report;
}

}  // namespace ewboot
