#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace ewboot {

// Deterministic, splittable random streams.
//
// A stream is identified by a root seed plus a path of integer/string keys,
// e.g. (seed, "boot", b). Two distinct paths yield statistically independent
// generators; the same path always yields the same sequence. Streams are
// plain values: copy one to fork it, never share one between threads.
class RandomStream {
 public:
  using engine_type = std::mt19937_64;
  using result_type = engine_type::result_type;

  explicit RandomStream(std::uint64_t seed);

  // Child stream keyed by an integer or a string tag. Does not advance *this.
  RandomStream substream(std::uint64_t key) const;
  RandomStream substream(std::string_view tag) const;
  RandomStream substream(std::string_view tag, std::uint64_t index) const;

  std::uint64_t key() const noexcept { return key_; }

  // UniformRandomBitGenerator interface, so std distributions accept it.
  static constexpr result_type min() { return engine_type::min(); }
  static constexpr result_type max() { return engine_type::max(); }
  result_type operator()() { return engine_(); }

  // Uniform on [0, 1).
  double uniform();
  // Uniform integer on [0, bound), bound > 0. Lemire's nearly-divisionless method.
  std::uint64_t below(std::uint64_t bound);
  double exponential(double rate = 1.0);
  double gamma(double shape, double rate = 1.0);
  double normal(double mean = 0.0, double sd = 1.0);

 private:
  RandomStream(std::uint64_t key, int /*tag*/);

  std::uint64_t key_;
  engine_type engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t hash_tag(std::string_view tag) noexcept;

}  // namespace ewboot
