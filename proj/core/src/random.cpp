#include "ewboot/random.hpp"

#include <cmath>

namespace ewboot {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, then mixed.
std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

namespace {

std::mt19937_64 make_engine(std::uint64_t key) {
  // Four well-mixed words through seed_seq so that nearby keys do not give
  // correlated Mersenne Twister states.
  std::uint64_t s = key;
  std::uint32_t words[8];
  for (int i = 0; i < 4; ++i) {
    s = splitmix64(s);
    words[2 * i] = static_cast<std::uint32_t>(s);
    words[2 * i + 1] = static_cast<std::uint32_t>(s >> 32);
  }
  std::seed_seq seq(std::begin(words), std::end(words));
  return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed) : RandomStream(splitmix64(seed), 0) {}

RandomStream::RandomStream(std::uint64_t key, int) : key_(key), engine_(make_engine(key)) {}

RandomStream RandomStream::substream(std::uint64_t key) const {
  return RandomStream(splitmix64(key_ ^ splitmix64(key + 0x632be59bd9b4e019ULL)), 0);
}

RandomStream RandomStream::substream(std::string_view tag) const {
  return RandomStream(splitmix64(key_ ^ hash_tag(tag)), 0);
}

RandomStream RandomStream::substream(std::string_view tag, std::uint64_t index) const {
  return substream(tag).substream(index);
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::below(std::uint64_t bound) {
  // 64x64 -> 128 multiply-shift with rejection of the biased low region.
  std::uint64_t x = engine_();
  __uint128_t m = static_cast<__uint128_t>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = engine_();
      m = static_cast<__uint128_t>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double RandomStream::exponential(double rate) {
  // 1 - U lies in (0, 1], so the log is finite.
  return -std::log1p(-uniform()) / rate;
}

double RandomStream::gamma(double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(*this);
}

double RandomStream::normal(double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  return dist(*this);
}

}  // namespace ewboot
