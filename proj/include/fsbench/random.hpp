#pragma once

// Counter-based random streams. Every draw is a pure function of a 64-bit key
// and a counter, so values can be addressed directly by (seed, tag, row, column)
// and independent streams are derived by hashing tags into the key.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>
#include <type_traits>
#include <utility>

namespace fsbench {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace detail {
constexpr std::uint64_t as_word(std::string_view s) noexcept { return fnv1a(s); }
constexpr std::uint64_t as_word(const char* s) noexcept { return fnv1a(s); }
template <class T>
  requires std::is_integral_v<T> || std::is_enum_v<T>
constexpr std::uint64_t as_word(T v) noexcept {
  return static_cast<std::uint64_t>(v);
}
}  // namespace detail

// Stable hash of a tuple of integers and strings. Used for every seed
// derivation so adding a field to one call site never perturbs another.
template <class... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t seed, const Parts&... parts) noexcept {
  std::uint64_t h = mix64(seed);
  ((h = mix64(h ^ mix64(detail::as_word(parts)))), ...);
  return h;
}

// Uniform in [0,1) with 53 bits of mantissa.
constexpr double bits_to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform in (0,1].
constexpr double bits_to_open_unit(std::uint64_t bits) noexcept {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

template <class... Parts>
double cell_uniform(std::uint64_t seed, const Parts&... parts) noexcept {
  return bits_to_unit(derive_seed(seed, parts...));
}

// Standard normal addressed by key (Box-Muller on two derived uniforms).
template <class... Parts>
double cell_normal(std::uint64_t seed, const Parts&... parts) noexcept {
  const std::uint64_t key = derive_seed(seed, parts...);
  const double u1 = bits_to_open_unit(mix64(key ^ 0x1ULL));
  const double u2 = bits_to_unit(mix64(key ^ 0x2ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// UniformRandomBitGenerator over a keyed counter. Cheap to copy; `derive`
// produces an independent child stream.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key = 0) noexcept : key_(mix64(key)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix64(key_ ^ mix64(counter_++)); }

  template <class... Parts>
  CounterRng derive(const Parts&... parts) const noexcept {
    return CounterRng(derive_seed(key_, parts...));
  }

  double uniform() noexcept { return bits_to_unit((*this)()); }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Box-Muller, no cached second variate so the stream position is a pure
  // function of the number of draws.
  double normal(double mean = 0.0, double sd = 1.0) noexcept {
    const double u1 = bits_to_open_unit((*this)());
    const double u2 = bits_to_unit((*this)());
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, bound) by multiply-shift; bias is at most bound / 2^64.
  std::uint64_t below(std::uint64_t bound) noexcept {
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>((*this)()) * bound) >> 64);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates with CounterRng::below, so results do not depend on the
// standard library's distribution implementations.
template <class RandomIt>
void shuffle(RandomIt first, RandomIt last, CounterRng& rng) {
  const auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    const auto j = static_cast<decltype(i)>(rng.below(static_cast<std::uint64_t>(i) + 1));
    using std::swap;
    swap(first[i], first[j]);
  }
}

}  // namespace fsbench
