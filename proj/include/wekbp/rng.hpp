#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wekbp {

// Counter-based randomness. Every random quantity in the library is derived
// from (seed, purpose tag, index...) so results do not depend on evaluation
// order.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn purpose tags into 64-bit keys.
inline constexpr std::uint64_t tag_hash(std::string_view tag) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline constexpr std::uint64_t derive_key(std::uint64_t seed, std::string_view tag) noexcept {
  return splitmix64(seed ^ splitmix64(tag_hash(tag)));
}

template <typename... Idx>
inline constexpr std::uint64_t derive_key(std::uint64_t seed, std::string_view tag, std::uint64_t first,
                                          Idx... rest) noexcept {
  return derive_key(splitmix64(derive_key(seed, tag) ^ splitmix64(first + 0x632BE59BD9B4E019ULL)), tag,
                    static_cast<std::uint64_t>(rest)...);
}

// Maps 64 random bits to [0, 1) with 53-bit resolution.
inline constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Thin wrapper over mt19937_64 with platform-independent conversions
// (std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t key) : engine_(key) {}

  std::uint64_t bits() { return engine_(); }
  double uniform() { return to_unit(engine_()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace wekbp
