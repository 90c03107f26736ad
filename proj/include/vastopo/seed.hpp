#pragma once

#include <cstdint>
#include <string_view>

namespace vastopo {

// Counter-based randomness. Every random quantity in the project is a pure
// function of (seed, stream name, counter), so results never depend on
// iteration order or thread count, and are identical across standard
// libraries (std distributions are implementation-defined).

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named sub-seed: lets one component be reproduced without the others.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) noexcept {
  return splitmix64(seed ^ splitmix64(fnv1a(name)));
}

constexpr std::uint64_t hash_at(std::uint64_t key, std::uint64_t counter) noexcept {
  return splitmix64(key ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

// Uniform double in [0, 1) with 53 random bits.
constexpr double uniform01(std::uint64_t key, std::uint64_t counter) noexcept {
  return static_cast<double>(hash_at(key, counter) >> 11) * 0x1.0p-53;
}

constexpr double uniform(std::uint64_t key, std::uint64_t counter, double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform01(key, counter);
}

// Sequential convenience wrapper over the counter stream.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  double uniform01() noexcept { return vastopo::uniform01(key_, counter_++); }
  double uniform(double lo, double hi) noexcept { return vastopo::uniform(key_, counter_++, lo, hi); }
  // Integer in [lo, hi] inclusive.
  long long integer(long long lo, long long hi) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long long>(hash_at(key_, counter_++) % span);
  }
  std::uint64_t bits() noexcept { return hash_at(key_, counter_++); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace vastopo
