#include "pulselock/counter_rng.hpp"

#include <cmath>
#include <numbers>

namespace pulselock::rng {
namespace {

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  return splitmix(splitmix(splitmix(seed) ^ (stream * 0xD1B54A32D192ED03ULL)) + counter);
}

double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  return static_cast<double>(mix(seed, stream, counter) >> 11) * 0x1.0p-53;
}

double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  const double u1 = 1.0 - uniform(seed, stream, 2 * counter);  // (0, 1]
  const double u2 = uniform(seed, stream, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t child) noexcept {
  return mix(parent, 0x5EEDULL, child);
}

}  // namespace pulselock::rng
