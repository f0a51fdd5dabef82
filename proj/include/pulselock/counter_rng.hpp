#pragma once

#include <cstdint>

namespace pulselock::rng {

/// Counter-based random numbers: every draw is a pure function of
/// (seed, stream, counter), so any sample of any stream can be produced
/// without generating the ones before it.

[[nodiscard]] std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;

/// Uniform on [0, 1) with 53 random bits.
[[nodiscard]] double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;

/// Standard normal draw (Box-Muller on two uniforms of the same counter).
[[nodiscard]] double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;

/// Independent child seed, e.g. one per beam of a scenario.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t child) noexcept;

}  // namespace pulselock::rng
