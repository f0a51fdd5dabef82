#pragma once

#include <cstdint>
#include <numbers>
#include <vector>

#include "pulselock/waveform.hpp"

namespace pulselock::noise {

inline constexpr double kDefaultBandLimitHz = 5000.0;
inline constexpr double kDefaultMaxAmplitudeRad = 2.0 * std::numbers::pi / 20.0;  // lambda/20 of path
inline constexpr int kDefaultComponents = 8;

struct SinusoidComponent {
  double amplitude_rad = 0.0;
  double freq_hz = 0.0;
  double phase_rad = 0.0;

  friend bool operator==(const SinusoidComponent&, const SinusoidComponent&) = default;
};

/// Phase noise as a bank of sinusoids plus seeded white Gaussian noise.
struct NoiseModel {
  std::vector<SinusoidComponent> components;
  double white_sigma_rad = 0.0;
  std::uint64_t seed = 0;

  [[nodiscard]] double amplitude_sum() const noexcept;
  [[nodiscard]] double max_frequency_hz() const noexcept;

  /// Deterministic part at time t.
  [[nodiscard]] double sinusoids_at(double t) const noexcept;
  /// White-noise draw attached to grid index `index`.
  [[nodiscard]] double white_at(std::uint64_t index) const noexcept;
  /// Full noise value at time t, grid index `index`.
  [[nodiscard]] double at(double t, std::uint64_t index) const noexcept {
    return sinusoids_at(t) + white_at(index);
  }

  friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

struct NoiseLimits {
  double band_limit_hz = kDefaultBandLimitHz;
  double max_amplitude_rad = kDefaultMaxAmplitudeRad;
};

/// Throws ValidationError if a component or the white level breaks the limits.
void validate(const NoiseModel& model, const NoiseLimits& limits);

/// Draws `n_components` sinusoids with frequencies uniform in (0, band_limit_hz],
/// phases uniform in [0, 2*pi) and amplitudes rescaled to sum to
/// `max_amplitude_rad`. The result depends only on the arguments.
[[nodiscard]] NoiseModel random_noise_model(int n_components, double band_limit_hz,
                                            double max_amplitude_rad, double white_sigma_rad,
                                            std::uint64_t seed);

/// Samples the model at `sample_rate_hz` for `duration_s` starting at t = 0.
[[nodiscard]] SampleSeries synth_phase_noise(const NoiseModel& model, double duration_s,
                                             double sample_rate_hz);

}  // namespace pulselock::noise
