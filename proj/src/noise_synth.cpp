#include "pulselock/noise_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pulselock/counter_rng.hpp"
#include "pulselock/errors.hpp"

namespace pulselock::noise {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Stream ids inside one model seed.
constexpr std::uint64_t kStreamFreq = 1;
constexpr std::uint64_t kStreamPhase = 2;
constexpr std::uint64_t kStreamAmplitude = 3;
constexpr std::uint64_t kStreamWhite = 4;

}  // namespace

double NoiseModel::amplitude_sum() const noexcept {
  double sum = 0.0;
  for (const auto& c : components) sum += c.amplitude_rad;
  return sum;
}

double NoiseModel::max_frequency_hz() const noexcept {
  double f = 0.0;
  for (const auto& c : components) f = std::max(f, c.freq_hz);
  return f;
}

double NoiseModel::sinusoids_at(double t) const noexcept {
  double v = 0.0;
  for (const auto& c : components) {
    v += c.amplitude_rad * std::sin(kTwoPi * c.freq_hz * t + c.phase_rad);
  }
  return v;
}

double NoiseModel::white_at(std::uint64_t index) const noexcept {
  if (white_sigma_rad == 0.0) return 0.0;
  return white_sigma_rad * rng::normal(seed, kStreamWhite, index);
}

void validate(const NoiseModel& model, const NoiseLimits& limits) {
  if (!(model.white_sigma_rad >= 0.0)) {
    throw ValidationError("noise_model.white_sigma_rad must be >= 0");
  }
  for (const auto& c : model.components) {
    if (!(c.amplitude_rad >= 0.0)) {
      throw ValidationError("noise_model.components[].amplitude_rad must be >= 0");
    }
    if (!(c.freq_hz > 0.0) || c.freq_hz > limits.band_limit_hz) {
      throw ValidationError("noise_model.components[].freq_hz must lie in (0, " +
                            std::to_string(limits.band_limit_hz) + "]");
    }
    if (!(c.phase_rad >= 0.0) || !(c.phase_rad < kTwoPi)) {
      throw ValidationError("noise_model.components[].phase_rad must lie in [0, 2*pi)");
    }
  }
  // Rescaling to the limit can overshoot it by a rounding error.
  if (model.amplitude_sum() > limits.max_amplitude_rad * (1.0 + 1e-12)) {
    throw ValidationError("noise_model: sum of component amplitudes exceeds max_amplitude_rad");
  }
}

NoiseModel random_noise_model(int n_components, double band_limit_hz, double max_amplitude_rad,
                              double white_sigma_rad, std::uint64_t seed) {
  if (n_components < 0) throw InvalidInput("random_noise_model: n_components must be >= 0");
  if (!(band_limit_hz > 0.0)) throw InvalidInput("random_noise_model: band_limit_hz must be > 0");
  if (!(max_amplitude_rad >= 0.0)) {
    throw InvalidInput("random_noise_model: max_amplitude_rad must be >= 0");
  }
  if (!(white_sigma_rad >= 0.0)) {
    throw InvalidInput("random_noise_model: white_sigma_rad must be >= 0");
  }

  NoiseModel model;
  model.white_sigma_rad = white_sigma_rad;
  model.seed = seed;
  model.components.resize(static_cast<std::size_t>(n_components));

  double raw_sum = 0.0;
  for (int i = 0; i < n_components; ++i) {
    auto& c = model.components[static_cast<std::size_t>(i)];
    const auto k = static_cast<std::uint64_t>(i);
    c.freq_hz = band_limit_hz * (1.0 - rng::uniform(seed, kStreamFreq, k));
    c.phase_rad = kTwoPi * rng::uniform(seed, kStreamPhase, k);
    if (c.phase_rad >= kTwoPi) c.phase_rad = 0.0;
    c.amplitude_rad = 1.0 - rng::uniform(seed, kStreamAmplitude, k);  // (0, 1], sum never 0
    raw_sum += c.amplitude_rad;
  }
  for (auto& c : model.components) c.amplitude_rad *= max_amplitude_rad / raw_sum;
  return model;
}

SampleSeries synth_phase_noise(const NoiseModel& model, double duration_s, double sample_rate_hz) {
  if (!(duration_s > 0.0)) throw InvalidInput("synth_phase_noise: duration_s must be > 0");
  if (!(sample_rate_hz > 0.0)) throw InvalidInput("synth_phase_noise: sample_rate_hz must be > 0");
  if (!(sample_rate_hz > 2.0 * model.max_frequency_hz())) {
    throw InvalidInput("synth_phase_noise: sample rate must exceed twice the highest component frequency");
  }
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(duration_s * sample_rate_hz)));
  SampleSeries out;
  out.sample_rate_hz = sample_rate_hz;
  out.t0_s = 0.0;
  out.samples.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.samples[j] = model.at(out.time_at(j), j);
  }
  return out;
}

}  // namespace pulselock::noise
