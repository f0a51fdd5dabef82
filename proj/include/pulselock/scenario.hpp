#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pulselock/combiner_sim.hpp"
#include "pulselock/dither_controller.hpp"
#include "pulselock/pulse_filter.hpp"

namespace pulselock {

/// Random beam noise that is drawn from the scenario seed when the config is loaded.
struct RandomNoiseSpec {
  int n_components = noise::kDefaultComponents;
  double band_limit_hz = noise::kDefaultBandLimitHz;
  double max_amplitude_rad = noise::kDefaultMaxAmplitudeRad;
  double white_sigma_rad = 0.0;
};

struct ScenarioConfig {
  std::vector<combiner::BeamConfig> beams;
  /// Unset means a CW source (envelope 1, no pulses).
  std::optional<combiner::PulseTrain> pulse_train;
  combiner::DetectorModel detector;
  double ad_rate_hz = 10e6;
  double internal_rate_hz = 1e9;
  std::optional<filter::FilterSettings> filter;
  std::optional<dither::DitherConfig> controller;
  double duration_s = 2e-3;
  std::uint64_t seed = 1;
  noise::NoiseLimits noise_limits;
  /// Per-beam random noise requests; resolved into beams[m].noise_model by resolve_noise().
  std::vector<std::optional<RandomNoiseSpec>> random_noise;

  [[nodiscard]] std::size_t ad_samples() const;
  /// Internal-rate samples per AD sample.
  [[nodiscard]] std::int64_t oversampling() const;
  [[nodiscard]] double i_max() const;
  [[nodiscard]] filter::DetectorParams detector_params() const;
};

/// Redraws every random-noise beam from the current seed (beam m uses the
/// seed derived from (seed, m)).
void resolve_noise(ScenarioConfig& config);

/// Throws ValidationError naming the first violated invariant.
void validate(const ScenarioConfig& config);

[[nodiscard]] ScenarioConfig scenario_from_json(const std::string& text);
[[nodiscard]] ScenarioConfig load_scenario(const std::filesystem::path& path);
/// Pretty-printed JSON that loads back into an identical config.
[[nodiscard]] std::string scenario_to_json(const ScenarioConfig& config);

/// The stock two-beam pulsed scenario (10 kHz, 10 ns pulses, 10 MHz AD).
[[nodiscard]] ScenarioConfig default_scenario();

}  // namespace pulselock
