#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pulselock/noise_synth.hpp"
#include "pulselock/waveform.hpp"

namespace pulselock::combiner {

enum class PulseShape { rectangular, gaussian };

/// Shared pulse train of all beams. Pulse k occupies
/// [first_pulse_time_s + k / f_rep_hz, ... + broadened_width_s).
struct PulseTrain {
  double f_rep_hz = 10e3;
  double width_s = 10e-9;
  double broadened_width_s = 10e-9;
  /// Envelope value inside a pulse, relative to the CW background.
  double peak = 3.0e4;
  /// Envelope level between pulses (leakage/pedestal light carrying the phase signal).
  double cw_background = 1.0;
  double first_pulse_time_s = 50e-6;
  PulseShape shape = PulseShape::rectangular;

  [[nodiscard]] double period_s() const noexcept { return 1.0 / f_rep_hz; }
};

void validate(const PulseTrain& train);

struct BeamConfig {
  double amplitude = 1.0;
  noise::NoiseModel noise_model;
  double initial_phase_rad = 0.0;
};

struct DetectorModel {
  double responsivity = 1.0;
  double area = 1.0;

  [[nodiscard]] double scale() const noexcept { return responsivity * area; }
};

/// Pulse-only envelope: `peak` during a pulse, 0 elsewhere (and before the first pulse).
[[nodiscard]] double pulse_envelope(const PulseTrain& train, double t);

/// Total intensity envelope I0(t): CW background plus pulses, or 1 for a CW source.
[[nodiscard]] double intensity_envelope(const std::optional<PulseTrain>& train, double t);

/// envelope * |sum_m A_m exp(j phi_m)|^2, evaluated as the sum of self terms
/// plus the pairwise cos(phi_a - phi_b) cross terms.
[[nodiscard]] double combined_intensity(std::span<const double> amplitudes,
                                        std::span<const double> phases_rad, double envelope);

/// Photocurrent R * S * P(t), same time base as the input.
[[nodiscard]] SampleSeries detector_current(const SampleSeries& power, const DetectorModel& det);

/// Instantaneous point-picking decimation to f_s_hz (every r-th sample from index 0).
[[nodiscard]] SampleSeries ad_sample(const SampleSeries& analog, double f_s_hz);

/// Integer ratio between two rates; throws InvalidInput unless it is a whole number.
[[nodiscard]] std::int64_t integer_ratio(double fast_hz, double slow_hz);

}  // namespace pulselock::combiner
