#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pulselock/waveform.hpp"

namespace pulselock::dither {

struct DitherTone {
  /// 0 marks an undithered beam (normally the reference).
  double freq_hz = 0.0;
  double amp_rad = 0.0;
};

struct DitherConfig {
  std::vector<DitherTone> tones;  // one per beam
  double integration_period_s = 3.2e-6;
  double gain = 2.5;
  std::size_t reference_beam = 0;

  [[nodiscard]] std::size_t beam_count() const noexcept { return tones.size(); }
};

/// Checks tone separation, the integer-sample and integer-cycle integration
/// period, and that every dither tone sits above `f_rep_hz` (pass 0 to skip).
void validate(const DitherConfig& config, double ad_rate_hz, double f_rep_hz);

/// Number of AD samples in one integration period.
[[nodiscard]] std::size_t integration_samples(const DitherConfig& config, double ad_rate_hz);

struct ControllerState {
  std::vector<double> phase_cmd_rad;
  /// Running sum of y_j * sin(2 pi f_m t_j) for each beam over the current period.
  std::vector<double> accumulators;
  std::size_t elapsed_samples = 0;
  std::size_t reference_beam = 0;

  [[nodiscard]] static ControllerState initial(const DitherConfig& config);
};

/// Wraps to (-pi, pi].
[[nodiscard]] double wrap_phase(double x) noexcept;

[[nodiscard]] double dither_phase(const DitherConfig& config, std::size_t beam, double t);

/// Lock-in output for one beam over exactly one integration period:
/// -(2/N) * sum_j y_j sin(2 pi f t_j). With the leading minus, the error has
/// the sign of the beam's phase lead over the intensity optimum.
[[nodiscard]] double demodulate_error(const SampleSeries& filtered, const DitherConfig& config,
                                      std::size_t beam);

/// Adds one filtered sample at time t to every dithered beam's accumulator.
void accumulate(ControllerState& state, const DitherConfig& config, double t, double sample);

/// Converts the accumulators into errors, one per non-reference beam in beam
/// order, and clears them.
[[nodiscard]] std::vector<double> take_errors(ControllerState& state, const DitherConfig& config);

/// cmd_m <- wrap(cmd_m - gain * error_m) for every non-reference beam, taking
/// the errors in beam order with the reference skipped.
[[nodiscard]] ControllerState controller_step(const ControllerState& state,
                                              std::span<const double> errors, double gain);

}  // namespace pulselock::dither
