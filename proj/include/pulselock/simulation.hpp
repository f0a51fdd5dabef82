#pragma once

#include <vector>

#include "pulselock/pulse_filter.hpp"
#include "pulselock/scenario.hpp"
#include "pulselock/waveform.hpp"

namespace pulselock {

namespace combiner {

/// Detector output at the internal rate, before the AD sampler. Dither is
/// applied when a controller is configured; commands stay at zero.
[[nodiscard]] SampleSeries simulate_analog(const ScenarioConfig& scenario);

/// Detector output at the AD rate with no control. Equal, sample for sample,
/// to ad_sample(simulate_analog(scenario), ad_rate_hz) but only evaluates the
/// internal instants the sampler picks.
[[nodiscard]] SampleSeries simulate_open_loop(const ScenarioConfig& scenario);

/// Phase noise of one beam on the AD grid (same instants as simulate_open_loop).
[[nodiscard]] SampleSeries beam_noise(const ScenarioConfig& scenario, std::size_t beam);

}  // namespace combiner

namespace dither {

struct ClosedLoopResult {
  /// Raw detector signal seen by the AD module.
  SampleSeries intensity;
  /// Optical phase of the first non-reference beam minus the reference beam,
  /// wrapped, excluding the dither itself.
  SampleSeries phase_diff;
  /// Empty when the filter is disabled.
  filter::FilterReport report;
  bool filter_enabled = false;
};

/// Closes the loop sample by sample: simulate, filter, demodulate once per
/// integration period, update the phase commands. Filter state persists for
/// the whole run.
[[nodiscard]] ClosedLoopResult run_closed_loop(const ScenarioConfig& scenario);

}  // namespace dither
}  // namespace pulselock
