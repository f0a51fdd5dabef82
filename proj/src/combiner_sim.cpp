#include "pulselock/combiner_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pulselock/errors.hpp"

namespace pulselock::combiner {

void validate(const PulseTrain& t) {
  if (!(t.f_rep_hz > 0.0)) throw ValidationError("pulse_train.f_rep_hz must be > 0");
  if (!(t.width_s > 0.0)) throw ValidationError("pulse_train.width_s must be > 0");
  if (!(t.broadened_width_s >= t.width_s)) {
    throw ValidationError("pulse_train.broadened_width_s must be >= width_s");
  }
  if (!(t.broadened_width_s < t.period_s())) {
    throw ValidationError("pulse_train.broadened_width_s must be shorter than the pulse period");
  }
  if (!(t.peak >= 0.0)) throw ValidationError("pulse_train.peak must be >= 0");
  if (!(t.cw_background >= 0.0)) throw ValidationError("pulse_train.cw_background must be >= 0");
  if (!(t.first_pulse_time_s >= 0.0)) {
    throw ValidationError("pulse_train.first_pulse_time_s must be >= 0");
  }
}

double pulse_envelope(const PulseTrain& train, double t) {
  const double period = train.period_s();
  // Grid instants computed as k / rate may miss a pulse edge by an ulp.
  const double tol = 1e-9 * period;
  const double since_first = t - train.first_pulse_time_s;
  if (since_first < -tol) return 0.0;

  double local = since_first - std::floor(since_first / period) * period;
  if (local > period - tol) local -= period;

  if (train.shape == PulseShape::rectangular) {
    return (local >= -tol && local < train.broadened_width_s - tol) ? train.peak : 0.0;
  }
  // Gaussian with FWHM = broadened width, centred mid-slot, truncated to half a period.
  const double center = 0.5 * train.broadened_width_s;
  double dt = local - center;
  if (dt > 0.5 * period) dt -= period;
  const double x = dt / train.broadened_width_s;
  return train.peak * std::exp(-4.0 * std::numbers::ln2 * x * x);
}

double intensity_envelope(const std::optional<PulseTrain>& train, double t) {
  if (!train) return 1.0;
  return train->cw_background + pulse_envelope(*train, t);
}

double combined_intensity(std::span<const double> amplitudes, std::span<const double> phases_rad,
                          double envelope) {
  if (amplitudes.size() != phases_rad.size() || amplitudes.empty()) {
    throw InvalidInput("combined_intensity: need equal-length, non-empty amplitude and phase lists");
  }
  if (!(envelope >= 0.0)) throw InvalidInput("combined_intensity: envelope must be >= 0");

  double self = 0.0;
  double cross = 0.0;
  const std::size_t m = amplitudes.size();
  for (std::size_t a = 0; a < m; ++a) {
    self += amplitudes[a] * amplitudes[a];
    for (std::size_t b = a + 1; b < m; ++b) {
      cross += 2.0 * amplitudes[a] * amplitudes[b] * std::cos(phases_rad[a] - phases_rad[b]);
    }
  }
  // Cancellation can leave a tiny negative value at perfect destructive interference.
  return envelope * std::max(0.0, self + cross);
}

SampleSeries detector_current(const SampleSeries& power, const DetectorModel& det) {
  require_valid(power);
  if (!(det.responsivity > 0.0) || !(det.area > 0.0)) {
    throw InvalidInput("detector_current: responsivity and area must be > 0");
  }
  SampleSeries out = power;
  const double scale = det.scale();
  for (double& v : out.samples) {
    if (v < 0.0) throw InvalidInput("detector_current: optical power cannot be negative");
    v *= scale;
  }
  return out;
}

std::int64_t integer_ratio(double fast_hz, double slow_hz) {
  if (!(fast_hz > 0.0) || !(slow_hz > 0.0)) throw InvalidInput("rates must be > 0");
  const double ratio = fast_hz / slow_hz;
  const double nearest = std::round(ratio);
  if (nearest < 1.0 || std::abs(ratio - nearest) > 1e-9 * nearest) {
    throw InvalidInput("rate ratio " + std::to_string(ratio) + " is not a whole number");
  }
  return static_cast<std::int64_t>(nearest);
}

SampleSeries ad_sample(const SampleSeries& analog, double f_s_hz) {
  require_valid(analog);
  const auto step = integer_ratio(analog.sample_rate_hz, f_s_hz);
  SampleSeries out;
  out.sample_rate_hz = f_s_hz;
  out.t0_s = analog.t0_s;
  out.samples.reserve(analog.size() / static_cast<std::size_t>(step) + 1);
  for (std::size_t i = 0; i < analog.size(); i += static_cast<std::size_t>(step)) {
    out.samples.push_back(analog.samples[i]);
  }
  return out;
}

}  // namespace pulselock::combiner
