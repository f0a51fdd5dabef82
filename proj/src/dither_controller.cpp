#include "pulselock/dither_controller.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pulselock/errors.hpp"

namespace pulselock::dither {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool near_integer(double x) { return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x)); }

void check_beam(const DitherConfig& config, std::size_t beam) {
  if (beam >= config.tones.size()) {
    throw InvalidInput("dither: beam index " + std::to_string(beam) + " out of range");
  }
}

}  // namespace

void validate(const DitherConfig& c, double ad_rate_hz, double f_rep_hz) {
  if (c.tones.empty()) throw ValidationError("controller.tones must list one entry per beam");
  if (c.reference_beam >= c.tones.size()) {
    throw ValidationError("controller.reference_beam must index a beam");
  }
  if (!(c.integration_period_s > 0.0)) {
    throw ValidationError("controller.integration_period_s must be > 0");
  }
  if (!std::isfinite(c.gain)) throw ValidationError("controller.gain must be finite");
  if (!near_integer(c.integration_period_s * ad_rate_hz) ||
      std::round(c.integration_period_s * ad_rate_hz) < 1.0) {
    throw ValidationError("controller.integration_period_s must be a whole number of AD samples");
  }
  const double sep = 1.0 / c.integration_period_s;
  for (std::size_t m = 0; m < c.tones.size(); ++m) {
    const auto& tone = c.tones[m];
    if (!(tone.amp_rad >= 0.0)) {
      throw ValidationError("controller.tones[" + std::to_string(m) + "].amp_rad must be >= 0");
    }
    if (m == c.reference_beam) {
      if (tone.freq_hz != 0.0 || tone.amp_rad != 0.0) {
        throw ValidationError("controller reference beam must be undithered");
      }
      continue;
    }
    const std::string name = "controller.tones[" + std::to_string(m) + "]";
    if (!(tone.freq_hz > 0.0)) throw ValidationError(name + ".freq_hz must be > 0");
    if (!(tone.freq_hz > f_rep_hz)) {
      throw ValidationError(name + ".freq_hz must exceed the pulse repetition rate");
    }
    if (!(2.0 * tone.freq_hz < ad_rate_hz)) {
      throw ValidationError(name + ".freq_hz must be below the AD Nyquist rate");
    }
    if (!near_integer(tone.freq_hz * c.integration_period_s)) {
      throw ValidationError(name + ": integration period must hold a whole number of dither cycles");
    }
    for (std::size_t k = 0; k < m; ++k) {
      if (k == c.reference_beam) continue;
      if (std::abs(c.tones[k].freq_hz - tone.freq_hz) < sep * (1.0 - 1e-9)) {
        throw ValidationError(name + ".freq_hz must be at least 1/T away from every other tone");
      }
    }
  }
}

std::size_t integration_samples(const DitherConfig& c, double ad_rate_hz) {
  return static_cast<std::size_t>(std::llround(c.integration_period_s * ad_rate_hz));
}

ControllerState ControllerState::initial(const DitherConfig& config) {
  ControllerState s;
  s.phase_cmd_rad.assign(config.tones.size(), 0.0);
  s.accumulators.assign(config.tones.size(), 0.0);
  s.reference_beam = config.reference_beam;
  return s;
}

double wrap_phase(double x) noexcept {
  return x - kTwoPi * std::ceil((x - std::numbers::pi) / kTwoPi);
}

double dither_phase(const DitherConfig& config, std::size_t beam, double t) {
  check_beam(config, beam);
  if (beam == config.reference_beam) return 0.0;
  const auto& tone = config.tones[beam];
  return tone.amp_rad * std::sin(kTwoPi * tone.freq_hz * t);
}

double demodulate_error(const SampleSeries& filtered, const DitherConfig& config, std::size_t beam) {
  require_valid(filtered);
  check_beam(config, beam);
  const double f = config.tones[beam].freq_hz;
  if (beam == config.reference_beam || !(f > 0.0)) {
    throw InvalidInput("demodulate_error: beam " + std::to_string(beam) + " has no dither tone");
  }
  const auto n = integration_samples(config, filtered.sample_rate_hz);
  if (filtered.size() != n) {
    throw InvalidInput("demodulate_error: series must span exactly one integration period (" +
                       std::to_string(n) + " samples)");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    acc += filtered.samples[j] * std::sin(kTwoPi * f * filtered.time_at(j));
  }
  return -2.0 * acc / static_cast<double>(n);
}

void accumulate(ControllerState& state, const DitherConfig& config, double t, double sample) {
  for (std::size_t m = 0; m < config.tones.size(); ++m) {
    if (m == config.reference_beam) continue;
    state.accumulators[m] += sample * std::sin(kTwoPi * config.tones[m].freq_hz * t);
  }
  ++state.elapsed_samples;
}

std::vector<double> take_errors(ControllerState& state, const DitherConfig& config) {
  std::vector<double> errors;
  const double n = static_cast<double>(state.elapsed_samples);
  for (std::size_t m = 0; m < config.tones.size(); ++m) {
    if (m == config.reference_beam) continue;
    errors.push_back(n > 0.0 ? -2.0 * state.accumulators[m] / n : 0.0);
    state.accumulators[m] = 0.0;
  }
  state.elapsed_samples = 0;
  return errors;
}

ControllerState controller_step(const ControllerState& state, std::span<const double> errors,
                                double gain) {
  const std::size_t beams = state.phase_cmd_rad.size();
  if (beams == 0 || state.reference_beam >= beams || errors.size() != beams - 1) {
    throw InvalidInput("controller_step: need one error per non-reference beam");
  }
  ControllerState next = state;
  std::size_t e = 0;
  for (std::size_t m = 0; m < beams; ++m) {
    if (m == state.reference_beam) {
      next.phase_cmd_rad[m] = 0.0;
      continue;
    }
    next.phase_cmd_rad[m] = wrap_phase(state.phase_cmd_rad[m] - gain * errors[e++]);
  }
  return next;
}

}  // namespace pulselock::dither
