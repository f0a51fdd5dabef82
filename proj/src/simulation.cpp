#include "pulselock/simulation.hpp"

#include <optional>

#include "pulselock/errors.hpp"

namespace pulselock {

namespace {

// Beam phases at internal grid index k (time t), without control commands.
void open_loop_phases(const ScenarioConfig& s, double t, std::uint64_t k, std::vector<double>& phases) {
  for (std::size_t m = 0; m < s.beams.size(); ++m) {
    const auto& b = s.beams[m];
    double phi = b.initial_phase_rad + b.noise_model.at(t, k);
    if (s.controller) phi += dither::dither_phase(*s.controller, m, t);
    phases[m] = phi;
  }
}

std::vector<double> amplitudes_of(const ScenarioConfig& s) {
  std::vector<double> a;
  a.reserve(s.beams.size());
  for (const auto& b : s.beams) a.push_back(b.amplitude);
  return a;
}

}  // namespace

namespace combiner {

SampleSeries simulate_analog(const ScenarioConfig& s) {
  validate(s);
  const auto r = static_cast<std::uint64_t>(s.oversampling());
  const std::uint64_t n = static_cast<std::uint64_t>(s.ad_samples()) * r;
  const auto amps = amplitudes_of(s);
  std::vector<double> phases(s.beams.size());

  SampleSeries power{s.internal_rate_hz, 0.0, {}};
  power.samples.resize(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    const double t = power.time_at(k);
    open_loop_phases(s, t, k, phases);
    power.samples[k] = combined_intensity(amps, phases, intensity_envelope(s.pulse_train, t));
  }
  return detector_current(power, s.detector);
}

SampleSeries simulate_open_loop(const ScenarioConfig& s) {
  validate(s);
  const auto r = static_cast<std::uint64_t>(s.oversampling());
  const std::size_t n = s.ad_samples();
  const auto amps = amplitudes_of(s);
  const SampleSeries grid{s.internal_rate_hz, 0.0, {}};
  std::vector<double> phases(s.beams.size());

  SampleSeries power{s.ad_rate_hz, 0.0, {}};
  power.samples.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::uint64_t k = r * j;
    const double t = grid.time_at(k);
    open_loop_phases(s, t, k, phases);
    power.samples[j] = combined_intensity(amps, phases, intensity_envelope(s.pulse_train, t));
  }
  return detector_current(power, s.detector);
}

SampleSeries beam_noise(const ScenarioConfig& s, std::size_t beam) {
  validate(s);
  if (beam >= s.beams.size()) throw InvalidInput("beam_noise: beam index out of range");
  const auto r = static_cast<std::uint64_t>(s.oversampling());
  const SampleSeries grid{s.internal_rate_hz, 0.0, {}};
  SampleSeries out{s.ad_rate_hz, 0.0, {}};
  out.samples.resize(s.ad_samples());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const std::uint64_t k = r * j;
    out.samples[j] = s.beams[beam].noise_model.at(grid.time_at(k), k);
  }
  return out;
}

}  // namespace combiner

namespace dither {

ClosedLoopResult run_closed_loop(const ScenarioConfig& s) {
  validate(s);
  if (!s.controller) throw ValidationError("closed-loop run needs an enabled controller");
  const auto& ctrl = *s.controller;
  const auto r = static_cast<std::uint64_t>(s.oversampling());
  const std::size_t n = s.ad_samples();
  const std::size_t per_period = integration_samples(ctrl, s.ad_rate_hz);
  const auto amps = amplitudes_of(s);
  const double scale = s.detector.scale();
  const SampleSeries grid{s.internal_rate_hz, 0.0, {}};

  const std::size_t ref = ctrl.reference_beam;
  std::size_t probe = 0;
  while (probe == ref && probe + 1 < s.beams.size()) ++probe;

  ClosedLoopResult res;
  res.intensity = {s.ad_rate_hz, 0.0, std::vector<double>(n)};
  res.phase_diff = {s.ad_rate_hz, 0.0, std::vector<double>(n)};
  res.filter_enabled = s.filter.has_value();

  std::optional<filter::WindowFilter> window_filter;
  if (s.filter) {
    window_filter.emplace(filter::FilterState::initial(s.detector_params()), s.ad_rate_hz);
  }

  ControllerState state = ControllerState::initial(ctrl);
  std::vector<double> phases(s.beams.size());
  std::vector<double> emitted;
  std::size_t demod_index = 0;
  const SampleSeries ad_grid{s.ad_rate_hz, 0.0, {}};

  for (std::size_t j = 0; j < n; ++j) {
    const std::uint64_t k = r * j;
    const double t = grid.time_at(k);
    double base_ref = 0.0;
    double base_probe = 0.0;
    for (std::size_t m = 0; m < s.beams.size(); ++m) {
      const auto& b = s.beams[m];
      const double base = b.initial_phase_rad + b.noise_model.at(t, k) + state.phase_cmd_rad[m];
      if (m == ref) base_ref = base;
      if (m == probe) base_probe = base;
      phases[m] = base + dither_phase(ctrl, m, t);
    }
    const double y =
        scale * combiner::combined_intensity(amps, phases, combiner::intensity_envelope(s.pulse_train, t));
    res.intensity.samples[j] = y;
    res.phase_diff.samples[j] = wrap_phase(base_probe - base_ref);

    emitted.clear();
    if (window_filter) {
      window_filter->push(y, emitted);
    } else {
      emitted.push_back(y);
    }
    for (double v : emitted) {
      accumulate(state, ctrl, ad_grid.time_at(demod_index++), v);
      if (state.elapsed_samples == per_period) {
        const auto errors = take_errors(state, ctrl);
        state = controller_step(state, errors, ctrl.gain);
      }
    }
  }

  if (window_filter) {
    emitted.clear();
    window_filter->flush(emitted);
    res.report = window_filter->report();
  }
  return res;
}

}  // namespace dither
}  // namespace pulselock
