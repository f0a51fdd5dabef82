#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "pulselock/dither_controller.hpp"
#include "pulselock/errors.hpp"
#include "pulselock/experiment.hpp"
#include "pulselock/scenario.hpp"
#include "pulselock/simulation.hpp"

using namespace pulselock;
using namespace pulselock::dither;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAd = 10e6;

DitherConfig two_beam() { return *default_scenario().controller; }

// One integration period of the CW, noise-free detector signal.
SampleSeries cw_period(const DitherConfig& d, const std::vector<double>& amps, const std::vector<double>& offsets) {
  const auto n = integration_samples(d, kAd);
  SampleSeries s{kAd, 0.0, std::vector<double>(n)};
  std::vector<double> phases(amps.size());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t m = 0; m < amps.size(); ++m) phases[m] = offsets[m] + dither_phase(d, m, s.time_at(j));
    s.samples[j] = combiner::combined_intensity(amps, phases, 1.0);
  }
  return s;
}

// Independent oracle: -(2/T) * Simpson integral of |sum A e^{j phi(t)}|^2 sin(2 pi f t).
double simpson_error(const DitherConfig& d, const std::vector<double>& amps, const std::vector<double>& offsets,
                     std::size_t beam) {
  const int intervals = 4096;
  const double T = d.integration_period_s;
  const double h = T / intervals;
  auto f = [&](double t) {
    std::complex<double> e{0.0, 0.0};
    for (std::size_t m = 0; m < amps.size(); ++m) {
      const double phi = offsets[m] + d.tones[m].amp_rad * std::sin(2 * kPi * d.tones[m].freq_hz * t);
      e += std::polar(amps[m], phi);
    }
    return std::norm(e) * std::sin(2 * kPi * d.tones[beam].freq_hz * t);
  };
  double sum = f(0.0) + f(T);
  for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return -2.0 * (sum * h / 3.0) / T;
}

ScenarioConfig noiseless(double initial_offset) {
  auto c = default_scenario();
  for (auto& b : c.beams) b.noise_model = {};
  c.random_noise.clear();
  c.beams[1].initial_phase_rad = initial_offset;
  return c;
}

}  // namespace

TEST_CASE("dither phase") {
  const auto d = two_beam();
  CHECK(dither_phase(d, 1, 0.0) == 0.0);
  for (double t : {0.0, 1e-7, 3.3e-6, 1e-3}) CHECK(dither_phase(d, 0, t) == 0.0);
  double peak = 0.0;
  const double period = 1.0 / d.tones[1].freq_hz;
  for (int i = 0; i <= 100000; ++i) peak = std::max(peak, dither_phase(d, 1, period * i / 100000.0));
  CHECK(std::abs(peak - d.tones[1].amp_rad) <= 1e-9);
  CHECK_THROWS_AS((void)dither_phase(d, 2, 0.0), InvalidInput);
}

TEST_CASE("demodulator at the optimum is silent") {
  const auto d = two_beam();
  const double e = demodulate_error(cw_period(d, {1.0, 1.0}, {0.0, 0.0}), d, 1);
  CHECK(std::abs(e) <= 1e-6 * 4.0);
}

TEST_CASE("demodulator sign matches the quadrature oracle") {
  const auto d = two_beam();
  const double e = demodulate_error(cw_period(d, {1.0, 1.0}, {0.0, 0.1}), d, 1);
  const double q = simpson_error(d, {1.0, 1.0}, {0.0, 0.1}, 1);
  CHECK(q > 0.0);
  CHECK(e > 0.0);
  CHECK(e == doctest::Approx(q).epsilon(1e-6));

  for (double dphi : {0.2, 0.5, 1.0, 2.0, -0.2, -0.5, -1.0, -2.0}) {
    const double err = demodulate_error(cw_period(d, {1.0, 1.0}, {0.0, dphi}), d, 1);
    CHECK(std::signbit(err) == std::signbit(std::sin(dphi)));
    CHECK(std::abs(err - simpson_error(d, {1.0, 1.0}, {0.0, dphi}, 1)) <= 1e-6 * 4.0);
  }
}

TEST_CASE("cross-tone leakage") {
  auto d = two_beam();
  d.tones = {{0.0, 0.0}, {937.5e3, 0.0}, {1250e3, 0.2}};  // beam 1 idle, beam 2 dithered
  CHECK_NOTHROW(validate(d, kAd, 10e3));
  const std::vector<double> amps{1.0, 1.0, 1.0};
  const std::vector<double> offsets{0.0, 0.8, -0.3};
  const double e = demodulate_error(cw_period(d, amps, offsets), d, 1);
  CHECK(std::abs(e) <= 1e-3 * 9.0);
  CHECK(std::abs(simpson_error(d, amps, offsets, 1)) <= 1e-3 * 9.0);
}

TEST_CASE("demodulator length checks") {
  const auto d = two_beam();
  SampleSeries s{kAd, 0.0, std::vector<double>(31, 1.0)};
  CHECK_THROWS_AS((void)demodulate_error(s, d, 1), InvalidInput);
  s.samples.resize(32);
  CHECK_THROWS_AS((void)demodulate_error(s, d, 0), InvalidInput);
}

TEST_CASE("streaming accumulator matches demodulate_error") {
  const auto d = two_beam();
  const auto s = cw_period(d, {1.0, 1.0}, {0.0, 0.7});
  auto state = ControllerState::initial(d);
  for (std::size_t j = 0; j < s.size(); ++j) accumulate(state, d, s.time_at(j), s.samples[j]);
  const auto errors = take_errors(state, d);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0] == demodulate_error(s, d, 1));
  CHECK(state.elapsed_samples == 0);
  CHECK(state.accumulators[1] == 0.0);
}

TEST_CASE("controller step") {
  auto s = ControllerState::initial(two_beam());
  s.phase_cmd_rad = {0.0, 0.4};
  CHECK(controller_step(s, std::vector<double>{0.0}, 2.5).phase_cmd_rad == s.phase_cmd_rad);

  s.phase_cmd_rad = {0.0, kPi - 0.05};
  const auto next = controller_step(s, std::vector<double>{-1.0}, 0.1);
  CHECK(next.phase_cmd_rad[1] == doctest::Approx(-kPi + 0.05));
  CHECK(next.phase_cmd_rad[0] == 0.0);

  CHECK_THROWS_AS((void)controller_step(s, std::vector<double>{1.0, 2.0}, 0.1), InvalidInput);
}

TEST_CASE("wrap_phase lands in (-pi, pi]") {
  CHECK(wrap_phase(kPi) == kPi);
  CHECK(wrap_phase(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_phase(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  for (double x = -50.0; x < 50.0; x += 0.173) {
    const double w = wrap_phase(x);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(std::remainder(x - w, 2 * kPi) == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("config validation") {
  auto d = two_beam();
  CHECK_NOTHROW(validate(d, kAd, 10e3));
  d.tones[1].freq_hz = 900e3;  // 2.88 cycles per period
  CHECK_THROWS_AS(validate(d, kAd, 10e3), ValidationError);
  d = two_beam();
  d.tones[1].freq_hz = 5e3;
  d.integration_period_s = 200e-6;
  CHECK_THROWS_AS(validate(d, kAd, 10e3), ValidationError);  // below f_rep
  d = two_beam();
  d.tones = {{0.0, 0.0}, {937.5e3, 0.2}, {937.5e3 + 100e3, 0.2}};
  CHECK_THROWS_AS(validate(d, kAd, 10e3), ValidationError);  // closer than 1/T
  d = two_beam();
  d.tones[0] = {100e3, 0.1};
  CHECK_THROWS_AS(validate(d, kAd, 10e3), ValidationError);  // dithered reference
  d = two_beam();
  d.integration_period_s = 3.25e-6;
  CHECK_THROWS_AS(validate(d, kAd, 10e3), ValidationError);  // not whole samples
}

TEST_CASE("a 1 rad static offset locks within 1 ms") {
  auto c = noiseless(1.0);
  c.pulse_train.reset();
  c.filter.reset();
  const auto res = run_closed_loop(c);
  const auto lock = experiment::lock_time_s(res.phase_diff, 0.01);
  REQUIRE(lock.has_value());
  CHECK(*lock <= 1e-3);
}

TEST_CASE("already locked stays locked") {
  auto cw = noiseless(0.0);
  cw.pulse_train.reset();
  cw.filter.reset();
  for (double v : run_closed_loop(cw).phase_diff.samples) CHECK(std::abs(v) <= 1e-10);

  // Interpolated pulse samples miss the dither curvature slightly.
  const auto c = noiseless(0.0);
  const auto res = run_closed_loop(c);
  for (double v : res.phase_diff.samples) CHECK(std::abs(v) <= 1e-5);
  // Dither costs about 1 - J0-like loss of a percent.
  for (std::size_t j = 0; j < res.intensity.size(); ++j) {
    const double ideal = c.i_max() * combiner::intensity_envelope(c.pulse_train, res.intensity.time_at(j));
    CHECK(res.intensity.samples[j] == doctest::Approx(ideal).epsilon(0.011));
  }
}

TEST_CASE("default scenario reaches the efficiency and pulse-peak targets") {
  const auto c = default_scenario();
  const auto res = run_closed_loop(c);
  CHECK(experiment::final_intensity_ratio(res.intensity, c) >= 0.9);
  const auto lock = experiment::lock_time_s(res.phase_diff);
  REQUIRE(lock.has_value());
  const auto peaks = experiment::pulse_peaks(res.intensity, c);
  CHECK(peaks.size() == 20);
  for (const auto& p : peaks) {
    if (p.t_s >= *lock) CHECK(p.ratio >= 0.9);
  }
}

TEST_CASE("lock holds for 10 ms under default noise") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto c = experiment::with_seed(default_scenario(), seed);
    c.duration_s = 10e-3;
    const auto res = run_closed_loop(c);
    std::size_t j = 0;
    while (j < res.phase_diff.size() && std::abs(res.phase_diff.samples[j]) >= 0.1) ++j;
    REQUIRE(j < res.phase_diff.size());
    double worst = 0.0;
    for (; j < res.phase_diff.size(); ++j) worst = std::max(worst, std::abs(res.phase_diff.samples[j]));
    CHECK(worst < 0.3);
  }
}
