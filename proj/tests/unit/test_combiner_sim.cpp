#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "pulselock/combiner_sim.hpp"
#include "pulselock/errors.hpp"
#include "pulselock/scenario.hpp"
#include "pulselock/simulation.hpp"

using namespace pulselock;
using namespace pulselock::combiner;

namespace {

constexpr double kPi = std::numbers::pi;

PulseTrain unit_train() {
  PulseTrain t;
  t.peak = 1.0;
  return t;
}

ScenarioConfig quiet_scenario() {
  ScenarioConfig c;
  c.beams = {BeamConfig{}, BeamConfig{}};
  c.random_noise.clear();
  c.duration_s = 1e-3;
  return c;
}

}  // namespace

TEST_CASE("pulse envelope on and off") {
  const auto t = unit_train();
  CHECK(pulse_envelope(t, t.first_pulse_time_s + 0.5 * t.broadened_width_s) == 1.0);
  CHECK(pulse_envelope(t, t.first_pulse_time_s + 0.5 * t.period_s()) == 0.0);
  CHECK(pulse_envelope(t, 0.0) == 0.0);
  CHECK(pulse_envelope(t, t.first_pulse_time_s + 3.0 * t.period_s()) == 1.0);
  CHECK(pulse_envelope(t, t.first_pulse_time_s + t.broadened_width_s) == 0.0);
}

TEST_CASE("pulse envelope is periodic") {
  const auto t = unit_train();
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(t.first_pulse_time_s, 1e-3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(gen);
    CHECK(pulse_envelope(t, x) == pulse_envelope(t, x + t.period_s()));
  }
}

TEST_CASE("gaussian pulse peaks mid-slot") {
  auto t = unit_train();
  t.shape = PulseShape::gaussian;
  const double c = t.first_pulse_time_s + 0.5 * t.broadened_width_s;
  CHECK(pulse_envelope(t, c) == doctest::Approx(1.0));
  CHECK(pulse_envelope(t, c + 0.5 * t.broadened_width_s) == doctest::Approx(0.5));
}

TEST_CASE("combined intensity limits") {
  const std::vector<double> a{1.0, 1.0};
  CHECK(combined_intensity(a, std::vector<double>{0.0, 0.0}, 1.0) == doctest::Approx(4.0));
  CHECK(combined_intensity(a, std::vector<double>{0.0, kPi}, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(combined_intensity(a, std::vector<double>{0.0, kPi / 2}, 1.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS((void)combined_intensity(a, std::vector<double>{0.0}, 1.0), InvalidInput);
  CHECK_THROWS_AS((void)combined_intensity(a, std::vector<double>{0.0, 0.0}, -1.0), InvalidInput);
}

TEST_CASE("combined intensity properties") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> phase(-10.0, 10.0);
  std::uniform_real_distribution<double> amp(0.0, 2.0);
  for (int i = 0; i < 2000; ++i) {
    // Two equal beams follow cos^2(dphi / 2).
    const double d = phase(gen);
    const double two = combined_intensity(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, d}, 1.0);
    CHECK(std::abs(two - 4.0 * std::pow(std::cos(0.5 * d), 2)) <= 1e-12);

    // Three random beams stay within [0, env * (sum A)^2] and match |sum A e^{j phi}|^2.
    const std::vector<double> a{amp(gen), amp(gen), amp(gen)};
    const std::vector<double> p{phase(gen), phase(gen), phase(gen)};
    const double env = amp(gen);
    const double v = combined_intensity(a, p, env);
    const double s = a[0] + a[1] + a[2];
    CHECK(v >= 0.0);
    CHECK(v <= env * s * s * (1.0 + 1e-12));
    double re = 0.0;
    double im = 0.0;
    for (int m = 0; m < 3; ++m) {
      re += a[m] * std::cos(p[m]);
      im += a[m] * std::sin(p[m]);
    }
    CHECK(v == doctest::Approx(env * (re * re + im * im)).epsilon(1e-9));

    // Doubling every amplitude quadruples the intensity.
    const std::vector<double> a2{2 * a[0], 2 * a[1], 2 * a[2]};
    CHECK(combined_intensity(a2, p, env) == doctest::Approx(4.0 * v).epsilon(1e-12));
  }
  // Upper bound reached at zero differences (mod 2 pi).
  const std::vector<double> a{0.5, 1.5, 1.0};
  CHECK(combined_intensity(a, std::vector<double>{0.3, 0.3 + 2 * kPi, 0.3 - 4 * kPi}, 2.0) ==
        doctest::Approx(2.0 * 9.0));
}

TEST_CASE("detector current") {
  SampleSeries p{1e6, 0.0, {0.0, 1.0, 2.5}};
  CHECK(detector_current(p, {1.0, 1.0}).samples == p.samples);
  SampleSeries ones{1e6, 0.0, std::vector<double>(5, 1.0)};
  for (double v : detector_current(ones, {2.0, 3.0}).samples) CHECK(v == 6.0);
  SampleSeries neg{1e6, 0.0, {1.0, -0.1}};
  CHECK_THROWS_AS((void)detector_current(neg, {1.0, 1.0}), InvalidInput);
}

TEST_CASE("ad_sample") {
  SampleSeries s{1e9, 0.0, {}};
  for (int i = 0; i < 1000; ++i) s.samples.push_back(std::sin(0.01 * i));
  CHECK(ad_sample(s, 1e9).samples == s.samples);

  SampleSeries c{1e9, 0.0, std::vector<double>(1000, 3.25)};
  for (double v : ad_sample(c, 1e7).samples) CHECK(v == 3.25);
  CHECK(ad_sample(c, 1e7).size() == 10);
  CHECK_THROWS_AS((void)ad_sample(c, 3e8), InvalidInput);
}

TEST_CASE("a 10 ns pulse leaves at most one AD sample per period") {
  const auto t = unit_train();
  for (double first : {50e-6, 50e-6 + 37e-9, 50e-6 + 95e-9}) {
    auto train = t;
    train.first_pulse_time_s = first;
    SampleSeries analog{1e9, 0.0, std::vector<double>(1000000)};
    for (std::size_t k = 0; k < analog.size(); ++k) analog.samples[k] = pulse_envelope(train, analog.time_at(k));
    const auto ad = ad_sample(analog, 10e6);
    for (std::size_t start = 0; start < ad.size(); start += 1000) {
      int nonzero = 0;
      for (std::size_t j = start; j < start + 1000; ++j) nonzero += ad.samples[j] != 0.0 ? 1 : 0;
      CHECK(nonzero <= 1);
    }
  }
}

TEST_CASE("open loop without noise or pulses is flat at I_max") {
  const auto s = combiner::simulate_open_loop(quiet_scenario());
  CHECK(s.size() == 10000);
  for (double v : s.samples) CHECK(v == doctest::Approx(4.0));
}

TEST_CASE("open loop equals the decimated analog signal bit for bit") {
  auto c = default_scenario();
  c.duration_s = 2.5e-4;
  const auto analog = combiner::simulate_analog(c);
  const auto sampled = ad_sample(analog, c.ad_rate_hz);
  const auto open = combiner::simulate_open_loop(c);
  REQUIRE(sampled.size() == open.size());
  CHECK(std::memcmp(sampled.samples.data(), open.samples.data(), open.size() * sizeof(double)) == 0);
}

TEST_CASE("pulse lines rise above the noise-only spectrum") {
  const auto c = default_scenario();
  auto quiet = c;
  quiet.pulse_train->peak = 0.0;
  const auto loud = waveform::power_spectrum_db(combiner::simulate_open_loop(c), waveform::Taper::hann);
  const auto noise = waveform::power_spectrum_db(combiner::simulate_open_loop(quiet), waveform::Taper::hann);
  const double line = waveform::peak_in_band(loud, 9e3, 11e3).level_db;
  const double floor = waveform::peak_in_band(noise, noise.freq_resolution_hz, 5e3).level_db;
  CHECK(line > floor);
}

TEST_CASE("noise-free pulsed run has harmonics only at multiples of the repetition rate") {
  auto c = quiet_scenario();
  c.pulse_train = PulseTrain{};
  const auto spec = waveform::power_spectrum_db(combiner::simulate_open_loop(c), waveform::Taper::none);
  double top = waveform::kFloorDb;
  for (double v : spec.levels_db) top = std::max(top, v);
  for (std::size_t k = 0; k < spec.levels_db.size(); ++k) {
    if (k % 10 != 0) CHECK(spec.levels_db[k] <= top - 80.0);
  }
}

TEST_CASE("open loop is deterministic per seed") {
  const auto a = combiner::simulate_open_loop(default_scenario());
  const auto b = combiner::simulate_open_loop(default_scenario());
  CHECK(a.samples == b.samples);
}

TEST_CASE("integer_ratio") {
  CHECK(integer_ratio(1e9, 1e7) == 100);
  CHECK_THROWS_AS((void)integer_ratio(1e9, 3e7), InvalidInput);
}
