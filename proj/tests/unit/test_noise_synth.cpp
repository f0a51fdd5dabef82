#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pulselock/errors.hpp"
#include "pulselock/noise_synth.hpp"
#include "pulselock/waveform.hpp"

using namespace pulselock;
using namespace pulselock::noise;

TEST_CASE("empty bank keeps only the white level") {
  const auto m = random_noise_model(0, 5000.0, 0.3142, 0.01, 7);
  CHECK(m.components.empty());
  CHECK(m.white_sigma_rad == 0.01);
}

TEST_CASE("same seed, same model") {
  CHECK(random_noise_model(8, 5000.0, 0.3142, 0.0, 42) == random_noise_model(8, 5000.0, 0.3142, 0.0, 42));
  CHECK_FALSE(random_noise_model(8, 5000.0, 0.3142, 0.0, 42) == random_noise_model(8, 5000.0, 0.3142, 0.0, 43));
}

TEST_CASE("generator post-conditions") {
  const auto m = random_noise_model(8, 5000.0, 0.3142, 0.0, 42);
  REQUIRE(m.components.size() == 8);
  double sum = 0.0;
  for (const auto& c : m.components) {
    CHECK(c.freq_hz > 0.0);
    CHECK(c.freq_hz <= 5000.0);
    CHECK(c.phase_rad >= 0.0);
    CHECK(c.phase_rad < 2.0 * std::numbers::pi);
    CHECK(c.amplitude_rad >= 0.0);
    sum += c.amplitude_rad;
  }
  CHECK(std::abs(sum - 0.3142) <= 1e-12);
  CHECK_NOTHROW(validate(m, {5000.0, 0.3142}));
}

TEST_CASE("bad generator arguments") {
  CHECK_THROWS_AS((void)random_noise_model(2, 5000.0, 0.3, -0.1, 1), InvalidInput);
  CHECK_THROWS_AS((void)random_noise_model(2, 5000.0, -0.3, 0.0, 1), InvalidInput);
  CHECK_THROWS_AS((void)random_noise_model(-1, 5000.0, 0.3, 0.0, 1), InvalidInput);
}

TEST_CASE("zero model synthesizes silence") {
  const auto s = synth_phase_noise(NoiseModel{}, 1e-3, 1e6);
  CHECK(s.size() == 1000);
  for (double v : s.samples) CHECK(v == 0.0);
}

TEST_CASE("single component follows the sinusoid") {
  NoiseModel m;
  m.components.push_back({0.1, 1000.0, 0.0});
  const auto s = synth_phase_noise(m, 1e-3, 10e6);
  REQUIRE(s.size() == 10000);
  for (std::size_t j = 0; j < s.size(); ++j) {
    CHECK(std::abs(s.samples[j] - 0.1 * std::sin(2.0 * std::numbers::pi * 1000.0 * s.time_at(j))) <= 1e-12);
  }
}

TEST_CASE("white noise statistics") {
  NoiseModel m;
  m.white_sigma_rad = 0.01;
  m.seed = 99;
  const auto s = synth_phase_noise(m, 1.0, 1e6);
  REQUIRE(s.size() == 1000000);
  double mean = 0.0;
  for (double v : s.samples) mean += v;
  mean /= static_cast<double>(s.size());
  double var = 0.0;
  for (double v : s.samples) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(s.size() - 1));
  CHECK(std::abs(mean) <= 3.0 * 0.01 / 1000.0);
  CHECK(std::abs(sd - 0.01) <= 0.02 * 0.01);
}

TEST_CASE("amplitude bound with 6 sigma slack") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto m = random_noise_model(8, 5000.0, kDefaultMaxAmplitudeRad, 0.003, seed);
    const auto s = synth_phase_noise(m, 2e-3, 1e6);
    const double bound = m.amplitude_sum() + 6.0 * m.white_sigma_rad;
    for (double v : s.samples) CHECK(std::abs(v) <= bound);
  }
}

TEST_CASE("noise-free synthesis has energy only at component frequencies") {
  NoiseModel m;
  m.components = {{0.2, 1000.0, 0.3}, {0.1, 3000.0, 1.0}};
  const auto s = synth_phase_noise(m, 10e-3, 100e3);  // 100 Hz bins, whole cycles
  const auto spec = waveform::power_spectrum_db(s, waveform::Taper::none);
  const double top = *std::max_element(spec.levels_db.begin(), spec.levels_db.end());
  for (std::size_t k = 0; k < spec.levels_db.size(); ++k) {
    const double f = spec.frequency_at(k);
    if (spec.levels_db[k] > top - 40.0) CHECK((f == doctest::Approx(1000.0) || f == doctest::Approx(3000.0)));
  }
}

TEST_CASE("synthesis is bit-identical across calls") {
  const auto m = random_noise_model(8, 5000.0, 0.3, 0.01, 5);
  CHECK(synth_phase_noise(m, 1e-3, 1e6).samples == synth_phase_noise(m, 1e-3, 1e6).samples);
}

TEST_CASE("sub-Nyquist rate and bad durations are rejected") {
  NoiseModel m;
  m.components.push_back({0.1, 5000.0, 0.0});
  CHECK_THROWS_AS((void)synth_phase_noise(m, 1e-3, 10e3), InvalidInput);
  CHECK_THROWS_AS((void)synth_phase_noise(m, 0.0, 1e6), InvalidInput);
}

TEST_CASE("validate names the broken limit") {
  NoiseModel m;
  m.components.push_back({0.5, 1000.0, 0.0});
  CHECK_THROWS_WITH_AS(validate(m, {}), doctest::Contains("max_amplitude_rad"), ValidationError);
  m.components[0] = {0.1, 6000.0, 0.0};
  CHECK_THROWS_WITH_AS(validate(m, {}), doctest::Contains("freq_hz"), ValidationError);
}
