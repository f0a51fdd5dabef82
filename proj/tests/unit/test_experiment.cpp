#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "pulselock/csv_io.hpp"
#include "pulselock/errors.hpp"
#include "pulselock/experiment.hpp"
#include "pulselock/scenario.hpp"

using namespace pulselock;
using namespace pulselock::experiment;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "pulselock_test_experiment" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("shipped defaults match the built-in scenario") {
  const auto loaded = load_scenario(PULSELOCK_DEFAULTS_JSON);
  CHECK(scenario_to_json(loaded) == scenario_to_json(default_scenario()));
}

TEST_CASE("parse_run_kind") {
  CHECK(parse_run_kind("open-loop") == RunKind::open_loop);
  CHECK(parse_run_kind("filter-only") == RunKind::filter_only);
  CHECK(parse_run_kind("closed-loop") == RunKind::closed_loop);
  for (auto k : {RunKind::open_loop, RunKind::filter_only, RunKind::closed_loop}) {
    CHECK(parse_run_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS((void)parse_run_kind("closed"), InvalidInput);
}

TEST_CASE("lock_time_s") {
  SampleSeries d{1e6, 0.0, {0.5, 0.05, 0.2, 0.05, 0.01, 0.0}};
  REQUIRE(lock_time_s(d).has_value());
  CHECK(*lock_time_s(d) == doctest::Approx(3e-6));
  d.samples.back() = -0.2;
  CHECK_FALSE(lock_time_s(d).has_value());
  SampleSeries all{1e6, 0.0, {0.0, 0.01}};
  CHECK(*lock_time_s(all) == 0.0);
}

TEST_CASE("closed-loop defaults reach 90% of I_max") {
  const auto dir = scratch("closed");
  const auto s = run_scenario(RunKind::closed_loop, with_seed(default_scenario(), 1), dir);
  REQUIRE(s.final_intensity_ratio.has_value());
  CHECK(*s.final_intensity_ratio >= 0.9);
  REQUIRE(s.min_pulse_peak_ratio_after_lock.has_value());
  CHECK(*s.min_pulse_peak_ratio_after_lock >= 0.9);
  CHECK(s.filter_enabled);

  for (const char* f : {"config.json", "intensity.csv", "intensity_spectrum.csv", "phase_diff.csv",
                        "pulse_peaks.csv", "filter_report.json", "summary.json"}) {
    CHECK(fs::exists(dir / f));
  }

  // lock_time_s is recomputable from the written trace.
  const auto trace = csv::read_series(dir / "phase_diff.csv");
  const auto again = lock_time_s(trace);
  REQUIRE(again.has_value());
  REQUIRE(s.lock_time_s.has_value());
  CHECK(*again == doctest::Approx(*s.lock_time_s).epsilon(1e-12));
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary.at("lock_time_s").get<double>() == doctest::Approx(*again).epsilon(1e-12));

  // The echoed config reproduces the run byte for byte.
  const auto dir2 = scratch("closed_echo");
  (void)run_scenario(RunKind::closed_loop, load_scenario(dir / "config.json"), dir2);
  for (const auto& e : fs::directory_iterator(dir)) {
    CHECK_MESSAGE(slurp(e.path()) == slurp(dir2 / e.path().filename()), e.path().filename().string());
  }
}

TEST_CASE("open-loop and filter-only artifacts") {
  const auto c = default_scenario();
  const auto open = scratch("open");
  (void)run_scenario(RunKind::open_loop, c, open);
  for (const char* f : {"noise_beam0.csv", "noise_beam1.csv", "combined.csv", "combined_spectrum.csv"}) {
    CHECK(fs::exists(open / f));
  }
  const auto filt = scratch("filter");
  const auto s = run_scenario(RunKind::filter_only, c, filt);
  CHECK(fs::exists(filt / "filtered.csv"));
  CHECK(fs::exists(filt / "filter_report.json"));
  REQUIRE(s.suppression_8_12k_db.has_value());
  CHECK(*s.suppression_8_12k_db >= 20.0);
  CHECK(slurp(open / "combined.csv") == slurp(filt / "combined.csv"));
}

TEST_CASE("invalid config writes nothing") {
  auto c = default_scenario();
  c.duration_s = 1e-4;
  const auto dir = scratch("short");
  CHECK_THROWS_AS((void)run_scenario(RunKind::closed_loop, c, dir), ValidationError);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("strict json") {
  const auto text = scenario_to_json(default_scenario());
  CHECK(scenario_to_json(scenario_from_json(text)) == text);
  auto j = nlohmann::ordered_json::parse(text);
  j["durration_s"] = 1e-3;
  CHECK_THROWS_WITH_AS((void)scenario_from_json(j.dump()), doctest::Contains("durration_s"), ValidationError);
  CHECK_THROWS_AS((void)scenario_from_json("{"), ValidationError);
  CHECK_THROWS_AS((void)load_scenario(scratch("none") / "missing.json"), IoError);
}

TEST_CASE("compare_spectra") {
  const auto c = default_scenario();
  const auto a = waveform::power_spectrum_db(combiner::simulate_open_loop(c), waveform::Taper::hann);
  CHECK(compare_spectra(a, a, 8e3, 12e3) == 0.0);
  auto shifted = a;
  for (double& v : shifted.levels_db) v -= 7.5;
  CHECK(compare_spectra(a, shifted, 0.0, 500e3) == doctest::Approx(7.5));
  auto coarse = a;
  coarse.freq_resolution_hz *= 2.0;
  CHECK_THROWS_AS((void)compare_spectra(a, coarse, 8e3, 12e3), InvalidInput);
  CHECK_THROWS_AS((void)compare_spectra(a, a, 12e3, 8e3), InvalidBand);
}

TEST_CASE("sweep writes one directory per seed in order") {
  auto c = default_scenario();
  c.duration_s = 1e-3;
  const auto root = scratch("sweep");
  const auto res = sweep(RunKind::open_loop, c, {3, 1, 2}, root, 2);
  REQUIRE(res.size() == 3);
  CHECK(res[0].seed == 3);
  CHECK(res[1].seed == 1);
  CHECK(res[2].seed == 2);
  for (int s : {1, 2, 3}) CHECK(fs::exists(root / ("seed_" + std::to_string(s)) / "combined.csv"));
  CHECK(slurp(root / "seed_1" / "combined.csv") != slurp(root / "seed_2" / "combined.csv"));
}

TEST_CASE("with_seed redraws beam noise") {
  const auto a = with_seed(default_scenario(), 4);
  const auto b = with_seed(default_scenario(), 5);
  CHECK(a.seed == 4);
  CHECK_FALSE(a.beams[0].noise_model == b.beams[0].noise_model);
  CHECK(with_seed(default_scenario(), 4).beams[1].noise_model == a.beams[1].noise_model);
}
