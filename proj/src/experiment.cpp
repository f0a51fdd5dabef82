#include "pulselock/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "pulselock/csv_io.hpp"
#include "pulselock/errors.hpp"

namespace pulselock::experiment {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  }
}

void write_with_spectrum(const fs::path& dir, const std::string& stem, const SampleSeries& series,
                         std::string_view column, waveform::PowerSpectrum* spectrum_out = nullptr) {
  csv::write_series(dir / (stem + ".csv"), series, column);
  auto spectrum = waveform::power_spectrum_db(series, waveform::Taper::hann);
  csv::write_spectrum(dir / (stem + "_spectrum.csv"), spectrum);
  if (spectrum_out) *spectrum_out = std::move(spectrum);
}

BandPeak band_peak(const std::string& name, const waveform::PowerSpectrum& s, double lo, double hi) {
  return {name, lo, hi, waveform::peak_in_band(s, lo, hi)};
}

// Upper band edge clipped to the spectrum, so short or slow runs still report.
double clip_hi(const waveform::PowerSpectrum& s, double hi) { return std::min(hi, s.nyquist_hz()); }

std::size_t replaced_count(const filter::FilterReport& r) {
  std::size_t n = 0;
  for (const auto& [lo, hi] : r.replaced_ranges) n += static_cast<std::size_t>(hi - lo + 1);
  return n;
}

void add_report(RunSummary& s, const filter::FilterReport& r) {
  s.detection_latency_s = r.detection_latency_s;
  s.reacquisitions = r.reacquisitions;
  s.replaced_samples = replaced_count(r);
}

}  // namespace

RunKind parse_run_kind(std::string_view text) {
  if (text == "open-loop") return RunKind::open_loop;
  if (text == "filter-only") return RunKind::filter_only;
  if (text == "closed-loop") return RunKind::closed_loop;
  throw InvalidInput("unknown run kind '" + std::string(text) +
                     "' (expected open-loop, filter-only or closed-loop)");
}

const char* to_string(RunKind kind) noexcept {
  switch (kind) {
    case RunKind::open_loop: return "open-loop";
    case RunKind::filter_only: return "filter-only";
    case RunKind::closed_loop: return "closed-loop";
  }
  return "?";
}

std::optional<double> lock_time_s(const SampleSeries& phase_diff, double threshold_rad) {
  require_valid(phase_diff);
  std::size_t i = phase_diff.size();
  while (i > 0 && std::abs(phase_diff.samples[i - 1]) < threshold_rad) --i;
  if (i == phase_diff.size()) return std::nullopt;
  return phase_diff.time_at(i);
}

double final_intensity_ratio(const SampleSeries& intensity, const ScenarioConfig& config, double window_s) {
  require_valid(intensity);
  const auto want = static_cast<std::size_t>(std::llround(window_s * intensity.sample_rate_hz));
  const std::size_t count = std::clamp<std::size_t>(want, 1, intensity.size());
  const std::size_t start = intensity.size() - count;
  const double i_max = config.i_max();
  double got = 0.0;
  double ideal = 0.0;
  for (std::size_t j = start; j < intensity.size(); ++j) {
    got += intensity.samples[j];
    ideal += i_max * combiner::intensity_envelope(config.pulse_train, intensity.time_at(j));
  }
  return ideal > 0.0 ? got / ideal : 0.0;
}

std::vector<PulsePeak> pulse_peaks(const SampleSeries& intensity, const ScenarioConfig& config) {
  std::vector<PulsePeak> peaks;
  if (!config.pulse_train) return peaks;
  const auto& train = *config.pulse_train;
  const double i_max = config.i_max();
  const double period = train.period_s();

  std::optional<long long> current;
  PulsePeak best;
  double best_env = 0.0;
  for (std::size_t j = 0; j < intensity.size(); ++j) {
    const double t = intensity.time_at(j);
    const double pulse = combiner::pulse_envelope(train, t);
    if (!(pulse > 0.5 * train.peak) || train.peak <= 0.0) continue;
    const double env = train.cw_background + pulse;
    const auto index = std::llround(std::floor((t - train.first_pulse_time_s) / period + 1e-6));
    if (current && *current != index) {
      peaks.push_back(best);
      best_env = 0.0;
    }
    current = index;
    if (env > best_env) {
      best_env = env;
      best = {t, intensity.samples[j], intensity.samples[j] / (i_max * env)};
    }
  }
  if (current) peaks.push_back(best);
  return peaks;
}

std::string report_to_json(const filter::FilterReport& r) {
  Json ranges = Json::array();
  for (const auto& [lo, hi] : r.replaced_ranges) ranges.push_back(Json::array({lo, hi}));
  Json j;
  j["replaced_ranges"] = ranges;
  j["detection_latency_s"] = optional_number(r.detection_latency_s);
  j["reacquisitions"] = r.reacquisitions;
  return j.dump(2) + "\n";
}

std::string summary_to_json(const RunSummary& s) {
  Json j;
  j["kind"] = to_string(s.kind);
  j["seed"] = s.seed;
  j["duration_s"] = s.duration_s;
  j["samples"] = s.samples;
  Json peaks = Json::array();
  for (const auto& p : s.band_peaks) {
    peaks.push_back({{"series", p.series},
                     {"f_lo_hz", p.f_lo_hz},
                     {"f_hi_hz", p.f_hi_hz},
                     {"freq_hz", p.peak.freq_hz},
                     {"level_db", p.peak.level_db}});
  }
  j["band_peaks"] = peaks;
  if (s.kind == RunKind::filter_only) {
    j["suppression_8_12k_db"] = optional_number(s.suppression_8_12k_db);
    j["suppression_0_500k_db"] = optional_number(s.suppression_0_500k_db);
  }
  if (s.kind == RunKind::closed_loop) {
    j["lock_time_s"] = optional_number(s.lock_time_s);
    j["final_intensity_ratio"] = optional_number(s.final_intensity_ratio);
    j["min_pulse_peak_ratio_after_lock"] = optional_number(s.min_pulse_peak_ratio_after_lock);
    j["max_abs_phase_diff_after_lock"] = optional_number(s.max_abs_phase_diff_after_lock);
  }
  if (s.kind != RunKind::open_loop) {
    j["filter_enabled"] = s.filter_enabled;
    j["detection_latency_s"] = optional_number(s.detection_latency_s);
    j["reacquisitions"] = s.reacquisitions;
    j["replaced_samples"] = s.replaced_samples;
  }
  return j.dump(2) + "\n";
}

RunSummary run_scenario(RunKind kind, const ScenarioConfig& config, const fs::path& out_dir) {
  validate(config);
  if (kind == RunKind::filter_only && !config.pulse_train) {
    throw ValidationError("filter-only run needs a pulse_train");
  }
  if (kind == RunKind::closed_loop && !config.controller) {
    throw ValidationError("closed-loop run needs an enabled controller");
  }

  RunSummary summary;
  summary.kind = kind;
  summary.seed = config.seed;
  summary.duration_s = config.duration_s;
  summary.samples = config.ad_samples();

  // Simulate everything first so a failure leaves no partial directory behind.
  if (kind == RunKind::closed_loop) {
    const auto res = dither::run_closed_loop(config);
    ensure_dir(out_dir);
    csv::write_text(out_dir / "config.json", scenario_to_json(config));

    waveform::PowerSpectrum spectrum;
    write_with_spectrum(out_dir, "intensity", res.intensity, "value", &spectrum);
    csv::write_series(out_dir / "phase_diff.csv", res.phase_diff, "rad");

    const auto lock = lock_time_s(res.phase_diff);
    const auto peaks = pulse_peaks(res.intensity, config);
    std::string rows = "t_s,value,ratio\n";
    std::optional<double> min_ratio;
    for (const auto& p : peaks) {
      rows += csv::format_double(p.t_s) + "," + csv::format_double(p.value) + "," +
              csv::format_double(p.ratio) + "\n";
      if (lock && p.t_s >= *lock) min_ratio = std::min(min_ratio.value_or(p.ratio), p.ratio);
    }
    csv::write_text(out_dir / "pulse_peaks.csv", rows);
    csv::write_text(out_dir / "filter_report.json", report_to_json(res.report));

    summary.lock_time_s = lock;
    summary.final_intensity_ratio = final_intensity_ratio(res.intensity, config);
    summary.min_pulse_peak_ratio_after_lock = min_ratio;
    if (lock) {
      double worst = 0.0;
      for (std::size_t j = 0; j < res.phase_diff.size(); ++j) {
        if (res.phase_diff.time_at(j) >= *lock) worst = std::max(worst, std::abs(res.phase_diff.samples[j]));
      }
      summary.max_abs_phase_diff_after_lock = worst;
    }
    summary.filter_enabled = res.filter_enabled;
    add_report(summary, res.report);
    summary.band_peaks.push_back(band_peak("intensity", spectrum, 0.0, clip_hi(spectrum, 500e3)));
    csv::write_text(out_dir / "summary.json", summary_to_json(summary));
    return summary;
  }

  const auto combined = combiner::simulate_open_loop(config);
  std::vector<SampleSeries> noises;
  for (std::size_t m = 0; m < config.beams.size(); ++m) noises.push_back(combiner::beam_noise(config, m));
  std::optional<filter::BlockResult> filtered;
  if (kind == RunKind::filter_only) {
    filtered = filter::process_block(combined, filter::FilterState::initial(config.detector_params()));
  }

  ensure_dir(out_dir);
  csv::write_text(out_dir / "config.json", scenario_to_json(config));
  for (std::size_t m = 0; m < noises.size(); ++m) {
    waveform::PowerSpectrum ns;
    write_with_spectrum(out_dir, "noise_beam" + std::to_string(m), noises[m], "rad", &ns);
    summary.band_peaks.push_back(band_peak("noise_beam" + std::to_string(m), ns, 0.0, clip_hi(ns, 10e3)));
  }
  waveform::PowerSpectrum before;
  write_with_spectrum(out_dir, "combined", combined, "value", &before);
  const double hi_8_12 = clip_hi(before, 12e3);
  const double hi_global = clip_hi(before, 500e3);
  const bool have_8_12 = hi_8_12 > 8e3;
  if (have_8_12) summary.band_peaks.push_back(band_peak("combined", before, 8e3, hi_8_12));
  summary.band_peaks.push_back(band_peak("combined", before, 0.0, hi_global));

  if (filtered) {
    waveform::PowerSpectrum after;
    write_with_spectrum(out_dir, "filtered", filtered->filtered, "value", &after);
    csv::write_text(out_dir / "filter_report.json", report_to_json(filtered->report));
    if (have_8_12) {
      summary.band_peaks.push_back(band_peak("filtered", after, 8e3, hi_8_12));
      summary.suppression_8_12k_db = compare_spectra(before, after, 8e3, hi_8_12);
    }
    summary.band_peaks.push_back(band_peak("filtered", after, 0.0, hi_global));
    summary.suppression_0_500k_db = compare_spectra(before, after, 0.0, hi_global);
    summary.filter_enabled = true;
    add_report(summary, filtered->report);
  }
  csv::write_text(out_dir / "summary.json", summary_to_json(summary));
  return summary;
}

double compare_spectra(const waveform::PowerSpectrum& before, const waveform::PowerSpectrum& after,
                       double f_lo_hz, double f_hi_hz) {
  const double df = before.freq_resolution_hz;
  if (before.levels_db.size() != after.levels_db.size() ||
      std::abs(df - after.freq_resolution_hz) > 1e-9 * std::abs(df)) {
    throw InvalidInput("compare: spectra are on different frequency grids");
  }
  return waveform::peak_in_band(before, f_lo_hz, f_hi_hz).level_db -
         waveform::peak_in_band(after, f_lo_hz, f_hi_hz).level_db;
}

ScenarioConfig with_seed(ScenarioConfig config, std::uint64_t seed) {
  config.seed = seed;
  resolve_noise(config);
  return config;
}

std::vector<RunSummary> sweep(RunKind kind, const ScenarioConfig& base, const std::vector<std::uint64_t>& seeds,
                              const fs::path& out_root, unsigned threads) {
  std::vector<ScenarioConfig> configs;
  for (auto seed : seeds) {
    configs.push_back(with_seed(base, seed));
    validate(configs.back());
  }

  std::vector<RunSummary> results(seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        results[i] = run_scenario(kind, configs[i], out_root / ("seed_" + std::to_string(seeds[i])));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(seeds.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

fs::path resolve_output(const fs::path& path) {
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("PULSELOCK_OUT"); root && *root) return fs::path(root) / path;
  return path;
}

}  // namespace pulselock::experiment
