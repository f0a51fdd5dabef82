#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pulselock/scenario.hpp"
#include "pulselock/simulation.hpp"
#include "pulselock/waveform.hpp"

namespace pulselock::experiment {

enum class RunKind { open_loop, filter_only, closed_loop };

[[nodiscard]] RunKind parse_run_kind(std::string_view text);
[[nodiscard]] const char* to_string(RunKind kind) noexcept;

inline constexpr double kLockThresholdRad = 0.1;
inline constexpr double kFinalWindowS = 0.2e-3;

/// First instant after which |phase_diff| stays below the threshold to the
/// end of the trace; unset if the last sample is not below it.
[[nodiscard]] std::optional<double> lock_time_s(const SampleSeries& phase_diff,
                                                double threshold_rad = kLockThresholdRad);

/// Mean detector signal over the last `window_s` divided by the mean of what a
/// perfectly phased array would give over the same samples (I_max times the
/// intensity envelope).
[[nodiscard]] double final_intensity_ratio(const SampleSeries& intensity, const ScenarioConfig& config,
                                           double window_s = kFinalWindowS);

struct PulsePeak {
  double t_s = 0.0;
  double value = 0.0;
  /// value / (I_max * envelope) at that sample.
  double ratio = 0.0;
};

/// The AD sample with the largest envelope inside each pulse that the sampler caught.
[[nodiscard]] std::vector<PulsePeak> pulse_peaks(const SampleSeries& intensity,
                                                 const ScenarioConfig& config);

struct BandPeak {
  std::string series;
  double f_lo_hz = 0.0;
  double f_hi_hz = 0.0;
  waveform::SpectralPeak peak;
};

struct RunSummary {
  RunKind kind = RunKind::open_loop;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  std::size_t samples = 0;
  std::vector<BandPeak> band_peaks;
  std::optional<double> suppression_8_12k_db;
  std::optional<double> suppression_0_500k_db;
  std::optional<double> lock_time_s;
  std::optional<double> final_intensity_ratio;
  std::optional<double> min_pulse_peak_ratio_after_lock;
  std::optional<double> max_abs_phase_diff_after_lock;
  bool filter_enabled = false;
  std::optional<double> detection_latency_s;
  int reacquisitions = 0;
  std::size_t replaced_samples = 0;
};

[[nodiscard]] std::string summary_to_json(const RunSummary& summary);
[[nodiscard]] std::string report_to_json(const filter::FilterReport& report);

/// Validates the config, then writes every artifact of `kind` into out_dir
/// (created if needed). Nothing is written when validation fails.
RunSummary run_scenario(RunKind kind, const ScenarioConfig& config, const std::filesystem::path& out_dir);

/// Peak level in the band of `before` minus that of `after`. The two spectra
/// must share their frequency grid.
[[nodiscard]] double compare_spectra(const waveform::PowerSpectrum& before,
                                     const waveform::PowerSpectrum& after, double f_lo_hz,
                                     double f_hi_hz);

/// Runs one scenario per seed, `threads` at a time, each into out_root/seed_<n>.
/// Results come back in seed order.
std::vector<RunSummary> sweep(RunKind kind, const ScenarioConfig& base, const std::vector<std::uint64_t>& seeds,
                              const std::filesystem::path& out_root, unsigned threads);

/// Copy of `config` with a new seed and its random beam noise redrawn.
[[nodiscard]] ScenarioConfig with_seed(ScenarioConfig config, std::uint64_t seed);

/// Output root for relative paths: $PULSELOCK_OUT if set, else the working directory.
[[nodiscard]] std::filesystem::path resolve_output(const std::filesystem::path& path);

}  // namespace pulselock::experiment
