#pragma once

#include <cstddef>
#include <vector>

namespace pulselock {

/// Uniformly sampled real waveform. Sample i sits at t0_s + i / sample_rate_hz.
struct SampleSeries {
  double sample_rate_hz = 1.0;
  double t0_s = 0.0;
  std::vector<double> samples;

  [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
  [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
  [[nodiscard]] double time_at(std::size_t i) const noexcept {
    return t0_s + static_cast<double>(i) / sample_rate_hz;
  }
  [[nodiscard]] double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Throws InvalidInput unless the series has a positive rate and at least one sample.
void require_valid(const SampleSeries& series);

namespace waveform {

enum class Taper { none, hann };

inline constexpr double kFloorDb = -300.0;

/// One-sided power spectrum in dB relative to 1 unit^2.
///
/// Bin k covers frequency k * freq_resolution_hz for k in [0, N/2]. Linear bin
/// powers are |X_k|^2 / N^2, doubled for bins that have a negative-frequency
/// twin, so that the linear bins of an untapered series sum to its mean square.
struct PowerSpectrum {
  double freq_resolution_hz = 0.0;
  std::vector<double> levels_db;
  double floor_db = kFloorDb;
  std::size_t source_length = 0;

  [[nodiscard]] double frequency_at(std::size_t bin) const noexcept {
    return static_cast<double>(bin) * freq_resolution_hz;
  }
  [[nodiscard]] double nyquist_hz() const noexcept {
    return 0.5 * static_cast<double>(source_length) * freq_resolution_hz;
  }
};

struct SpectralPeak {
  double freq_hz = 0.0;
  double level_db = 0.0;
};

/// Linear one-sided bin powers (same normalization as power_spectrum_db).
[[nodiscard]] std::vector<double> power_spectrum_linear(const SampleSeries& series, Taper taper);

[[nodiscard]] PowerSpectrum power_spectrum_db(const SampleSeries& series, Taper taper);

/// Maximum-level bin with frequency in [f_lo, f_hi]; ties go to the lowest frequency.
[[nodiscard]] SpectralPeak peak_in_band(const PowerSpectrum& spectrum, double f_lo, double f_hi);

}  // namespace waveform
}  // namespace pulselock
