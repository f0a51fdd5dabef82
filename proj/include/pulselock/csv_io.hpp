#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pulselock/waveform.hpp"

namespace pulselock::csv {

/// Shortest text that round-trips the double exactly ("%.17g").
[[nodiscard]] std::string format_double(double value);

/// Writes `t_s,<value_column>` rows with LF line endings.
void write_series(const std::filesystem::path& path, const SampleSeries& series,
                  std::string_view value_column = "value");

/// Reads a two-column time-series CSV. The sample rate is recovered from the
/// time column, so the file needs at least two rows.
[[nodiscard]] SampleSeries read_series(const std::filesystem::path& path);

/// Writes `freq_hz,level_db`, one row per bin.
void write_spectrum(const std::filesystem::path& path, const waveform::PowerSpectrum& spectrum);

/// Reads a spectrum CSV back. The frequency grid must be uniform and start at 0 Hz.
[[nodiscard]] waveform::PowerSpectrum read_spectrum(const std::filesystem::path& path);

/// Writes text verbatim (binary mode, so line endings stay LF).
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace pulselock::csv
