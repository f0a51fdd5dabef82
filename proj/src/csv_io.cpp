#include "pulselock/csv_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "pulselock/errors.hpp"

namespace pulselock::csv {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

// Returns the data rows as (x, y) pairs, skipping the header line.
std::vector<std::pair<double, double>> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<std::pair<double, double>> rows;
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": expected two columns");
    }
    try {
      rows.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": not a number");
    }
  }
  return rows;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(len));
}

void write_series(const std::filesystem::path& path, const SampleSeries& series,
                  std::string_view value_column) {
  auto out = open_out(path);
  std::string text;
  text.reserve(series.size() * 48 + 32);
  text.append("t_s,").append(value_column).push_back('\n');
  for (std::size_t i = 0; i < series.size(); ++i) {
    text.append(format_double(series.time_at(i))).push_back(',');
    text.append(format_double(series.samples[i])).push_back('\n');
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  finish(out, path);
}

SampleSeries read_series(const std::filesystem::path& path) {
  const auto rows = read_pairs(path);
  if (rows.size() < 2) {
    throw InvalidInput(path.string() + ": need at least two samples to infer the sample rate");
  }
  const double span = rows.back().first - rows.front().first;
  if (!(span > 0.0)) {
    throw InvalidInput(path.string() + ": time column must increase");
  }
  SampleSeries series;
  series.t0_s = rows.front().first;
  double rate = static_cast<double>(rows.size() - 1) / span;
  // Text round-off leaves the rate a few ulps off an integer; snap it back.
  const double nearest = std::round(rate);
  if (nearest > 0.0 && std::abs(rate - nearest) <= 1e-6 * nearest) rate = nearest;
  series.sample_rate_hz = rate;
  series.samples.reserve(rows.size());
  for (const auto& [t, v] : rows) series.samples.push_back(v);
  return series;
}

void write_spectrum(const std::filesystem::path& path, const waveform::PowerSpectrum& spectrum) {
  auto out = open_out(path);
  std::string text = "freq_hz,level_db\n";
  text.reserve(spectrum.levels_db.size() * 48 + 32);
  for (std::size_t k = 0; k < spectrum.levels_db.size(); ++k) {
    text.append(format_double(spectrum.frequency_at(k))).push_back(',');
    text.append(format_double(spectrum.levels_db[k])).push_back('\n');
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  finish(out, path);
}

waveform::PowerSpectrum read_spectrum(const std::filesystem::path& path) {
  const auto rows = read_pairs(path);
  if (rows.size() < 2) {
    throw InvalidInput(path.string() + ": spectrum needs at least two bins");
  }
  waveform::PowerSpectrum spectrum;
  spectrum.freq_resolution_hz = rows[1].first - rows[0].first;
  if (rows[0].first != 0.0 || !(spectrum.freq_resolution_hz > 0.0)) {
    throw InvalidInput(path.string() + ": frequency grid must start at 0 Hz and increase");
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double expected = static_cast<double>(k) * spectrum.freq_resolution_hz;
    if (std::abs(rows[k].first - expected) > 1e-6 * spectrum.freq_resolution_hz + 1e-9 * expected) {
      throw InvalidInput(path.string() + ": frequency grid is not uniform");
    }
    spectrum.levels_db.push_back(rows[k].second);
  }
  // The file does not say whether the source length was odd; assume even,
  // which makes the last bin the Nyquist bin.
  spectrum.source_length = 2 * (rows.size() - 1);
  return spectrum;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  auto out = open_out(path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  finish(out, path);
}

}  // namespace pulselock::csv
