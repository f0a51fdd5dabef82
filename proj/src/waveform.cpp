#include "pulselock/waveform.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "pulselock/errors.hpp"

namespace pulselock {

void require_valid(const SampleSeries& series) {
  if (!(series.sample_rate_hz > 0.0) || !std::isfinite(series.sample_rate_hz)) {
    throw InvalidInput("sample series: sample_rate_hz must be positive");
  }
  if (series.empty()) {
    throw InvalidInput("sample series: no samples");
  }
}

namespace waveform {
namespace {

// FFTW planning is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
struct PlanDestroy {
  void operator()(fftw_plan_s* p) const noexcept {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using Plan = std::unique_ptr<fftw_plan_s, PlanDestroy>;

}  // namespace

std::vector<double> power_spectrum_linear(const SampleSeries& series, Taper taper) {
  require_valid(series);
  const std::size_t n = series.size();
  const std::size_t bins = n / 2 + 1;

  RealBuffer in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  ComplexBuffer out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  if (!in || !out) {
    throw std::bad_alloc();
  }

  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  }

  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    if (taper == Taper::hann && n > 1) {
      w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                               static_cast<double>(n - 1));
    }
    in[i] = series.samples[i] * w;
  }
  fftw_execute(plan.get());

  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  std::vector<double> power(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double re = out[k][0];
    const double im = out[k][1];
    const bool has_twin = k != 0 && !(n % 2 == 0 && k == n / 2);
    power[k] = (re * re + im * im) * norm * (has_twin ? 2.0 : 1.0);
  }
  return power;
}

PowerSpectrum power_spectrum_db(const SampleSeries& series, Taper taper) {
  const std::vector<double> power = power_spectrum_linear(series, taper);
  PowerSpectrum spectrum;
  spectrum.freq_resolution_hz = series.sample_rate_hz / static_cast<double>(series.size());
  spectrum.source_length = series.size();
  spectrum.levels_db.reserve(power.size());
  for (double p : power) {
    const double db = p > 0.0 ? 10.0 * std::log10(p) : kFloorDb;
    spectrum.levels_db.push_back(std::max(db, kFloorDb));
  }
  return spectrum;
}

SpectralPeak peak_in_band(const PowerSpectrum& spectrum, double f_lo, double f_hi) {
  if (!(f_lo >= 0.0) || !(f_lo < f_hi)) {
    throw InvalidBand("peak_in_band: need 0 <= f_lo < f_hi");
  }
  if (spectrum.levels_db.empty() || !(spectrum.freq_resolution_hz > 0.0)) {
    throw InvalidBand("peak_in_band: empty spectrum");
  }
  // Small slack so a band edge that lands on a bin frequency includes it.
  const double slack = 1e-9 * spectrum.freq_resolution_hz;
  if (f_hi > spectrum.nyquist_hz() + slack) {
    throw InvalidBand("peak_in_band: band extends beyond the Nyquist frequency");
  }

  bool found = false;
  SpectralPeak best;
  for (std::size_t k = 0; k < spectrum.levels_db.size(); ++k) {
    const double f = spectrum.frequency_at(k);
    if (f < f_lo - slack) continue;
    if (f > f_hi + slack) break;
    if (!found || spectrum.levels_db[k] > best.level_db) {
      best = {f, spectrum.levels_db[k]};
      found = true;
    }
  }
  if (!found) {
    throw InvalidBand("peak_in_band: no spectrum bin falls inside the band");
  }
  return best;
}

}  // namespace waveform
}  // namespace pulselock
