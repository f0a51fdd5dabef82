#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pulselock/combiner_sim.hpp"
#include "pulselock/waveform.hpp"

namespace pulselock::filter {

using SampleIndex = std::int64_t;

/// User-facing knobs; the sample-count parameters are derived from the pulse
/// train and AD rate by make_detector_params.
struct FilterSettings {
  double th = 2.0;
  double beta = 0.8;
  /// Window width d in seconds; unset means 10x the pulse width.
  std::optional<double> window_width_s;
  int confirm_count = 5;
  int miss_limit = 3;
  /// Fixed amplitude level; unset means median + 8 * MAD of the last period of output.
  std::optional<double> v_threshold;
  /// Fixed denominator guard; unset means 1e-9 * max |sample| seen so far.
  std::optional<double> eps;
};

struct DetectorParams {
  double th = 2.0;
  std::optional<double> eps;
  double beta = 0.8;
  std::optional<double> v_threshold;
  int n_p = 1;
  int window_width_samples = 1;
  int period_samples = 1000;
  int confirm_count = 5;
  int miss_limit = 3;
};

void validate(const DetectorParams& params);

[[nodiscard]] DetectorParams make_detector_params(const combiner::PulseTrain& train, double f_s_hz,
                                                  const FilterSettings& settings);

enum class Mode { acquire, confirm, track };

[[nodiscard]] const char* to_string(Mode mode) noexcept;

/// Carry-over needed to continue filtering a stream in the next block: the
/// not-yet-emitted tail, the recent output used for the amplitude threshold,
/// and bookkeeping indices. All indices are global stream positions.
struct StreamContext {
  SampleIndex next_input = 0;
  SampleIndex cursor = 0;
  SampleIndex emitted = 0;
  SampleIndex raw_start = 0;          // global index of raw.front()
  std::deque<double> raw;             // covers [raw_start, next_input)
  std::deque<double> out;             // covers [emitted, next_input)
  std::optional<double> last_output;  // value at emitted - 1
  SampleIndex last_replaced_end = -1;
  std::optional<SampleIndex> first_replaced;
  std::deque<double> history;         // most recent emitted output, at most one period
  std::optional<double> v_threshold;
  /// 8 * MAD of the same history; a candidate must rise by at least this much
  /// in one sample. Unset when v_threshold is fixed by the caller.
  std::optional<double> min_rise;
  SampleIndex since_threshold_update = 0;
  double max_abs = 0.0;
};

struct FilterState {
  Mode mode = Mode::acquire;
  SampleIndex anchor_index = -1;
  int confirmations = 0;
  int misses = 0;
  DetectorParams params;
  StreamContext stream;

  [[nodiscard]] static FilterState initial(const DetectorParams& params);
};

struct FilterReport {
  /// Inclusive index ranges that were replaced by interpolation.
  std::vector<std::pair<SampleIndex, SampleIndex>> replaced_ranges;
  std::optional<double> detection_latency_s;
  int reacquisitions = 0;
};

/// k = |y - y_next| / |y - y_prev| with an eps guard on the denominator:
/// 0 when both differences are below eps, +inf when only the backward one is.
[[nodiscard]] double pollution_ratio(double y_prev, double y, double y_next, double eps);

/// True iff the slice holds at least n_p consecutive samples >= v_threshold.
[[nodiscard]] bool is_pulse_width(std::span<const double> samples, double v_threshold, int n_p);

/// Replaces samples [start, end] by a straight line between their neighbours
/// (or holds the single available neighbour at either end of the series).
[[nodiscard]] SampleSeries interpolate_window(const SampleSeries& series, std::size_t start,
                                              std::size_t end);

/// Fills `window` on the line from `left` to `right`, treating them as the
/// samples just outside it. One side may be missing, in which case the other
/// is held.
void fill_linear(std::span<double> window, std::optional<double> left, std::optional<double> right);

/// Streaming window filter. Samples go in one at a time or in chunks; output
/// comes out in order, a few samples behind the input, until flush().
class WindowFilter {
 public:
  WindowFilter(FilterState state, double sample_rate_hz);

  void push(double sample, std::vector<double>& out);
  void push(std::span<const double> samples, std::vector<double>& out);

  /// Decides every buffered sample with whatever lookahead is left and emits it.
  void flush(std::vector<double>& out);

  [[nodiscard]] const FilterState& state() const noexcept { return state_; }
  /// Everything replaced since construction, in global stream indices.
  [[nodiscard]] const FilterReport& report() const noexcept { return report_; }

 private:
  [[nodiscard]] double raw_at(SampleIndex i) const;
  [[nodiscard]] double& out_at(SampleIndex i);
  [[nodiscard]] double eps() const noexcept;
  [[nodiscard]] bool rising_edge(SampleIndex i, double v_th) const;
  [[nodiscard]] bool is_candidate(SampleIndex i, double v_th) const;
  [[nodiscard]] SampleIndex predicted_center() const noexcept;

  void process(bool final);
  bool step(bool final);
  void evaluate_predicted_window(SampleIndex lo, SampleIndex hi);
  void handle_candidate(SampleIndex i, double v_th);
  void replace(SampleIndex lo, SampleIndex hi);
  void emit_ready(SampleIndex limit, std::vector<double>& out);
  void refresh_threshold();

  FilterState state_;
  FilterReport report_;
  double sample_rate_hz_;
  SampleIndex lookahead_;
  SampleIndex half_window_;
};

struct BlockResult {
  SampleSeries filtered;
  FilterState state;
  /// Ranges are indices into the block that was passed in.
  FilterReport report;
};

/// Filters one block and returns the updated state for the next block of the
/// same stream. The block must span at least two pulse periods.
[[nodiscard]] BlockResult process_block(const SampleSeries& series, FilterState state);

}  // namespace pulselock::filter
