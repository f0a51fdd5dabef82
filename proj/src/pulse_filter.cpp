#include "pulselock/pulse_filter.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <string>

#include "pulselock/errors.hpp"

namespace pulselock::filter {

namespace {

constexpr double kMadMultiplier = 8.0;
constexpr std::size_t kMinHistory = 64;

double median_of(std::vector<double>& v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), mid));
  }
  return m;
}

}  // namespace

void validate(const DetectorParams& p) {
  if (!(p.th > 0.0)) throw ValidationError("filter.th must be > 0");
  if (!(p.beta >= 0.8 && p.beta <= 1.0)) throw ValidationError("filter.beta must lie in [0.8, 1]");
  if (p.eps && !(*p.eps > 0.0)) throw ValidationError("filter.eps must be > 0");
  if (p.n_p < 1) throw ValidationError("filter.n_p must be >= 1");
  if (p.window_width_samples < p.n_p) {
    throw ValidationError("filter window must hold at least n_p samples");
  }
  if (p.period_samples <= p.window_width_samples) {
    throw ValidationError("filter window must be shorter than the pulse period");
  }
  if (p.confirm_count < 1) throw ValidationError("filter.confirm_count must be >= 1");
  if (p.miss_limit < 1) throw ValidationError("filter.miss_limit must be >= 1");
}

DetectorParams make_detector_params(const combiner::PulseTrain& train, double f_s_hz,
                                    const FilterSettings& s) {
  combiner::validate(train);
  if (!(f_s_hz > 0.0)) throw ValidationError("filter sample rate must be > 0");

  DetectorParams p;
  p.th = s.th;
  p.beta = s.beta;
  p.eps = s.eps;
  p.v_threshold = s.v_threshold;
  p.confirm_count = s.confirm_count;
  p.miss_limit = s.miss_limit;

  const double points = s.beta * f_s_hz * train.broadened_width_s;
  p.n_p = std::max(1, static_cast<int>(std::floor(points + 1e-9)));

  const double width_s = s.window_width_s.value_or(10.0 * train.width_s);
  if (!(width_s > 0.0)) throw ValidationError("filter.window_width_s must be > 0");
  p.window_width_samples = std::max(p.n_p, static_cast<int>(std::lround(width_s * f_s_hz)));

  const double period = f_s_hz / train.f_rep_hz;
  const double rounded = std::round(period);
  if (std::abs(period - rounded) > 1e-9 * period || rounded < 1.0) {
    throw ValidationError("filter: AD rate must be an integer multiple of the pulse rate");
  }
  p.period_samples = static_cast<int>(rounded);
  validate(p);
  return p;
}

const char* to_string(Mode mode) noexcept {
  switch (mode) {
    case Mode::acquire: return "ACQUIRE";
    case Mode::confirm: return "CONFIRM";
    case Mode::track: return "TRACK";
  }
  return "?";
}

FilterState FilterState::initial(const DetectorParams& params) {
  validate(params);
  FilterState s;
  s.params = params;
  return s;
}

double pollution_ratio(double y_prev, double y, double y_next, double eps) {
  const double back = std::abs(y - y_prev);
  const double fwd = std::abs(y - y_next);
  if (back < eps) {
    return fwd < eps ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return fwd / back;
}

bool is_pulse_width(std::span<const double> samples, double v_threshold, int n_p) {
  if (n_p < 1) throw InvalidInput("is_pulse_width: n_p must be >= 1");
  if (samples.size() < static_cast<std::size_t>(n_p)) {
    throw InvalidInput("is_pulse_width: slice shorter than n_p");
  }
  int run = 0;
  for (double v : samples) {
    run = v >= v_threshold ? run + 1 : 0;
    if (run >= n_p) return true;
  }
  return false;
}

void fill_linear(std::span<double> window, std::optional<double> left, std::optional<double> right) {
  if (!left && !right) throw InvalidInput("interpolation window has no neighbour on either side");
  if (!left || !right) {
    std::fill(window.begin(), window.end(), left ? *left : *right);
    return;
  }
  const double steps = static_cast<double>(window.size() + 1);
  for (std::size_t k = 0; k < window.size(); ++k) {
    const double f = static_cast<double>(k + 1) / steps;
    window[k] = *left + (*right - *left) * f;
  }
}

SampleSeries interpolate_window(const SampleSeries& series, std::size_t start, std::size_t end) {
  require_valid(series);
  if (start > end || end >= series.size()) {
    throw InvalidInput("interpolate_window: need 0 <= start <= end < length");
  }
  SampleSeries out = series;
  std::optional<double> left;
  std::optional<double> right;
  if (start > 0) left = series.samples[start - 1];
  if (end + 1 < series.size()) right = series.samples[end + 1];
  fill_linear(std::span<double>(out.samples).subspan(start, end - start + 1), left, right);
  return out;
}

// ---------------------------------------------------------------------------

WindowFilter::WindowFilter(FilterState state, double sample_rate_hz)
    : state_(std::move(state)), sample_rate_hz_(sample_rate_hz) {
  validate(state_.params);
  if (!(sample_rate_hz > 0.0)) throw InvalidInput("WindowFilter: sample rate must be > 0");
  const auto& p = state_.params;
  half_window_ = (p.window_width_samples - 1) / 2;
  lookahead_ = 2 * static_cast<SampleIndex>(p.window_width_samples) + p.n_p + 2;
  if (p.v_threshold) state_.stream.v_threshold = p.v_threshold;
}

double WindowFilter::raw_at(SampleIndex i) const {
  return state_.stream.raw[static_cast<std::size_t>(i - state_.stream.raw_start)];
}

double& WindowFilter::out_at(SampleIndex i) {
  return state_.stream.out[static_cast<std::size_t>(i - state_.stream.emitted)];
}

double WindowFilter::eps() const noexcept {
  if (state_.params.eps) return *state_.params.eps;
  const double e = 1e-9 * state_.stream.max_abs;
  return e > 0.0 ? e : DBL_MIN;
}

bool WindowFilter::rising_edge(SampleIndex i, double v_th) const {
  if (i < 2) return false;
  if (raw_at(i) < v_th) return false;
  if (state_.stream.min_rise && raw_at(i) - raw_at(i - 1) < *state_.stream.min_rise) return false;
  return pollution_ratio(raw_at(i - 2), raw_at(i - 1), raw_at(i), eps()) > state_.params.th;
}

bool WindowFilter::is_candidate(SampleIndex i, double v_th) const {
  const auto& s = state_.stream;
  if (!rising_edge(i, v_th)) return false;
  const SampleIndex n_p = state_.params.n_p;
  if (i + n_p > s.next_input) return false;
  std::vector<double> slice;
  slice.reserve(static_cast<std::size_t>(n_p));
  for (SampleIndex k = i; k < i + n_p; ++k) slice.push_back(raw_at(k));
  return is_pulse_width(slice, v_th, state_.params.n_p);
}

SampleIndex WindowFilter::predicted_center() const noexcept {
  return state_.anchor_index +
         static_cast<SampleIndex>(state_.misses + 1) * state_.params.period_samples;
}

void WindowFilter::push(double sample, std::vector<double>& out) {
  auto& s = state_.stream;
  s.raw.push_back(sample);
  s.out.push_back(sample);
  ++s.next_input;
  s.max_abs = std::max(s.max_abs, std::abs(sample));
  process(false);
  emit_ready(s.cursor - half_window_ - 1, out);
}

void WindowFilter::push(std::span<const double> samples, std::vector<double>& out) {
  for (double v : samples) push(v, out);
}

void WindowFilter::flush(std::vector<double>& out) {
  process(true);
  emit_ready(state_.stream.next_input, out);
}

void WindowFilter::process(bool final) {
  while (step(final)) {
  }
}

bool WindowFilter::step(bool final) {
  auto& s = state_.stream;
  const SampleIndex avail = s.next_input;
  if (s.cursor >= avail) return false;

  if (state_.mode != Mode::acquire) {
    const SampleIndex ws = predicted_center() - half_window_;
    const SampleIndex we = ws + state_.params.window_width_samples - 1;
    if (s.cursor >= ws) {
      if (!final && we + 1 >= avail) return false;
      evaluate_predicted_window(std::max(ws, s.cursor), std::min(we, avail - 1));
      s.cursor = std::max(s.cursor, we + 1);
      return true;
    }
  }

  if (!final && s.cursor + lookahead_ >= avail) return false;
  const SampleIndex i = s.cursor;
  if (s.v_threshold && is_candidate(i, *s.v_threshold)) {
    handle_candidate(i, *s.v_threshold);
  } else {
    ++s.cursor;
  }
  return true;
}

void WindowFilter::handle_candidate(SampleIndex i, double v_th) {
  auto& s = state_.stream;
  const auto& p = state_.params;

  // Peak of the above-threshold run that starts at the candidate.
  SampleIndex peak = i;
  for (SampleIndex k = i + 1; k < i + p.window_width_samples && k < s.next_input; ++k) {
    if (raw_at(k) < v_th) break;
    if (raw_at(k) > raw_at(peak)) peak = k;
  }
  const SampleIndex lo = peak - half_window_;
  const SampleIndex hi = lo + p.window_width_samples - 1;
  replace(lo, hi);
  s.cursor = std::max(i + 1, hi + 1);

  if (state_.mode == Mode::track) return;  // stray pulse between predicted windows

  state_.mode = Mode::confirm;
  state_.anchor_index = peak;
  state_.confirmations = 0;
  state_.misses = 0;
}

void WindowFilter::evaluate_predicted_window(SampleIndex lo, SampleIndex hi) {
  const auto& p = state_.params;
  const auto& s = state_.stream;

  bool hit = false;
  SampleIndex peak = lo;
  if (lo <= hi && s.v_threshold) {
    const double v_th = *s.v_threshold;
    bool edge = false;
    std::vector<double> slice;
    for (SampleIndex k = lo; k <= hi; ++k) {
      slice.push_back(raw_at(k));
      if (raw_at(k) > raw_at(peak)) peak = k;
      edge = edge || rising_edge(k, v_th);
    }
    hit = edge && slice.size() >= static_cast<std::size_t>(p.n_p) &&
          is_pulse_width(slice, v_th, p.n_p);
  }

  if (state_.mode == Mode::confirm) {
    if (hit) {
      replace(lo, hi);
      state_.anchor_index = peak;
      if (++state_.confirmations >= p.confirm_count) {
        state_.mode = Mode::track;
        state_.confirmations = p.confirm_count;
      }
    } else {
      state_.mode = Mode::acquire;
      state_.confirmations = 0;
    }
    return;
  }

  // TRACK filters every predicted window, hit or not.
  replace(lo, hi);
  if (hit) {
    state_.anchor_index = peak;
    state_.misses = 0;
    return;
  }
  if (++state_.misses >= p.miss_limit) {
    state_.mode = Mode::acquire;
    state_.misses = 0;
    state_.confirmations = 0;
    ++report_.reacquisitions;
  }
}

void WindowFilter::replace(SampleIndex lo, SampleIndex hi) {
  auto& s = state_.stream;
  lo = std::max({lo, s.last_replaced_end + 1, s.emitted, SampleIndex{0}});
  hi = std::min(hi, s.next_input - 1);
  if (lo > hi) return;

  std::optional<double> left;
  std::optional<double> right;
  if (lo > s.emitted) {
    left = out_at(lo - 1);
  } else if (lo > 0) {
    left = s.last_output;
  }
  if (hi + 1 < s.next_input) right = raw_at(hi + 1);
  if (!left && !right) return;

  const auto begin = static_cast<std::size_t>(lo - s.emitted);
  const auto len = static_cast<std::size_t>(hi - lo + 1);
  std::vector<double> window(len);
  fill_linear(window, left, right);
  std::copy(window.begin(), window.end(), s.out.begin() + static_cast<std::ptrdiff_t>(begin));

  report_.replaced_ranges.emplace_back(lo, hi);
  s.last_replaced_end = hi;
  if (!s.first_replaced) {
    s.first_replaced = lo;
  }
  if (!report_.detection_latency_s) {
    report_.detection_latency_s = static_cast<double>(*s.first_replaced) / sample_rate_hz_;
  }
}

void WindowFilter::emit_ready(SampleIndex limit, std::vector<double>& out) {
  auto& s = state_.stream;
  const auto period = static_cast<std::size_t>(state_.params.period_samples);
  const SampleIndex interval = std::max<SampleIndex>(1, state_.params.period_samples / 8);
  while (s.emitted < limit && !s.out.empty()) {
    const double v = s.out.front();
    s.out.pop_front();
    ++s.emitted;
    out.push_back(v);
    s.last_output = v;

    s.history.push_back(v);
    if (s.history.size() > period) s.history.pop_front();
    ++s.since_threshold_update;
    if (!state_.params.v_threshold &&
        (s.since_threshold_update >= interval ||
         (!s.v_threshold && s.history.size() >= std::min(period, kMinHistory)))) {
      refresh_threshold();
    }
  }

  const SampleIndex keep_from = std::max<SampleIndex>(0, s.cursor - half_window_ - 3);
  while (s.raw_start < keep_from && !s.raw.empty()) {
    s.raw.pop_front();
    ++s.raw_start;
  }
}

void WindowFilter::refresh_threshold() {
  auto& s = state_.stream;
  const auto period = static_cast<std::size_t>(state_.params.period_samples);
  if (s.history.size() < std::min(period, kMinHistory)) return;
  s.since_threshold_update = 0;
  std::vector<double> v(s.history.begin(), s.history.end());
  const double med = median_of(v);
  for (double& x : v) x = std::abs(x - med);
  const double mad = median_of(v);
  s.v_threshold = med + kMadMultiplier * mad;
  s.min_rise = kMadMultiplier * mad;
}

// ---------------------------------------------------------------------------

BlockResult process_block(const SampleSeries& series, FilterState state) {
  require_valid(series);
  validate(state.params);
  const auto min_len = 2 * static_cast<std::size_t>(state.params.period_samples);
  if (series.size() < min_len) {
    throw InvalidInput("process_block: block must span at least two pulse periods (" +
                       std::to_string(min_len) + " samples)");
  }

  const SampleIndex base = state.stream.next_input;
  WindowFilter filter(std::move(state), series.sample_rate_hz);
  BlockResult result;
  result.filtered.sample_rate_hz = series.sample_rate_hz;
  result.filtered.t0_s = series.t0_s;
  result.filtered.samples.reserve(series.size());
  filter.push(series.samples, result.filtered.samples);
  filter.flush(result.filtered.samples);

  result.state = filter.state();
  result.report = filter.report();
  for (auto& [lo, hi] : result.report.replaced_ranges) {
    lo -= base;
    hi -= base;
  }
  if (result.state.stream.first_replaced) {
    result.report.detection_latency_s =
        static_cast<double>(*result.state.stream.first_replaced) / series.sample_rate_hz;
  }
  return result;
}

}  // namespace pulselock::filter
