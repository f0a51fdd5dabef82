#include "pulselock/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include "json.hpp"
#include "pulselock/counter_rng.hpp"
#include "pulselock/errors.hpp"

namespace pulselock {

using Json = nlohmann::ordered_json;

namespace {

void reject_unknown(const Json& obj, std::string_view where,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ValidationError(std::string(where) + ": unknown field '" + key + "'");
  }
}

template <typename T>
void read_opt(const Json& obj, const char* key, T& target, std::string_view where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string(where) + "." + key + " has the wrong type");
  }
}

bool enabled_flag(const Json& obj, std::string_view where) {
  bool enabled = true;
  read_opt(obj, "enabled", enabled, where);
  return enabled;
}

noise::NoiseModel noise_model_from(const Json& j, std::string_view where) {
  reject_unknown(j, where, {"components", "white_sigma_rad", "seed"});
  noise::NoiseModel m;
  read_opt(j, "white_sigma_rad", m.white_sigma_rad, where);
  read_opt(j, "seed", m.seed, where);
  if (j.contains("components")) {
    const auto& list = j.at("components");
    if (!list.is_array()) throw ValidationError(std::string(where) + ".components must be a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string w = std::string(where) + ".components[" + std::to_string(i) + "]";
      reject_unknown(list[i], w, {"amplitude_rad", "freq_hz", "phase_rad"});
      noise::SinusoidComponent c;
      read_opt(list[i], "amplitude_rad", c.amplitude_rad, w);
      read_opt(list[i], "freq_hz", c.freq_hz, w);
      read_opt(list[i], "phase_rad", c.phase_rad, w);
      m.components.push_back(c);
    }
  }
  return m;
}

Json noise_model_to(const noise::NoiseModel& m) {
  Json comps = Json::array();
  for (const auto& c : m.components) {
    comps.push_back({{"amplitude_rad", c.amplitude_rad}, {"freq_hz", c.freq_hz}, {"phase_rad", c.phase_rad}});
  }
  return {{"components", comps}, {"white_sigma_rad", m.white_sigma_rad}, {"seed", m.seed}};
}

combiner::PulseShape shape_from(const std::string& s) {
  if (s == "rectangular") return combiner::PulseShape::rectangular;
  if (s == "gaussian") return combiner::PulseShape::gaussian;
  throw ValidationError("pulse_train.shape must be \"rectangular\" or \"gaussian\"");
}

}  // namespace

std::size_t ScenarioConfig::ad_samples() const {
  return static_cast<std::size_t>(std::max<long long>(1, std::llround(duration_s * ad_rate_hz)));
}

std::int64_t ScenarioConfig::oversampling() const {
  return combiner::integer_ratio(internal_rate_hz, ad_rate_hz);
}

double ScenarioConfig::i_max() const {
  double sum = 0.0;
  for (const auto& b : beams) sum += b.amplitude;
  return detector.scale() * sum * sum;
}

filter::DetectorParams ScenarioConfig::detector_params() const {
  if (!pulse_train) throw ValidationError("filter needs a pulse_train to size its windows");
  return filter::make_detector_params(*pulse_train, ad_rate_hz, filter.value_or(filter::FilterSettings{}));
}

void resolve_noise(ScenarioConfig& config) {
  for (std::size_t m = 0; m < config.random_noise.size() && m < config.beams.size(); ++m) {
    const auto& spec = config.random_noise[m];
    if (!spec) continue;
    config.beams[m].noise_model =
        noise::random_noise_model(spec->n_components, spec->band_limit_hz, spec->max_amplitude_rad,
                                  spec->white_sigma_rad, rng::derive_seed(config.seed, m));
  }
}

void validate(const ScenarioConfig& c) {
  if (c.beams.empty()) throw ValidationError("beams must list at least one beam");
  if (!(c.ad_rate_hz > 0.0)) throw ValidationError("ad_rate_hz must be > 0");
  if (!(c.internal_rate_hz >= c.ad_rate_hz)) {
    throw ValidationError("internal_rate_hz must be >= ad_rate_hz");
  }
  try {
    (void)c.oversampling();
  } catch (const InvalidInput&) {
    throw ValidationError("internal_rate_hz must be an integer multiple of ad_rate_hz");
  }
  if (!(c.detector.responsivity > 0.0)) throw ValidationError("detector.responsivity must be > 0");
  if (!(c.detector.area > 0.0)) throw ValidationError("detector.area must be > 0");
  if (!(c.duration_s > 0.0) || !std::isfinite(c.duration_s)) {
    throw ValidationError("duration_s must be a positive number");
  }
  if (c.duration_s * c.ad_rate_hz < 1.0) {
    throw ValidationError("duration_s must cover at least one AD sample");
  }

  for (std::size_t m = 0; m < c.beams.size(); ++m) {
    const auto& b = c.beams[m];
    const std::string name = "beams[" + std::to_string(m) + "]";
    if (!(b.amplitude >= 0.0)) throw ValidationError(name + ".amplitude must be >= 0");
    if (!std::isfinite(b.initial_phase_rad)) {
      throw ValidationError(name + ".initial_phase_rad must be finite");
    }
    try {
      noise::validate(b.noise_model, c.noise_limits);
    } catch (const InvalidInput& e) {
      throw ValidationError(name + ".noise: " + e.what());
    }
    if (!(c.ad_rate_hz > 2.0 * b.noise_model.max_frequency_hz())) {
      throw ValidationError(name + ".noise: AD rate must exceed twice the highest noise frequency");
    }
  }

  if (c.pulse_train) {
    combiner::validate(*c.pulse_train);
    if (c.duration_s < 2.0 * c.pulse_train->period_s()) {
      throw ValidationError("duration_s must span at least two pulse periods");
    }
  }
  if (c.filter) {
    (void)c.detector_params();
  }
  if (c.controller) {
    if (c.controller->tones.size() != c.beams.size()) {
      throw ValidationError("controller.tones must have one entry per beam");
    }
    dither::validate(*c.controller, c.ad_rate_hz, c.pulse_train ? c.pulse_train->f_rep_hz : 0.0);
    if (c.ad_samples() < dither::integration_samples(*c.controller, c.ad_rate_hz)) {
      throw ValidationError("duration_s must span at least one integration period");
    }
  }
}

ScenarioConfig scenario_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, "config",
                 {"seed", "duration_s", "ad_rate_hz", "internal_rate_hz", "detector", "noise_limits",
                  "pulse_train", "beams", "filter", "controller"});

  ScenarioConfig c;
  read_opt(j, "seed", c.seed, "config");
  read_opt(j, "duration_s", c.duration_s, "config");
  read_opt(j, "ad_rate_hz", c.ad_rate_hz, "config");
  read_opt(j, "internal_rate_hz", c.internal_rate_hz, "config");

  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    reject_unknown(d, "detector", {"responsivity", "area"});
    read_opt(d, "responsivity", c.detector.responsivity, "detector");
    read_opt(d, "area", c.detector.area, "detector");
  }
  if (j.contains("noise_limits")) {
    const auto& n = j.at("noise_limits");
    reject_unknown(n, "noise_limits", {"band_limit_hz", "max_amplitude_rad"});
    read_opt(n, "band_limit_hz", c.noise_limits.band_limit_hz, "noise_limits");
    read_opt(n, "max_amplitude_rad", c.noise_limits.max_amplitude_rad, "noise_limits");
  }
  if (j.contains("pulse_train") && !j.at("pulse_train").is_null()) {
    const auto& p = j.at("pulse_train");
    reject_unknown(p, "pulse_train",
                   {"f_rep_hz", "width_s", "broadened_width_s", "peak", "cw_background",
                    "first_pulse_time_s", "shape"});
    combiner::PulseTrain t;
    read_opt(p, "f_rep_hz", t.f_rep_hz, "pulse_train");
    read_opt(p, "width_s", t.width_s, "pulse_train");
    t.broadened_width_s = t.width_s;
    read_opt(p, "broadened_width_s", t.broadened_width_s, "pulse_train");
    read_opt(p, "peak", t.peak, "pulse_train");
    read_opt(p, "cw_background", t.cw_background, "pulse_train");
    read_opt(p, "first_pulse_time_s", t.first_pulse_time_s, "pulse_train");
    std::string shape = "rectangular";
    read_opt(p, "shape", shape, "pulse_train");
    t.shape = shape_from(shape);
    c.pulse_train = t;
  }

  if (!j.contains("beams") || !j.at("beams").is_array()) {
    throw ValidationError("beams must be a list of beam objects");
  }
  const auto& beams = j.at("beams");
  for (std::size_t m = 0; m < beams.size(); ++m) {
    const std::string w = "beams[" + std::to_string(m) + "]";
    const auto& b = beams[m];
    reject_unknown(b, w, {"amplitude", "initial_phase_rad", "noise_model", "noise_random"});
    if (b.contains("noise_model") && b.contains("noise_random")) {
      throw ValidationError(w + ": give either noise_model or noise_random, not both");
    }
    combiner::BeamConfig beam;
    read_opt(b, "amplitude", beam.amplitude, w);
    read_opt(b, "initial_phase_rad", beam.initial_phase_rad, w);
    std::optional<RandomNoiseSpec> random;
    if (b.contains("noise_model")) {
      beam.noise_model = noise_model_from(b.at("noise_model"), w + ".noise_model");
    } else if (b.contains("noise_random")) {
      const auto& r = b.at("noise_random");
      const std::string wr = w + ".noise_random";
      reject_unknown(r, wr, {"n_components", "band_limit_hz", "max_amplitude_rad", "white_sigma_rad"});
      RandomNoiseSpec spec;
      read_opt(r, "n_components", spec.n_components, wr);
      read_opt(r, "band_limit_hz", spec.band_limit_hz, wr);
      read_opt(r, "max_amplitude_rad", spec.max_amplitude_rad, wr);
      read_opt(r, "white_sigma_rad", spec.white_sigma_rad, wr);
      if (spec.n_components < 0 || !(spec.band_limit_hz > 0.0) || !(spec.max_amplitude_rad >= 0.0) ||
          !(spec.white_sigma_rad >= 0.0)) {
        throw ValidationError(wr + ": need n_components >= 0, band_limit_hz > 0, amplitudes >= 0");
      }
      random = spec;
    }
    c.beams.push_back(beam);
    c.random_noise.push_back(random);
  }

  if (j.contains("filter") && !j.at("filter").is_null() && enabled_flag(j.at("filter"), "filter")) {
    const auto& f = j.at("filter");
    reject_unknown(f, "filter",
                   {"enabled", "th", "beta", "window_width_s", "confirm_count", "miss_limit",
                    "v_threshold", "eps"});
    filter::FilterSettings s;
    read_opt(f, "th", s.th, "filter");
    read_opt(f, "beta", s.beta, "filter");
    read_opt(f, "confirm_count", s.confirm_count, "filter");
    read_opt(f, "miss_limit", s.miss_limit, "filter");
    if (f.contains("window_width_s")) s.window_width_s = f.at("window_width_s").get<double>();
    if (f.contains("v_threshold")) s.v_threshold = f.at("v_threshold").get<double>();
    if (f.contains("eps")) s.eps = f.at("eps").get<double>();
    c.filter = s;
  }

  if (j.contains("controller") && !j.at("controller").is_null() &&
      enabled_flag(j.at("controller"), "controller")) {
    const auto& k = j.at("controller");
    reject_unknown(k, "controller",
                   {"enabled", "tones", "integration_period_s", "gain", "reference_beam"});
    dither::DitherConfig d;
    read_opt(k, "integration_period_s", d.integration_period_s, "controller");
    read_opt(k, "gain", d.gain, "controller");
    read_opt(k, "reference_beam", d.reference_beam, "controller");
    if (!k.contains("tones") || !k.at("tones").is_array()) {
      throw ValidationError("controller.tones must be a list");
    }
    for (std::size_t m = 0; m < k.at("tones").size(); ++m) {
      const auto& t = k.at("tones")[m];
      const std::string w = "controller.tones[" + std::to_string(m) + "]";
      reject_unknown(t, w, {"freq_hz", "amp_rad"});
      dither::DitherTone tone;
      read_opt(t, "freq_hz", tone.freq_hz, w);
      read_opt(t, "amp_rad", tone.amp_rad, w);
      d.tones.push_back(tone);
    }
    c.controller = d;
  }

  resolve_noise(c);
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["duration_s"] = c.duration_s;
  j["ad_rate_hz"] = c.ad_rate_hz;
  j["internal_rate_hz"] = c.internal_rate_hz;
  j["detector"] = {{"responsivity", c.detector.responsivity}, {"area", c.detector.area}};
  j["noise_limits"] = {{"band_limit_hz", c.noise_limits.band_limit_hz},
                       {"max_amplitude_rad", c.noise_limits.max_amplitude_rad}};
  if (c.pulse_train) {
    const auto& t = *c.pulse_train;
    j["pulse_train"] = {{"f_rep_hz", t.f_rep_hz},
                        {"width_s", t.width_s},
                        {"broadened_width_s", t.broadened_width_s},
                        {"peak", t.peak},
                        {"cw_background", t.cw_background},
                        {"first_pulse_time_s", t.first_pulse_time_s},
                        {"shape", t.shape == combiner::PulseShape::rectangular ? "rectangular" : "gaussian"}};
  } else {
    j["pulse_train"] = nullptr;
  }

  Json beams = Json::array();
  for (std::size_t m = 0; m < c.beams.size(); ++m) {
    const auto& b = c.beams[m];
    Json jb = {{"amplitude", b.amplitude}, {"initial_phase_rad", b.initial_phase_rad}};
    const bool random = m < c.random_noise.size() && c.random_noise[m].has_value();
    if (random) {
      const auto& r = *c.random_noise[m];
      jb["noise_random"] = {{"n_components", r.n_components},
                            {"band_limit_hz", r.band_limit_hz},
                            {"max_amplitude_rad", r.max_amplitude_rad},
                            {"white_sigma_rad", r.white_sigma_rad}};
    } else {
      jb["noise_model"] = noise_model_to(b.noise_model);
    }
    beams.push_back(jb);
  }
  j["beams"] = beams;

  if (c.filter) {
    const auto& f = *c.filter;
    Json jf = {{"enabled", true},       {"th", f.th},
               {"beta", f.beta},        {"confirm_count", f.confirm_count},
               {"miss_limit", f.miss_limit}};
    if (f.window_width_s) jf["window_width_s"] = *f.window_width_s;
    if (f.v_threshold) jf["v_threshold"] = *f.v_threshold;
    if (f.eps) jf["eps"] = *f.eps;
    j["filter"] = jf;
  } else {
    j["filter"] = {{"enabled", false}};
  }

  if (c.controller) {
    const auto& d = *c.controller;
    Json tones = Json::array();
    for (const auto& t : d.tones) tones.push_back({{"freq_hz", t.freq_hz}, {"amp_rad", t.amp_rad}});
    j["controller"] = {{"enabled", true},
                       {"tones", tones},
                       {"integration_period_s", d.integration_period_s},
                       {"gain", d.gain},
                       {"reference_beam", d.reference_beam}};
  } else {
    j["controller"] = {{"enabled", false}};
  }
  return j.dump(2) + "\n";
}

ScenarioConfig default_scenario() {
  ScenarioConfig c;
  c.pulse_train = combiner::PulseTrain{};
  c.filter = filter::FilterSettings{};
  c.filter->window_width_s = 100e-9;

  const double initial_phases[2] = {0.0, 2.0};
  for (double phi : initial_phases) {
    combiner::BeamConfig b;
    b.initial_phase_rad = phi;
    c.beams.push_back(b);
    c.random_noise.push_back(RandomNoiseSpec{noise::kDefaultComponents, noise::kDefaultBandLimitHz,
                                             noise::kDefaultMaxAmplitudeRad, 0.003});
  }

  dither::DitherConfig d;
  d.tones = {{0.0, 0.0}, {937.5e3, 0.2}};
  d.integration_period_s = 3.2e-6;
  d.gain = 2.5;
  d.reference_beam = 0;
  c.controller = d;

  resolve_noise(c);
  return c;
}

}  // namespace pulselock
