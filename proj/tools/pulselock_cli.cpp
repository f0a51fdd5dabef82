// pulselock: run pulsed coherent-combining scenarios and write their data files.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pulselock/acceptance.hpp"
#include "pulselock/csv_io.hpp"
#include "pulselock/errors.hpp"
#include "pulselock/experiment.hpp"

namespace fs = std::filesystem;
using namespace pulselock;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitAcceptance = 3;
constexpr int kExitIo = 4;

struct AcceptanceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

waveform::Taper parse_taper(const std::string& s) {
  if (s == "none") return waveform::Taper::none;
  if (s == "hann") return waveform::Taper::hann;
  throw InvalidInput("taper must be none or hann");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (item.empty()) throw InvalidInput("empty entry in --seeds");
    try {
      const auto dash = item.find('-');
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(item));
      } else {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw InvalidInput("seed range " + item + " runs backwards");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw InvalidInput("cannot parse seed list entry '" + item + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return seeds;
}

ScenarioConfig load_with_seed(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto config = load_scenario(path);
  if (seed) config = experiment::with_seed(std::move(config), *seed);
  validate(config);
  return config;
}

// Checks behind `run --assert`.
void assert_run(experiment::RunKind kind, const experiment::RunSummary& s, const ScenarioConfig& config) {
  std::vector<std::string> failures;
  switch (kind) {
    case experiment::RunKind::closed_loop:
      if (!s.final_intensity_ratio || *s.final_intensity_ratio < 0.9) {
        failures.push_back("final_intensity_ratio below 0.9");
      }
      if (!s.lock_time_s || *s.lock_time_s > 1e-3) failures.push_back("no lock within 1 ms");
      break;
    case experiment::RunKind::filter_only:
      if (!s.suppression_8_12k_db || *s.suppression_8_12k_db < 40.0) {
        failures.push_back("8-12 kHz suppression below 40 dB");
      }
      if (!s.suppression_0_500k_db || *s.suppression_0_500k_db < 20.0) {
        failures.push_back("0-500 kHz suppression below 20 dB");
      }
      if (!s.detection_latency_s || *s.detection_latency_s > 1e-4) {
        failures.push_back("detection latency above 0.1 ms");
      }
      break;
    case experiment::RunKind::open_loop: {
      // Pulse lines near f_rep must stand above the pulse-free noise level.
      if (!config.pulse_train) break;
      auto quiet = config;
      quiet.pulse_train->peak = 0.0;
      const auto noisy = waveform::power_spectrum_db(combiner::simulate_open_loop(quiet), waveform::Taper::hann);
      const auto loud = waveform::power_spectrum_db(combiner::simulate_open_loop(config), waveform::Taper::hann);
      const double f = config.pulse_train->f_rep_hz;
      const double df = noisy.freq_resolution_hz;
      const double noise = waveform::peak_in_band(noisy, df, 0.5 * f).level_db;
      const double line = waveform::peak_in_band(loud, 0.8 * f, std::min(1.2 * f, loud.nyquist_hz())).level_db;
      if (!(line > noise)) failures.push_back("pulse line does not exceed the noise level");
      break;
    }
  }
  if (!failures.empty()) {
    std::string msg = "assertion failed:";
    for (const auto& f : failures) msg += " " + f + ";";
    throw AcceptanceFailure(msg);
  }
}

void print_summary(const experiment::RunSummary& s, const fs::path& dir) {
  std::printf("%s run, seed %llu -> %s\n", experiment::to_string(s.kind),
              static_cast<unsigned long long>(s.seed), dir.string().c_str());
  if (s.lock_time_s) std::printf("  lock_time_s            %.6g\n", *s.lock_time_s);
  if (s.final_intensity_ratio) std::printf("  final_intensity_ratio  %.6f\n", *s.final_intensity_ratio);
  if (s.suppression_8_12k_db) std::printf("  suppression 8-12 kHz   %.2f dB\n", *s.suppression_8_12k_db);
  if (s.suppression_0_500k_db) std::printf("  suppression 0-500 kHz  %.2f dB\n", *s.suppression_0_500k_db);
  if (s.detection_latency_s) std::printf("  detection_latency_s    %.6g\n", *s.detection_latency_s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulsed coherent beam combining simulator"};
  app.require_subcommand(1);

  // synth-noise
  auto* synth = app.add_subcommand("synth-noise", "Draw a random phase-noise model and sample it");
  int n_components = noise::kDefaultComponents;
  double band = noise::kDefaultBandLimitHz;
  double max_amp = noise::kDefaultMaxAmplitudeRad;
  double sigma = 0.0;
  std::uint64_t synth_seed = 1;
  double synth_duration = 2e-3;
  double synth_rate = 10e6;
  std::string synth_out = "noise";
  synth->add_option("--components", n_components, "Number of sinusoids")->capture_default_str();
  synth->add_option("--band", band, "Band limit in Hz")->capture_default_str();
  synth->add_option("--amp", max_amp, "Sum of sinusoid amplitudes in rad")->capture_default_str();
  synth->add_option("--sigma", sigma, "White noise standard deviation in rad")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Seed")->capture_default_str();
  synth->add_option("--duration", synth_duration, "Duration in s")->capture_default_str();
  synth->add_option("--rate", synth_rate, "Sample rate in Hz")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Run one scenario and write its artifacts");
  std::string kind_text = "closed-loop";
  std::string config_path;
  std::optional<std::uint64_t> run_seed;
  std::string run_out = "run";
  bool run_assert = false;
  run->add_option("--kind", kind_text, "open-loop, filter-only or closed-loop")
      ->check(CLI::IsMember({"open-loop", "filter-only", "closed-loop"}))
      ->capture_default_str();
  run->add_option("--config", config_path, "Scenario JSON")->required();
  run->add_option("--seed", run_seed, "Override the config seed");
  run->add_option("--out", run_out, "Output directory")->capture_default_str();
  run->add_flag("--assert", run_assert, "Exit with status 3 if the run misses its targets");

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "Power spectrum of a time-series CSV");
  std::string spec_in;
  std::string spec_out;
  std::string taper = "hann";
  spectrum->add_option("--in", spec_in, "Input t_s,value CSV")->required();
  spectrum->add_option("--out", spec_out, "Output freq_hz,level_db CSV")->required();
  spectrum->add_option("--taper", taper, "none or hann")->check(CLI::IsMember({"none", "hann"}))->capture_default_str();

  // compare
  auto* compare = app.add_subcommand("compare", "Peak level drop between two spectra in a band");
  std::string before_path;
  std::string after_path;
  std::vector<double> band_edges;
  compare->add_option("--before", before_path, "Spectrum CSV before")->required();
  compare->add_option("--after", after_path, "Spectrum CSV after")->required();
  compare->add_option("--band", band_edges, "Band edges f_lo f_hi in Hz")->expected(2)->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one scenario over many seeds in parallel");
  std::string sweep_kind = "closed-loop";
  std::string sweep_config;
  std::string seeds_text = "1-10";
  std::string sweep_out = "sweep";
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  sweep_cmd->add_option("--kind", sweep_kind, "open-loop, filter-only or closed-loop")
      ->check(CLI::IsMember({"open-loop", "filter-only", "closed-loop"}))
      ->capture_default_str();
  sweep_cmd->add_option("--config", sweep_config, "Scenario JSON")->required();
  sweep_cmd->add_option("--seeds", seeds_text, "Seed list, e.g. 1-10 or 3,5,8")->capture_default_str();
  sweep_cmd->add_option("--threads", threads, "Concurrent runs")->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "Output root")->capture_default_str();

  // assert-paper
  auto* accept = app.add_subcommand("assert-paper", "Run the acceptance suite");
  std::string accept_work;
  accept->add_option("--work", accept_work, "Scratch directory for the determinism check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*synth) {
      const auto model = noise::random_noise_model(n_components, band, max_amp, sigma, synth_seed);
      const auto series = noise::synth_phase_noise(model, synth_duration, synth_rate);
      const fs::path dir = experiment::resolve_output(synth_out);
      fs::create_directories(dir);
      csv::write_series(dir / "noise.csv", series, "rad");
      csv::write_spectrum(dir / "noise_spectrum.csv", waveform::power_spectrum_db(series, waveform::Taper::hann));
      nlohmann::ordered_json j;
      nlohmann::ordered_json comps = nlohmann::ordered_json::array();
      for (const auto& c : model.components) {
        comps.push_back({{"amplitude_rad", c.amplitude_rad}, {"freq_hz", c.freq_hz}, {"phase_rad", c.phase_rad}});
      }
      j["components"] = comps;
      j["white_sigma_rad"] = model.white_sigma_rad;
      j["seed"] = model.seed;
      csv::write_text(dir / "noise_model.json", j.dump(2) + "\n");
      std::printf("wrote %zu samples to %s\n", series.size(), dir.string().c_str());
    } else if (*run) {
      const auto kind = experiment::parse_run_kind(kind_text);
      const auto config = load_with_seed(config_path, run_seed);
      const fs::path dir = experiment::resolve_output(run_out);
      const auto summary = experiment::run_scenario(kind, config, dir);
      print_summary(summary, dir);
      if (run_assert) assert_run(kind, summary, config);
    } else if (*spectrum) {
      const auto series = csv::read_series(spec_in);
      const fs::path out = experiment::resolve_output(spec_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      csv::write_spectrum(out, waveform::power_spectrum_db(series, parse_taper(taper)));
    } else if (*compare) {
      const auto before = csv::read_spectrum(before_path);
      const auto after = csv::read_spectrum(after_path);
      const double delta = experiment::compare_spectra(before, after, band_edges[0], band_edges[1]);
      std::printf("%s\n", csv::format_double(delta).c_str());
    } else if (*sweep_cmd) {
      const auto kind = experiment::parse_run_kind(sweep_kind);
      const auto base = load_with_seed(sweep_config, std::nullopt);
      const auto seeds = parse_seeds(seeds_text);
      const fs::path root = experiment::resolve_output(sweep_out);
      const auto results = experiment::sweep(kind, base, seeds, root, threads);
      std::string table = "seed,lock_time_s,final_intensity_ratio,suppression_8_12k_db,detection_latency_s\n";
      auto cell = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
      for (const auto& r : results) {
        table += std::to_string(r.seed) + "," + cell(r.lock_time_s) + "," + cell(r.final_intensity_ratio) + "," +
                 cell(r.suppression_8_12k_db) + "," + cell(r.detection_latency_s) + "\n";
      }
      csv::write_text(root / "sweep_summary.csv", table);
      std::fputs(table.c_str(), stdout);
    } else if (*accept) {
      acceptance::Options options;
      if (!accept_work.empty()) options.work_dir = experiment::resolve_output(accept_work);
      bool all = true;
      for (const auto& r : acceptance::run_all(options)) {
        std::printf("%s\n", acceptance::format_line(r).c_str());
        if (r.id > 0) all = all && r.passed;
      }
      if (!all) return kExitAcceptance;
    }
  } catch (const AcceptanceFailure& e) {
    std::cerr << e.what() << "\n";
    return kExitAcceptance;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
