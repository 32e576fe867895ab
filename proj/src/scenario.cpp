#include "ftpl/scenario.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "ftpl/errors.hpp"
#include "ftpl/random.hpp"
#include "ftpl/text_io.hpp"
#include "json.hpp"

namespace ftpl {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Settings -> module types

EmitterSpectrum EmitterSettings::spectrum() const {
  EmitterSpectrum s = build_divacancy_spectrum(
      zpl_nm, zpl_fwhm_hz, psb_center_nm.value_or(default_psb_center_nm(zpl_nm)), psb_fwhm_hz,
      zpl_to_psb_ratio, brightness_cps);
  s.name = name;
  return s;
}

ScanSchedule ScheduleSettings::schedule() const {
  return ScanSchedule::uniform(start_mm, step_mm, n_steps, dwell_s, motor_overhead_s);
}

TimeResolvedSetup TimeResolvedSettings::setup(const NvRateModel& nv, const TwinsModel& twins,
                                              const PhotonCounterModel& counter,
                                              std::uint64_t seed) const {
  TimeResolvedSetup s = desk_scale_setup();
  s.nv = nv;
  s.twins = twins;
  s.n_reps = n_reps;
  s.bin_s = bin_s;
  s.n_bins = n_bins;
  s.mode = mode;
  s.seed = seed;
  s.max_sequence_time_s = max_sequence_time_s;
  s.schedule = ScanSchedule::uniform(twins.zero_delay_position_mm, step_mm, n_steps,
                                     std::max(1e-12, double(n_reps) * s.seq0.period()));
  for (auto& ch : s.channels) {
    ch.counter = counter;
    for (auto& comp : ch.components) {
      if (ch.name == "VIS") comp.profile.total_brightness = vis_brightness_cps;
      else if (comp.source == NvEmission::Singlet) comp.profile.total_brightness = ir_line_brightness_cps;
      else comp.profile.total_brightness = ir_tail_brightness_cps;
    }
  }
  return s;
}

std::uint64_t ScenarioConfig::seed() const {
  if (!master_seed) throw ConfigError("master_seed: required for sampling scenarios");
  return *master_seed;
}

WavelengthWindow ScenarioConfig::peak_window() const {
  return analysis.peak_window.value_or(WavelengthWindow{emitter.zpl_nm - 5.0, emitter.zpl_nm + 5.0});
}

EmitterLibrary ScenarioConfig::library() const {
  return analysis.library_path ? load_emitter_library(*analysis.library_path)
                               : default_emitter_library();
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

class Issues {
 public:
  void add(const std::string& where, const std::string& what) { list_.push_back(where + ": " + what); }
  bool empty() const { return list_.empty(); }
  std::string text() const {
    std::string out = "invalid configuration:";
    for (const auto& l : list_) out += "\n  " + l;
    return out;
  }

 private:
  std::vector<std::string> list_;
};

// Reads one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json* node, std::string path, Issues& issues)
      : node_(node), path_(std::move(path)), issues_(issues) {
    if (node_ && !node_->is_object()) {
      issues_.add(path_, "expected an object");
      node_ = nullptr;
    }
  }

  const json* find(const char* key) {
    seen_.insert(key);
    if (!node_) return nullptr;
    auto it = node_->find(key);
    return it == node_->end() || it->is_null() ? nullptr : &*it;
  }

  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void number(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_number()) out = v->get<double>();
      else issues_.add(where(key), "expected a number");
    }
  }
  void number(const char* key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_number()) out = v->get<double>();
      else issues_.add(where(key), "expected a number");
    }
  }
  template <typename Int>
  void integer(const char* key, Int& out) {
    if (const json* v = find(key)) {
      if (v->is_number() && v->get<double>() == std::floor(v->get<double>()) &&
          std::abs(v->get<double>()) < 9.0e15)
        out = Int(v->get<double>());
      else issues_.add(where(key), "expected an integer");
    }
  }
  void text(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (v->is_string()) out = v->get<std::string>();
      else issues_.add(where(key), "expected a string");
    }
  }
  void numbers(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) {
        issues_.add(where(key), "expected an array of numbers");
        return;
      }
      std::vector<double> tmp;
      for (const auto& e : *v) {
        if (!e.is_number()) {
          issues_.add(where(key), "expected an array of numbers");
          return;
        }
        tmp.push_back(e.get<double>());
      }
      out = tmp;
    }
  }
  void window(const char* key, std::optional<WavelengthWindow>& out) {
    std::vector<double> pair;
    numbers(key, pair);
    if (pair.empty()) return;
    if (pair.size() != 2) issues_.add(where(key), "expected [lo_nm, hi_nm]");
    else out = WavelengthWindow{pair[0], pair[1]};
  }
  template <typename Enum>
  void choice(const char* key, Enum& out, std::initializer_list<std::pair<const char*, Enum>> options) {
    std::string s;
    text(key, s);
    if (s.empty()) return;
    std::string allowed;
    for (const auto& [name, value] : options) {
      if (s == name) {
        out = value;
        return;
      }
      allowed += std::string(allowed.empty() ? "" : "|") + name;
    }
    issues_.add(where(key), "expected one of " + allowed);
  }

  Section child(const char* key) { return Section(find(key), where(key), issues_); }
  Issues& issues() { return issues_; }

  // Unknown keys are configuration errors, named with their module path.
  void finish() {
    if (!node_) return;
    for (auto it = node_->begin(); it != node_->end(); ++it)
      if (!seen_.count(it.key())) issues_.add(where(it.key().c_str()), "unknown key");
  }

 private:
  const json* node_;
  std::string path_;
  Issues& issues_;
  std::set<std::string> seen_;
};

void table_or_number(Section& sec, const char* key, double& constant, std::vector<double>& xs,
                     std::vector<double>& ys) {
  const json* v = sec.find(key);
  if (!v) return;
  if (v->is_number()) {
    constant = v->get<double>();
    return;
  }
  Section t(v, sec.where(key), sec.issues());
  t.numbers("wavelengths_nm", xs);
  t.numbers("values", ys);
  t.finish();
}

template <typename T>
void check(Issues& issues, const std::string& module, const T& value) {
  try {
    validate(value);
  } catch (const Error& e) {
    issues.add(module, e.what());
  }
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
}

ScenarioConfig parse_config_json(const json& doc) {
  Issues issues;
  ScenarioConfig c;
  Section top(&doc, "", issues);
  top.text("pipeline", c.pipeline);
  top.text("description", c.description);
  if (const json* v = top.find("master_seed")) {
    if (v->is_number_unsigned()) c.master_seed = v->get<std::uint64_t>();
    else if (v->is_number_integer() && v->get<std::int64_t>() >= 0) c.master_seed = std::uint64_t(v->get<std::int64_t>());
    else issues.add("master_seed", "expected a non-negative integer");
  }

  {
    Section s = top.child("emitter");
    s.text("name", c.emitter.name);
    s.number("zpl_nm", c.emitter.zpl_nm);
    s.number("zpl_fwhm_hz", c.emitter.zpl_fwhm_hz);
    s.number("psb_center_nm", c.emitter.psb_center_nm);
    s.number("psb_fwhm_hz", c.emitter.psb_fwhm_hz);
    s.number("zpl_to_psb_ratio", c.emitter.zpl_to_psb_ratio);
    s.number("brightness_cps", c.emitter.brightness_cps);
    s.finish();
  }
  {
    Section s = top.child("grid");
    s.number("step_hz", c.grid_step_hz);
    s.finish();
  }
  {
    Section s = top.child("camera");
    table_or_number(s, "eta", c.camera.eta.constant, c.camera.eta.wavelengths_nm, c.camera.eta.values);
    s.number("gain", c.camera.gain);
    s.number("dark_rate", c.camera.dark_rate);
    s.number("readout_noise", c.camera.readout_noise);
    s.number("well_capacity", c.camera.well_capacity);
    s.finish();
  }
  {
    Section s = top.child("grating");
    s.number("lambda_start_nm", c.grating.lambda_start);
    s.number("lambda_end_nm", c.grating.lambda_end);
    s.integer("n_pixels", c.grating.n_pixels);
    s.number("total_time_s", c.grating_total_time_s);
    s.finish();
  }
  {
    Section s = top.child("counter");
    table_or_number(s, "eta", c.counter.eta.constant, c.counter.eta.wavelengths_nm, c.counter.eta.values);
    s.number("dark_cps", c.counter.dark_cps);
    s.number("saturation_cps", c.counter.saturation_cps);
    s.number("jitter_fwhm_ps", c.counter.jitter_fwhm_ps);
    s.finish();
  }
  {
    Section s = top.child("twins");
    s.number("apex_angle_deg", c.twins.apex_angle_deg);
    s.number("travel_max_mm", c.twins.travel_max_mm);
    table_or_number(s, "birefringence", c.twins.birefringence.constant,
                    c.twins.birefringence.wavelengths_nm, c.twins.birefringence.values);
    s.number("visibility", c.twins.visibility);
    s.number("zero_delay_position_mm", c.twins.zero_delay_position_mm);
    s.finish();
  }
  {
    Section s = top.child("schedule");
    s.number("start_mm", c.schedule.start_mm);
    s.number("step_mm", c.schedule.step_mm);
    s.integer("n_steps", c.schedule.n_steps);
    s.number("dwell_s", c.schedule.dwell_s);
    s.number("motor_overhead_s", c.schedule.motor_overhead_s);
    s.finish();
  }
  {
    Section s = top.child("reconstruction");
    s.choice("window", c.reconstruction.window,
             {{"none", Window::None}, {"hann", Window::Hann}, {"triangular", Window::Triangular}});
    s.integer("zero_pad_factor", c.reconstruction.zero_pad_factor);
    s.choice("dc_removal", c.reconstruction.dc_removal,
             {{"mean", DcRemoval::Mean}, {"polynomial", DcRemoval::Polynomial}});
    s.integer("polynomial_degree", c.reconstruction.polynomial_degree);
    if (s.find("calibration_birefringence")) {
      Birefringence dn;
      table_or_number(s, "calibration_birefringence", dn.constant, dn.wavelengths_nm, dn.values);
      c.reconstruction.delay_calibration = dn;
    }
    s.finish();
  }
  {
    Section s = top.child("analysis");
    s.choice("shape", c.analysis.shape,
             {{"lorentzian", LineShape::Lorentzian}, {"gaussian", LineShape::Gaussian}});
    s.window("peak_window_nm", c.analysis.peak_window);
    std::optional<WavelengthWindow> noise;
    s.window("noise_window_nm", noise);
    if (noise) c.analysis.noise_window = *noise;
    s.number("identify_tolerance_nm", c.analysis.identify_tolerance_nm);
    std::string lib;
    s.text("library_path", lib);
    if (!lib.empty()) c.analysis.library_path = lib;
    s.finish();
  }
  {
    Section s = top.child("nv");
    s.number("k_exc", c.nv.k_exc);
    s.number("k_ge0", c.nv.k_ge0);
    s.number("k_ge1", c.nv.k_ge1);
    s.number("k_es0", c.nv.k_es0);
    s.number("k_es1", c.nv.k_es1);
    s.number("k_s", c.nv.k_s);
    s.number("k_sg0", c.nv.k_sg0);
    s.number("k_sg1", c.nv.k_sg1);
    s.finish();
  }
  {
    Section s = top.child("odmr");
    if (const json* v = s.find("resonances")) {
      if (!v->is_array()) {
        issues.add("odmr.resonances", "expected an array of objects");
      } else {
        c.odmr.resonances.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
          Section r(&(*v)[i], "odmr.resonances[" + std::to_string(i) + "]", issues);
          OdmrResonance res;
          r.number("frequency_mhz", res.frequency_mhz);
          r.number("contrast", res.contrast);
          r.number("linewidth_mhz", res.linewidth_mhz);
          r.finish();
          c.odmr.resonances.push_back(res);
        }
      }
    }
    s.number("field_gauss", c.odmr.field_gauss);
    s.number("contrast", c.odmr.contrast);
    s.number("linewidth_mhz", c.odmr.linewidth_mhz);
    s.number("sweep_start_mhz", c.odmr.sweep_start_mhz);
    s.number("sweep_stop_mhz", c.odmr.sweep_stop_mhz);
    s.integer("n_points", c.odmr.n_points);
    s.finish();
  }
  {
    Section s = top.child("rabi");
    s.number("t_pi_s", c.rabi.t_pi_s);
    s.number("t2_star_s", c.rabi.t2_star_s);
    s.number("max_duration_s", c.rabi.max_duration_s);
    s.integer("n_points", c.rabi.n_points);
    s.number("readout_s", c.rabi.readout_s);
    s.finish();
  }
  {
    Section s = top.child("timeresolved");
    auto& t = c.timeresolved;
    s.integer("n_steps", t.n_steps);
    s.number("step_mm", t.step_mm);
    s.integer("n_reps", t.n_reps);
    s.number("bin_s", t.bin_s);
    s.integer("n_bins", t.n_bins);
    s.choice("mode", t.mode,
             {{"expectation", AcquisitionMode::Expectation}, {"sampling", AcquisitionMode::Sampling}});
    s.number("max_sequence_time_s", t.max_sequence_time_s);
    s.number("vis_brightness_cps", t.vis_brightness_cps);
    s.number("ir_line_brightness_cps", t.ir_line_brightness_cps);
    s.number("ir_tail_brightness_cps", t.ir_tail_brightness_cps);
    if (const json* v = s.find("bands")) {
      if (!v->is_array()) {
        issues.add("timeresolved.bands", "expected an array of objects");
      } else {
        t.bands.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
          Section b(&(*v)[i], "timeresolved.bands[" + std::to_string(i) + "]", issues);
          BandWindow w;
          b.text("name", w.name);
          b.number("lo_nm", w.lo_nm);
          b.number("hi_nm", w.hi_nm);
          b.finish();
          t.bands.push_back(w);
        }
      }
    }
    std::optional<WavelengthWindow> crop;
    s.window("crop_nm", crop);
    if (crop) t.crop = {crop->lo_nm, crop->hi_nm};
    s.finish();
  }
  {
    Section s = top.child("sweep");
    s.numbers("total_times_s", c.sweep.total_times_s);
    s.numbers("dark_cps", c.sweep.dark_cps);
    s.numbers("scan_range_fractions", c.sweep.scan_range_fractions);
    s.numbers("dwell_s", c.sweep.dwell_s);
    s.numbers("measured_dwell_s", c.sweep.measured_dwell_s);
    s.numbers("measured_totals_s", c.sweep.measured_totals_s);
    s.finish();
  }
  {
    Section s = top.child("outputs");
    s.choice("format", c.format, {{"csv", OutputFormat::Csv}, {"csv+plot", OutputFormat::CsvPlot}});
    s.finish();
  }
  top.finish();

  // Module-level validation, reported under the module's name.
  try {
    validate(c.emitter.spectrum());
  } catch (const Error& e) {
    issues.add("emitter", e.what());
  }
  if (!(c.grid_step_hz > 0)) issues.add("grid.step_hz", "must be > 0");
  check(issues, "camera", c.camera);
  check(issues, "grating", c.grating);
  if (!(c.grating_total_time_s > 0)) issues.add("grating.total_time_s", "must be > 0");
  check(issues, "counter", c.counter);
  check(issues, "twins", c.twins);
  try {
    validate(c.schedule.schedule(), c.twins);
  } catch (const Error& e) {
    issues.add("schedule", e.what());
  }
  check(issues, "reconstruction", c.reconstruction);
  check(issues, "nv", c.nv);
  if (c.analysis.peak_window && !(c.analysis.peak_window->hi_nm > c.analysis.peak_window->lo_nm))
    issues.add("analysis.peak_window_nm", "hi must exceed lo");
  if (!(c.analysis.noise_window.hi_nm > c.analysis.noise_window.lo_nm))
    issues.add("analysis.noise_window_nm", "hi must exceed lo");
  if (c.rabi.n_points < 8 || !(c.rabi.t_pi_s > 0) || !(c.rabi.t2_star_s > 0) ||
      !(c.rabi.max_duration_s > 0))
    issues.add("rabi", "needs t_pi_s, t2_star_s, max_duration_s > 0 and n_points >= 8");
  if (c.odmr.n_points < 2 || !(c.odmr.sweep_stop_mhz > c.odmr.sweep_start_mhz))
    issues.add("odmr", "sweep needs n_points >= 2 and stop > start");
  for (double f : c.sweep.scan_range_fractions)
    if (!(f > 0 && f <= 1)) issues.add("sweep.scan_range_fractions", "fractions must lie in (0, 1]");
  if (c.sweep.measured_dwell_s.size() != c.sweep.measured_totals_s.size())
    issues.add("sweep.measured_totals_s", "must pair with measured_dwell_s");
  static const std::set<std::string> pipelines = {"grating_vs_ft", "dark_sweep", "resolution_study",
                                                  "dwell_sweep", "timeresolved"};
  if (!pipelines.count(c.pipeline)) issues.add("pipeline", "unknown pipeline '" + c.pipeline + "'");
  if (!issues.empty()) throw ConfigError(issues.text());
  return c;
}

}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
  return parse_config_json(parse_json(json_text));
}

std::string canonical_config(const std::string& json_text) { return parse_json(json_text).dump(); }

// ---------------------------------------------------------------------------
// Manifest

std::string format_manifest(const RunManifest& m) {
  json j;
  j["scenario"] = m.scenario;
  j["tool_version"] = m.tool_version;
  j["config_sha256"] = m.config_sha256;
  j["seed"] = m.seed;
  j["outputs"] = m.outputs;
  j["wall_time_s"] = m.wall_time_s;
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunManifest m;
    m.scenario = j.at("scenario").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_sha256 = j.at("config_sha256").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.wall_time_s = j.at("wall_time_s").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

bool same_run(const RunManifest& a, const RunManifest& b) {
  return a.scenario == b.scenario && a.tool_version == b.tool_version &&
         a.config_sha256 == b.config_sha256 && a.seed == b.seed && a.outputs == b.outputs;
}

std::vector<std::string> verify_manifest(const RunManifest& m, const std::string& dir) {
  std::vector<std::string> bad;
  for (const auto& [file, sum] : m.outputs) {
    const fs::path p = fs::path(dir) / file;
    if (!fs::exists(p) || io::sha256_hex(io::read_file(p.string())) != sum) bad.push_back(file);
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Bundled scenarios

namespace {

struct Bundled {
  const char* name;
  const char* body;
};

const Bundled kBundled[] = {
#include "bundled_scenarios.inc"
};

}  // namespace

std::vector<ScenarioInfo> list_scenarios() {
  std::vector<ScenarioInfo> out;
  for (const auto& b : kBundled)
    out.push_back({b.name, parse_json(b.body).value("description", std::string())});
  return out;
}

std::string bundled_scenario(const std::string& name) {
  for (const auto& b : kBundled)
    if (name == b.name) return b.body;
  throw ConfigError("no bundled scenario named '" + name + "'");
}

std::string plot_script(const std::string& csv_file, const std::string& x_label,
                        const std::string& y_label, int n_columns) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set xlabel '" << x_label << "'\n"
     << "set ylabel '" << y_label << "'\n"
     << "set terminal pngcairo size 900,600\n"
     << "set output '" << fs::path(csv_file).replace_extension(".png").string() << "'\n"
     << "plot";
  for (int c = 2; c <= n_columns; ++c)
    os << (c > 2 ? "," : "") << " '" << csv_file << "' using 1:" << c << " with lines";
  os << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Pipelines

namespace {

std::string num(double v) { return io::format_number(v); }

class OutputDir {
 public:
  OutputDir(std::string dir, OutputFormat format, RunManifest& manifest)
      : dir_(std::move(dir)), format_(format), manifest_(manifest) {
    fs::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& contents) {
    io::write_file((fs::path(dir_) / name).string(), contents);
    manifest_.outputs[name] = io::sha256_hex(contents);
  }

  // CSV plus, when asked for, a gnuplot script drawing it.
  void csv(const std::string& name, const std::string& contents, const std::string& x_label,
           const std::string& y_label) {
    write(name, contents);
    if (format_ != OutputFormat::CsvPlot) return;
    const auto table = io::parse_commented_table(contents);
    write(fs::path(name).replace_extension(".gp").string(),
          plot_script(name, x_label, y_label, int(table.columns.size())));
  }

 private:
  std::string dir_;
  OutputFormat format_;
  RunManifest& manifest_;
};

struct FtResult {
  Interferogram interferogram;
  ReconstructedSpectrum spectrum;
  SpectrumSamples samples;
};

FtResult ft_run(const ScenarioConfig& c, const EmitterSpectrum& spectrum, const SpectralGrid& grid,
                const PhotonCounterModel& counter, const ScanSchedule& schedule, std::uint64_t seed) {
  FtResult r;
  r.interferogram = synthesize_interferogram(spectrum, grid, c.twins, counter, schedule, seed);
  r.spectrum = reconstruct(r.interferogram, c.twins, c.reconstruction);
  r.samples = to_samples(r.spectrum);
  return r;
}

struct PeakSummary {
  double snr = std::numeric_limits<double>::quiet_NaN();
  double center = std::numeric_limits<double>::quiet_NaN();
  double fwhm = std::numeric_limits<double>::quiet_NaN();
};

// FT spectra take their SNR from the real part, see snr(ReconstructedSpectrum).
PeakSummary summarize_peak(const ScenarioConfig& c, const SpectrumSamples& s,
                           const ReconstructedSpectrum* ft = nullptr) {
  PeakSummary p;
  try {
    p.snr = ft ? snr(*ft, c.peak_window(), c.analysis.noise_window).snr
               : snr(s, c.peak_window(), c.analysis.noise_window).snr;
  } catch (const DataError&) {
  }
  try {
    const PeakFitResult f = fit_peak(s, c.analysis.shape, c.peak_window());
    p.center = f.center_nm;
    p.fwhm = f.fwhm_nm;
  } catch (const FitError&) {
  } catch (const DataError&) {
  }
  return p;
}

ScanSchedule with_dwell(const ScenarioConfig& c, double dwell_s) {
  ScheduleSettings s = c.schedule;
  s.dwell_s = dwell_s;
  return s.schedule();
}

double one_sided_excursion(const TwinsModel& m) {
  return std::min(m.zero_delay_position_mm, m.travel_max_mm - m.zero_delay_position_mm);
}

std::vector<std::pair<std::string, std::string>> spectrum_meta(const ReconstructedSpectrum& s) {
  return {{"provenance", s.provenance},
          {"x_max_effective_mm", num(s.x_max_effective_mm)},
          {"model_hash", model_hash(s.model)}};
}

void run_grating_vs_ft(const ScenarioConfig& c, std::uint64_t seed, OutputDir& out) {
  const EmitterSpectrum spectrum = c.emitter.spectrum();
  const SpectralGrid grid = covering_grid(spectrum, c.grid_step_hz);
  std::ostringstream summary;
  summary << "total_time_s,grating_snr,ft_snr,ft_center_nm,ft_fwhm_nm\n";
  for (std::size_t i = 0; i < c.sweep.total_times_s.size(); ++i) {
    const double T = c.sweep.total_times_s[i];
    require(T > 0, "sweep.total_times_s must be positive");
    const GratingSpectrum g =
        simulate_grating_acquisition(spectrum, c.grating, c.camera, T, derive_seed(seed, 2 * i));
    const SpectrumSamples gs{g.wavelengths_nm, g.counts};
    out.csv("grating_T" + num(T) + "s.csv",
            format_samples(gs, "counts", {{"total_time_s", num(T)}}), "wavelength (nm)", "counts");

    const ScanSchedule schedule = with_dwell(c, T / double(c.schedule.n_steps));
    const FtResult ft = ft_run(c, spectrum, grid, c.counter, schedule, derive_seed(seed, 2 * i + 1));
    out.csv("interferogram_T" + num(T) + "s.csv", format_interferogram(ft.interferogram),
            "position (mm)", "counts");
    const SpectrumSamples band = crop(ft.samples, c.grating.lambda_start, c.grating.lambda_end);
    out.csv("ft_T" + num(T) + "s.csv", format_samples(band, "amplitude", spectrum_meta(ft.spectrum)),
            "wavelength (nm)", "amplitude");

    const PeakSummary gp = summarize_peak(c, gs);
    const PeakSummary fp = summarize_peak(c, ft.samples, &ft.spectrum);
    summary << num(T) << ',' << num(gp.snr) << ',' << num(fp.snr) << ',' << num(fp.center) << ','
            << num(fp.fwhm) << '\n';
  }
  out.write("summary.csv", summary.str());
}

void run_dark_sweep(const ScenarioConfig& c, std::uint64_t seed, OutputDir& out) {
  const EmitterSpectrum spectrum = c.emitter.spectrum();
  const SpectralGrid grid = covering_grid(spectrum, c.grid_step_hz);
  const ScanSchedule base = c.schedule.schedule();
  const double x_max = (base.positions_mm.array() - c.twins.zero_delay_position_mm).abs().maxCoeff();
  const double resolution = resolution_at(c.twins, c.emitter.zpl_nm, x_max);
  std::ostringstream summary;
  summary << "dark_cps,total_time_s,ft_snr,center_nm,center_error_nm,resolution_nm,within_resolution\n";
  std::uint64_t k = 0;
  for (double dark : c.sweep.dark_cps) {
    PhotonCounterModel counter = c.counter;
    counter.dark_cps = dark;
    validate(counter);
    for (double T : c.sweep.total_times_s) {
      require(T > 0, "sweep.total_times_s must be positive");
      const ScanSchedule schedule = with_dwell(c, T / double(c.schedule.n_steps));
      const FtResult ft = ft_run(c, spectrum, grid, counter, schedule, derive_seed(seed, k++));
      const SpectrumSamples band = crop(ft.samples, c.grating.lambda_start, c.grating.lambda_end);
      out.csv("ft_dark" + num(dark) + "_T" + num(T) + "s.csv",
              format_samples(band, "amplitude", spectrum_meta(ft.spectrum)), "wavelength (nm)",
              "amplitude");
      const PeakSummary p = summarize_peak(c, ft.samples, &ft.spectrum);
      const double err = p.center - c.emitter.zpl_nm;
      summary << num(dark) << ',' << num(T) << ',' << num(p.snr) << ',' << num(p.center) << ','
              << num(err) << ',' << num(resolution) << ',' << (std::abs(err) <= resolution ? 1 : 0)
              << '\n';
    }
  }
  out.write("summary.csv", summary.str());
}

void run_resolution_study(const ScenarioConfig& c, std::uint64_t seed, OutputDir& out) {
  const EmitterSpectrum spectrum = c.emitter.spectrum();
  std::vector<double> ranges;
  for (double f : c.sweep.scan_range_fractions) ranges.push_back(f * one_sided_excursion(c.twins));
  ResolutionStudySetup setup;
  setup.model = c.twins;
  setup.counter = c.counter;
  setup.config = c.reconstruction;
  setup.step_mm = c.schedule.step_mm;
  setup.dwell_s = c.schedule.dwell_s;
  setup.grid_step_hz = c.grid_step_hz;
  setup.seed = seed;
  const auto spectra = compare_resolution_study(spectrum, ranges, setup);
  std::ostringstream summary;
  summary << "range_fraction,x_max_mm,resolution_nm,fitted_fwhm_nm\n";
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    const double f = c.sweep.scan_range_fractions[i];
    const SpectrumSamples s = to_samples(spectra[i]);
    out.csv("ft_range" + num(f) + ".csv",
            format_samples(crop(s, c.grating.lambda_start, c.grating.lambda_end), "amplitude",
                           spectrum_meta(spectra[i])),
            "wavelength (nm)", "amplitude");
    const PeakSummary p = summarize_peak(c, s, &spectra[i]);
    summary << num(f) << ',' << num(spectra[i].x_max_effective_mm) << ','
            << num(spectra[i].resolution_nm_at(c.emitter.zpl_nm)) << ',' << num(p.fwhm) << '\n';
  }
  out.write("summary.csv", summary.str());
}

void run_dwell_sweep(const ScenarioConfig& c, std::uint64_t seed, OutputDir& out) {
  const EmitterSpectrum spectrum = c.emitter.spectrum();
  const SpectralGrid grid = covering_grid(spectrum, c.grid_step_hz);
  const Eigen::Index n = c.schedule.n_steps;
  const Eigen::VectorXd measured_dwell =
      Eigen::Map<const Eigen::VectorXd>(c.sweep.measured_dwell_s.data(), Eigen::Index(c.sweep.measured_dwell_s.size()));
  const Eigen::VectorXd measured_total =
      Eigen::Map<const Eigen::VectorXd>(c.sweep.measured_totals_s.data(), Eigen::Index(c.sweep.measured_totals_s.size()));
  const double overhead = measured_dwell.size() > 0
                              ? fit_motor_overhead(n, measured_dwell, measured_total)
                              : c.schedule.motor_overhead_s;
  const EmitterLibrary library = c.library();

  std::ostringstream summary, ident;
  summary << "dwell_s,predicted_total_s,measured_total_s,ft_snr,center_nm,fwhm_nm\n";
  ident << "motor_overhead_s=" << num(overhead) << '\n';
  for (std::size_t i = 0; i < c.sweep.dwell_s.size(); ++i) {
    const double dwell = c.sweep.dwell_s[i];
    ScheduleSettings ss = c.schedule;
    ss.dwell_s = dwell;
    ss.motor_overhead_s = overhead;
    const ScanSchedule schedule = ss.schedule();
    double measured = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < c.sweep.measured_dwell_s.size(); ++k)
      if (c.sweep.measured_dwell_s[k] == dwell) measured = c.sweep.measured_totals_s[k];

    const FtResult ft = ft_run(c, spectrum, grid, c.counter, schedule, derive_seed(seed, i));
    out.csv("ft_dwell" + num(dwell * 1e3) + "ms.csv",
            format_samples(crop(ft.samples, c.grating.lambda_start, c.grating.lambda_end),
                           "amplitude", spectrum_meta(ft.spectrum)),
            "wavelength (nm)", "amplitude");
    const PeakSummary p = summarize_peak(c, ft.samples, &ft.spectrum);
    summary << num(dwell) << ',' << num(schedule_duration(schedule)) << ',' << num(measured) << ','
            << num(p.snr) << ',' << num(p.center) << ',' << num(p.fwhm) << '\n';

    const double tol = c.analysis.identify_tolerance_nm.value_or(
        2.0 * ft.spectrum.resolution_nm_at(c.emitter.zpl_nm));
    const auto matches = std::isnan(p.center) ? std::vector<EmitterMatch>{}
                                              : identify_emitter(p.center, library, tol);
    ident << "dwell" << num(dwell * 1e3) << "ms.top_match="
          << (matches.empty() ? std::string("none") : matches.front().name) << '\n';
  }
  out.write("summary.csv", summary.str());
  out.write("identification.txt", ident.str());
}

void run_timeresolved(const ScenarioConfig& c, std::uint64_t seed, OutputDir& out) {
  const TimeResolvedSetup setup = c.timeresolved.setup(c.nv, c.twins, c.counter, seed);
  const TimeResolvedCounts counts = simulate_timeresolved_acquisition(setup);
  std::ostringstream fits;
  fits << "desk_sequence_time_s="
       << num(sequence_time_s(double(setup.schedule.size()), double(setup.n_reps), setup.seq0.period()))
       << '\n';
  for (const auto& ch : setup.channels) {
    const DifferenceMap map = build_difference_map(counts.spin0, counts.spin1, ch.name, setup.twins,
                                                   c.reconstruction, c.timeresolved.bands,
                                                   c.timeresolved.crop);
    out.csv("delta_" + ch.name + ".csv", format_difference_map(map), "wavelength (nm)", "delta");
    out.csv("bands_" + ch.name + ".csv", format_band_traces(map), "time (ns)", "band integral");
    for (const auto& [name, trace] : map.band_integrals) {
      Eigen::Index peak = 0;
      trace.cwiseAbs().maxCoeff(&peak);
      fits << ch.name << '.' << name << ".early_sign=" << (trace(peak) >= 0 ? "+" : "-") << '\n';
      try {
        const Eigen::Index n = trace.size() - peak;
        const DecayFitResult f = fit_decay(map.time_s.tail(n), trace.tail(n));
        fits << ch.name << '.' << name << ".decay_tau_s=" << num(f.tau_s) << '\n';
      } catch (const Error& e) {
        fits << ch.name << '.' << name << ".decay_tau_s=nan\n";
      }
    }
  }
  out.write("summary.txt", fits.str());
}

}  // namespace

RunManifest run_scenario_text(const std::string& json_text, const std::string& out_dir,
                              const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  json doc = parse_json(json_text);
  if (options.seed) doc["master_seed"] = *options.seed;
  const ScenarioConfig c = parse_config_json(doc);

  RunManifest m;
  m.scenario = c.pipeline;
  m.tool_version = FTPL_VERSION;
  m.config_sha256 = io::sha256_hex(doc.dump());
  m.seed = c.seed();
  OutputDir out(out_dir, options.format.value_or(c.format), m);

  if (c.pipeline == "grating_vs_ft") run_grating_vs_ft(c, m.seed, out);
  else if (c.pipeline == "dark_sweep") run_dark_sweep(c, m.seed, out);
  else if (c.pipeline == "resolution_study") run_resolution_study(c, m.seed, out);
  else if (c.pipeline == "dwell_sweep") run_dwell_sweep(c, m.seed, out);
  else run_timeresolved(c, m.seed, out);

  m.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  io::write_file((fs::path(out_dir) / "manifest.json").string(), format_manifest(m));
  return m;
}

RunManifest run_scenario(const std::string& config_path, const std::string& out_dir,
                         const RunOptions& options) {
  return run_scenario_text(io::read_file(config_path), out_dir, options);
}

}  // namespace ftpl
