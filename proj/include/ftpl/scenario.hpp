#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ftpl/analysis.hpp"
#include "ftpl/detectors.hpp"
#include "ftpl/nv_dynamics.hpp"
#include "ftpl/reconstruction.hpp"
#include "ftpl/spectral_model.hpp"
#include "ftpl/timetag.hpp"
#include "ftpl/twins.hpp"

namespace ftpl {

enum class OutputFormat { Csv, CsvPlot };

struct EmitterSettings {
  std::string name = "divacancy";
  double zpl_nm = 1131.0;
  double zpl_fwhm_hz = 300e6;
  std::optional<double> psb_center_nm;  // default: ZPL shifted by -10 THz
  double psb_fwhm_hz = 20e12;
  double zpl_to_psb_ratio = 0.04;
  double brightness_cps = 2000.0;

  EmitterSpectrum spectrum() const;
};

struct ScheduleSettings {
  double start_mm = 0.0;
  double step_mm = 28.0 / 1292.0;
  Eigen::Index n_steps = 1293;
  double dwell_s = 300.0 / 1293.0;
  double motor_overhead_s = 0.0;

  ScanSchedule schedule() const;
};

struct AnalysisSettings {
  LineShape shape = LineShape::Lorentzian;
  std::optional<WavelengthWindow> peak_window;  // default: ZPL +/- 5 nm
  WavelengthWindow noise_window{1300.0, 1375.0};
  std::optional<double> identify_tolerance_nm;  // default: 2x instrument resolution
  std::optional<std::string> library_path;
};

struct OdmrSettings {
  std::vector<OdmrResonance> resonances{{2995.0, 0.02, 10.0}};
  std::optional<double> field_gauss;  // replaces resonances by the aligned-field pair
  double contrast = 0.02;             // used with field_gauss
  double linewidth_mhz = 10.0;        // used with field_gauss
  double sweep_start_mhz = 2900.0;
  double sweep_stop_mhz = 3100.0;
  Eigen::Index n_points = 401;
};

struct RabiSettings {
  double t_pi_s = 200.5e-9;
  double t2_star_s = 245.8e-9;
  double max_duration_s = 1e-6;
  Eigen::Index n_points = 101;
  double readout_s = 1e-6;
};

struct TimeResolvedSettings {
  Eigen::Index n_steps = 128;
  double step_mm = 0.01;
  std::int64_t n_reps = 10000;
  double bin_s = 10e-9;
  Eigen::Index n_bins = 1500;
  AcquisitionMode mode = AcquisitionMode::Expectation;
  double max_sequence_time_s = 86400.0;
  double vis_brightness_cps = 1e6;
  double ir_line_brightness_cps = 2e3;
  double ir_tail_brightness_cps = 2e3;
  std::vector<BandWindow> bands{{"vis_600_900", 600.0, 900.0}, {"ir_1042", 1025.0, 1060.0}};
  WavelengthCrop crop{550.0, 1150.0};

  TimeResolvedSetup setup(const NvRateModel& nv, const TwinsModel& twins,
                          const PhotonCounterModel& counter, std::uint64_t seed) const;
};

struct SweepSettings {
  std::vector<double> total_times_s{60.0, 180.0, 300.0};
  std::vector<double> dark_cps{5.0, 50.0, 500.0, 2000.0};
  // Fractions of the one-sided excursion available around zero delay.
  std::vector<double> scan_range_fractions{0.25, 0.5, 0.75};
  std::vector<double> dwell_s{0.01, 0.05, 0.1, 2.0};
  // Observed scan totals used to fit the motor overhead.
  std::vector<double> measured_dwell_s{0.01, 0.05, 0.1, 2.0};
  std::vector<double> measured_totals_s{37.0, 86.0, 153.0, 2700.0};
};

// One document drives every subcommand and scenario. Missing keys keep these
// defaults; unknown keys are rejected.
struct ScenarioConfig {
  std::string pipeline = "grating_vs_ft";
  std::string description;
  std::optional<std::uint64_t> master_seed;
  EmitterSettings emitter;
  double grid_step_hz = 20e9;
  CameraModel camera;
  GratingMap grating;
  double grating_total_time_s = 300.0;
  PhotonCounterModel counter;
  TwinsModel twins;
  ScheduleSettings schedule;
  ReconstructionConfig reconstruction;
  AnalysisSettings analysis;
  NvRateModel nv;
  OdmrSettings odmr;
  RabiSettings rabi;
  TimeResolvedSettings timeresolved;
  SweepSettings sweep;
  OutputFormat format = OutputFormat::Csv;

  std::uint64_t seed() const;  // master_seed or ConfigError
  WavelengthWindow peak_window() const;
  EmitterLibrary library() const;
};

// Parses and validates a JSON document. Every unknown key, type problem and
// module validation failure is collected into one ConfigError.
ScenarioConfig parse_config(const std::string& json_text);
std::string canonical_config(const std::string& json_text);  // sorted, compact

struct RunManifest {
  std::string scenario;
  std::string tool_version;
  std::string config_sha256;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> outputs;  // file -> SHA-256
  double wall_time_s = 0;
};

std::string format_manifest(const RunManifest& manifest);
RunManifest parse_manifest(const std::string& text);
// Equal up to wall time.
bool same_run(const RunManifest& a, const RunManifest& b);
// Files whose checksum no longer matches (missing files included).
std::vector<std::string> verify_manifest(const RunManifest& manifest, const std::string& dir);

struct ScenarioInfo {
  std::string name;
  std::string description;
};

std::vector<ScenarioInfo> list_scenarios();
// Bundled config document, or ConfigError for an unknown name.
std::string bundled_scenario(const std::string& name);

struct RunOptions {
  std::optional<std::uint64_t> seed;        // overrides master_seed
  std::optional<OutputFormat> format;
};

// simulate -> reconstruct -> analyze per the config's pipeline; writes CSVs,
// optional gnuplot scripts and manifest.json into out_dir.
RunManifest run_scenario_text(const std::string& json_text, const std::string& out_dir,
                              const RunOptions& options = {});
RunManifest run_scenario(const std::string& config_path, const std::string& out_dir,
                         const RunOptions& options = {});

// gnuplot script for a CSV written by the tools.
std::string plot_script(const std::string& csv_file, const std::string& x_label,
                        const std::string& y_label, int n_columns);

}  // namespace ftpl
