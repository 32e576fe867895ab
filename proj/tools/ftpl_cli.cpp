// ftpl: command-line front end for the simulation and analysis library.

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ftpl/analysis.hpp"
#include "ftpl/errors.hpp"
#include "ftpl/scenario.hpp"
#include "ftpl/text_io.hpp"

namespace fs = std::filesystem;
using namespace ftpl;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
};

void add_common(CLI::App* cmd, Common& c, bool wants_seed = true) {
  cmd->add_option("--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  if (wants_seed) cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  cmd->add_option("--out", c.out, "output file (stdout when omitted) or directory");
  cmd->add_option("--format", c.format, "csv or csv+plot")->check(CLI::IsMember({"csv", "csv+plot"}));
}

ScenarioConfig load(const Common& c) {
  std::string text = c.config_path.empty() ? "{}" : io::read_file(c.config_path);
  ScenarioConfig cfg = parse_config(text);
  if (c.seed) cfg.master_seed = *c.seed;
  if (c.format == "csv+plot") cfg.format = OutputFormat::CsvPlot;
  return cfg;
}

// Writes to --out, or stdout.
void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) std::cout << text;
  else io::write_file(c.out, text);
}

// Two numeric columns from a CSV written by any of the tools.
std::pair<Eigen::VectorXd, Eigen::VectorXd> two_columns(const std::string& path) {
  const auto table = io::parse_commented_table(io::read_file(path));
  if (table.columns.size() < 2 || table.rows.empty())
    throw DataError(path + ": expected at least two columns and one row");
  Eigen::VectorXd x(Eigen::Index(table.rows.size())), y(x.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    x(Eigen::Index(i)) = table.rows[i][0];
    y(Eigen::Index(i)) = table.rows[i][1];
  }
  return {x, y};
}

Eigen::VectorXd rabi_durations(const RabiSettings& r) {
  return Eigen::VectorXd::LinSpaced(r.n_points, 0.0, r.max_duration_s);
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Validation: return 2;
    case ErrorCategory::Numerical: return 3;
    case ErrorCategory::Io: return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fourier-transform photoluminescence simulation and analysis"};
  app.set_version_flag("--version", std::string(FTPL_VERSION));
  app.require_subcommand(1);

  Common common;

  // -- simulate-grating
  auto* grating = app.add_subcommand("simulate-grating", "grating + camera spectrum of the configured emitter");
  add_common(grating, common);
  double grating_time = 0;
  grating->add_option("--total-time", grating_time, "total integration time (s)");
  grating->callback([&] {
    ScenarioConfig c = load(common);
    const double T = grating_time > 0 ? grating_time : c.grating_total_time_s;
    const GratingSpectrum g = simulate_grating_acquisition(c.emitter.spectrum(), c.grating, c.camera, T, c.seed());
    emit(common, format_samples({g.wavelengths_nm, g.counts}, "counts",
                                {{"total_time_s", io::format_number(T)},
                                 {"seed", std::to_string(c.seed())}}));
  });

  // -- simulate-ft
  auto* ft = app.add_subcommand("simulate-ft", "photon-counting interferogram of the configured emitter");
  add_common(ft, common);
  ft->callback([&] {
    ScenarioConfig c = load(common);
    const EmitterSpectrum s = c.emitter.spectrum();
    const Interferogram ig = synthesize_interferogram(s, covering_grid(s, c.grid_step_hz), c.twins,
                                                      c.counter, c.schedule.schedule(), c.seed());
    emit(common, format_interferogram(ig));
  });

  // -- reconstruct
  auto* rec = app.add_subcommand("reconstruct", "spectrum from an interferogram file");
  add_common(rec, common, false);
  std::string in_path;
  bool freq_axis = false;
  rec->add_option("input", in_path, "interferogram CSV")->required()->check(CLI::ExistingFile);
  rec->add_flag("--frequency", freq_axis, "write a frequency axis instead of wavelength");
  rec->callback([&] {
    ScenarioConfig c = load(common);
    const Interferogram ig = parse_interferogram(io::read_file(in_path));
    const ReconstructedSpectrum s = reconstruct(ig, ig.model, c.reconstruction);
    emit(common, format_spectrum(s, freq_axis ? SpectrumAxis::Frequency : SpectrumAxis::Wavelength));
  });

  // -- fit
  auto* fit = app.add_subcommand("fit", "peak, Rabi or decay fit of a two-column file");
  add_common(fit, common, false);
  std::string fit_kind = "peak";
  fit->add_option("input", in_path, "CSV file")->required()->check(CLI::ExistingFile);
  fit->add_option("--kind", fit_kind, "peak, rabi or decay")->check(CLI::IsMember({"peak", "rabi", "decay"}));
  fit->callback([&] {
    ScenarioConfig c = load(common);
    const auto [x, y] = two_columns(in_path);
    if (fit_kind == "rabi") {
      emit(common, format_rabi_fit(fit_rabi(x, y)));
    } else if (fit_kind == "decay") {
      emit(common, format_decay_fit(fit_decay(x, y)));
    } else {
      const SpectrumSamples s = parse_spectrum(io::read_file(in_path));
      std::string text = format_peak_fit(fit_peak(s, c.analysis.shape, c.peak_window()));
      try {
        text += format_snr(snr(s, c.peak_window(), c.analysis.noise_window));
      } catch (const DataError&) {
        // noise window outside the file: report the fit alone
      }
      emit(common, text);
    }
  });

  // -- identify
  auto* ident = app.add_subcommand("identify", "library emitters near a fitted or given ZPL");
  add_common(ident, common, false);
  std::optional<double> center;
  double tolerance = 0;
  ident->add_option("input", in_path, "spectrum CSV to fit")->check(CLI::ExistingFile);
  ident->add_option("--center-nm", center, "ZPL center instead of fitting a file");
  ident->add_option("--tolerance-nm", tolerance, "match tolerance (default from config or 2 nm)");
  ident->callback([&] {
    ScenarioConfig c = load(common);
    if (!center && in_path.empty()) throw ConfigError("identify: give a spectrum file or --center-nm");
    const double x0 = center ? *center
                             : fit_peak(parse_spectrum(io::read_file(in_path)), c.analysis.shape,
                                        c.peak_window())
                                   .center_nm;
    const double tol = tolerance > 0 ? tolerance : c.analysis.identify_tolerance_nm.value_or(2.0);
    emit(common, "center_nm=" + io::format_number(x0) + "\n" +
                     format_matches(identify_emitter(x0, c.library(), tol)));
  });

  // -- nv-odmr
  auto* odmr = app.add_subcommand("nv-odmr", "VIS and IR ODMR sweep");
  add_common(odmr, common, false);
  odmr->callback([&] {
    ScenarioConfig c = load(common);
    std::vector<OdmrResonance> res = c.odmr.resonances;
    if (c.odmr.field_gauss) {
      const auto [lo, hi] = aligned_field_resonances_mhz(*c.odmr.field_gauss);
      res = {{lo, c.odmr.contrast, c.odmr.linewidth_mhz}, {hi, c.odmr.contrast, c.odmr.linewidth_mhz}};
    }
    const OdmrTrace t = simulate_odmr(
        c.nv, res, Eigen::VectorXd::LinSpaced(c.odmr.n_points, c.odmr.sweep_start_mhz, c.odmr.sweep_stop_mhz));
    std::ostringstream os;
    os << "# ir_gain=" << io::format_number(t.ir_gain) << "\nfrequency_mhz,vis,ir\n";
    for (Eigen::Index i = 0; i < t.frequencies_mhz.size(); ++i)
      os << io::format_number(t.frequencies_mhz(i)) << ',' << io::format_number(t.vis(i)) << ','
         << io::format_number(t.ir(i)) << '\n';
    emit(common, os.str());
  });

  // -- nv-rabi
  auto* rabi = app.add_subcommand("nv-rabi", "Rabi trace and its fit");
  add_common(rabi, common, false);
  bool rabi_fit = false;
  rabi->add_flag("--fit", rabi_fit, "append the fitted parameters as metadata");
  rabi->callback([&] {
    ScenarioConfig c = load(common);
    const RabiTrace t = simulate_rabi(c.nv, c.rabi.t_pi_s, c.rabi.t2_star_s, rabi_durations(c.rabi),
                                      c.rabi.readout_s);
    std::ostringstream os;
    if (rabi_fit) {
      std::istringstream rec_lines(format_rabi_fit(fit_rabi(t.durations_s, t.transfer)));
      for (std::string line; std::getline(rec_lines, line);) os << "# " << line << '\n';
    }
    os << "duration_s,transfer,vis,ir\n";
    for (Eigen::Index i = 0; i < t.durations_s.size(); ++i)
      os << io::format_number(t.durations_s(i)) << ',' << io::format_number(t.transfer(i)) << ','
         << io::format_number(t.vis(i)) << ',' << io::format_number(t.ir(i)) << '\n';
    emit(common, os.str());
  });

  // -- nv-timeres
  auto* timeres = app.add_subcommand("nv-timeres", "spin-resolved difference maps (writes a directory)");
  add_common(timeres, common);
  timeres->callback([&] {
    if (common.out.empty()) throw ConfigError("nv-timeres: --out <directory> is required");
    std::string text = common.config_path.empty() ? bundled_scenario("fig5_timeresolved_desk")
                                                  : io::read_file(common.config_path);
    RunOptions opts;
    opts.seed = common.seed;
    if (!common.format.empty())
      opts.format = common.format == "csv+plot" ? OutputFormat::CsvPlot : OutputFormat::Csv;
    const RunManifest m = run_scenario_text(text, common.out, opts);
    std::cout << format_manifest(m);
  });

  // -- budget
  auto* budget = app.add_subcommand("budget", "photon budget and pure sequence time");
  double brightness = 1e6, pulse = 15e-6, bin = 10e-9, target = 100, steps = 128, reps = 10000;
  double period = default_sequence(0).period();
  budget->add_option("--brightness-cps", brightness);
  budget->add_option("--pulse-s", pulse);
  budget->add_option("--bin-s", bin);
  budget->add_option("--target-counts", target);
  budget->add_option("--steps", steps);
  budget->add_option("--reps", reps);
  budget->add_option("--period-s", period);
  budget->callback([&] {
    const PhotonBudget b = photon_budget(brightness, pulse, bin, target);
    std::cout << "photons_per_bin_per_pulse=" << io::format_number(b.photons_per_bin_per_pulse)
              << "\nreps_needed=" << io::format_number(b.reps_needed)
              << "\nsequence_time_s=" << io::format_number(sequence_time_s(steps, reps, period)) << '\n';
  });

  // -- scenario run | list | dump
  auto* scen = app.add_subcommand("scenario", "bundled and user scenarios");
  scen->require_subcommand(1);
  auto* run = scen->add_subcommand("run", "run a bundled scenario name or a JSON file");
  std::string scenario_name;
  run->add_option("scenario", scenario_name, "bundled name or path")->required();
  run->add_option("--seed", common.seed, "overrides master_seed");
  run->add_option("--out", common.out, "output directory")->required();
  run->add_option("--format", common.format)->check(CLI::IsMember({"csv", "csv+plot"}));
  run->callback([&] {
    const std::string text =
        fs::exists(scenario_name) ? io::read_file(scenario_name) : bundled_scenario(scenario_name);
    RunOptions opts;
    opts.seed = common.seed;
    if (!common.format.empty())
      opts.format = common.format == "csv+plot" ? OutputFormat::CsvPlot : OutputFormat::Csv;
    std::cout << format_manifest(run_scenario_text(text, common.out, opts));
  });
  auto* list = scen->add_subcommand("list", "bundled scenarios");
  list->callback([] {
    for (const auto& s : list_scenarios()) std::cout << s.name << "  " << s.description << '\n';
  });
  auto* dump = scen->add_subcommand("dump", "print a bundled scenario");
  dump->add_option("scenario", scenario_name)->required();
  dump->callback([&] { std::cout << bundled_scenario(scenario_name); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "ftpl: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ftpl: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "ftpl: unexpected failure: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
