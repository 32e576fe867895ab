#include "ftpl/reconstruction.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "ftpl/errors.hpp"
#include "ftpl/text_io.hpp"

namespace ftpl {

namespace {

const char* window_name(Window w) {
  switch (w) {
    case Window::None: return "none";
    case Window::Hann: return "hann";
    case Window::Triangular: return "triangular";
  }
  return "?";
}

Eigen::VectorXd remove_dc(const Eigen::VectorXd& positions, const Eigen::VectorXd& counts,
                          const ReconstructionConfig& cfg) {
  if (cfg.dc_removal == DcRemoval::Mean) return counts.array() - counts.mean();
  // Least-squares polynomial on a [-1, 1] abscissa.
  const Eigen::Index n = counts.size();
  const double lo = positions(0), hi = positions(n - 1);
  const Eigen::ArrayXd u = 2.0 * (positions.array() - lo) / (hi - lo) - 1.0;
  Eigen::MatrixXd basis(n, cfg.polynomial_degree + 1);
  basis.col(0).setOnes();
  for (int d = 1; d <= cfg.polynomial_degree; ++d)
    basis.col(d) = basis.col(d - 1).array() * u;
  const Eigen::VectorXd coeffs = basis.colPivHouseholderQr().solve(counts);
  return counts - basis * coeffs;
}

// Fixed point of f * dn(c/f) * k = nu, for dispersive calibration tables.
double calibrated_frequency(const Birefringence& dn, double sin_apex, double cycles_per_mm,
                            double f_guess) {
  double f = f_guess;
  for (int it = 0; it < 60; ++it) {
    const double next = cycles_per_mm * kSpeedOfLight / (dn.at(hz_to_nm(f)) * 1e-3 * sin_apex);
    if (std::abs(next - f) <= 1e-13 * f) return next;
    f = next;
  }
  throw NumericalError("dispersive frequency calibration did not converge");
}

std::string data_fingerprint(const Eigen::VectorXd& positions, const Eigen::VectorXd& counts) {
  std::string bytes(reinterpret_cast<const char*>(positions.data()),
                    std::size_t(positions.size()) * sizeof(double));
  bytes.append(reinterpret_cast<const char*>(counts.data()),
               std::size_t(counts.size()) * sizeof(double));
  return io::sha256_hex(bytes).substr(0, 16);
}

}  // namespace

void validate(const ReconstructionConfig& cfg) {
  require(cfg.zero_pad_factor >= 1 && cfg.zero_pad_factor <= 64,
          "zero_pad_factor must lie in [1, 64]");
  require(cfg.polynomial_degree >= 0 && cfg.polynomial_degree <= 3,
          "polynomial DC removal degree must lie in [0, 3]");
  if (cfg.delay_calibration) validate(*cfg.delay_calibration);
}

Eigen::VectorXd ReconstructedSpectrum::wavelengths_nm() const {
  return frequencies_hz.unaryExpr([](double f) { return hz_to_nm(f); });
}

double ReconstructedSpectrum::resolution_nm_at(double lambda_nm) const {
  return resolution_at(model, lambda_nm, x_max_effective_mm);
}

Eigen::VectorXd apodization(const Eigen::VectorXd& positions_mm, double zero_delay_mm,
                            Window window) {
  const Eigen::ArrayXd dist = (positions_mm.array() - zero_delay_mm).abs();
  const double reach = dist.maxCoeff();
  if (window == Window::None || reach == 0) return Eigen::VectorXd::Ones(positions_mm.size());
  const Eigen::ArrayXd u = dist / reach;
  if (window == Window::Hann) return 0.5 * (1.0 + (std::numbers::pi * u).cos());
  return 1.0 - u;
}

ReconstructedSpectrum reconstruct(const Interferogram& ig, const TwinsModel& model,
                                  const ReconstructionConfig& cfg) {
  return reconstruct(ig.positions_mm, ig.counts, model, cfg);
}

ReconstructedSpectrum reconstruct(const Eigen::VectorXd& positions_mm,
                                  const Eigen::VectorXd& counts, const TwinsModel& model,
                                  const ReconstructionConfig& cfg) {
  validate(cfg);
  validate(model);
  if (positions_mm.size() != counts.size())
    throw DataError("interferogram positions and counts differ in length");
  if (counts.size() < 16) throw DataError("reconstruction needs at least 16 samples");
  ScanSchedule probe{positions_mm, 1.0, 0.0};
  validate(probe);  // uniform spacing, else CalibrationError

  const Eigen::Index n = counts.size();
  const double step_mm = positions_mm(1) - positions_mm(0);
  const double x0 = model.zero_delay_position_mm;

  Eigen::VectorXd signal = remove_dc(positions_mm, counts, cfg);
  signal.array() *= apodization(positions_mm, x0, cfg.window).array();

  const Eigen::Index n_pad = n * cfg.zero_pad_factor;
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(n_pad);
  padded.head(n) = signal;
  Eigen::FFT<double> fft;
  Eigen::VectorXcd spectrum;
  fft.fwd(spectrum, padded);

  // Fractional sample index of zero delay; rotates the phase reference there.
  const double zero_index = (x0 - positions_mm(0)) / step_mm;

  const Birefringence& calib = cfg.delay_calibration ? *cfg.delay_calibration : model.birefringence;
  const double sin_apex = model.sin_apex();

  ReconstructedSpectrum out;
  out.model = model;
  out.x_max_effective_mm = (positions_mm.array() - x0).abs().maxCoeff();
  const Eigen::Index half = n_pad / 2;
  std::vector<double> freqs, amps, signs;
  freqs.reserve(std::size_t(half));
  for (Eigen::Index m = 1; m <= half; ++m) {
    const double cycles_per_mm = double(m) / (double(n_pad) * step_mm);
    double f = 0;
    if (calib.dispersive()) {
      const double guess = cycles_per_mm * kSpeedOfLight /
                           (calib.values.front() * 1e-3 * sin_apex);
      try {
        f = calibrated_frequency(calib, sin_apex, cycles_per_mm, guess);
      } catch (const ExtrapolationError&) {
        continue;  // bin outside the calibration table
      }
    } else {
      f = cycles_per_mm * kSpeedOfLight / (calib.constant * 1e-3 * sin_apex);
    }
    const double phase = 2.0 * std::numbers::pi * double(m) * zero_index / double(n_pad);
    const std::complex<double> y = spectrum(m) * std::polar(1.0, phase);
    freqs.push_back(f);
    amps.push_back(std::abs(y));
    signs.push_back(y.real());
  }
  if (freqs.empty()) throw CalibrationError("no frequency bin falls inside the calibration table");
  out.frequencies_hz = Eigen::Map<Eigen::VectorXd>(freqs.data(), Eigen::Index(freqs.size()));
  out.amplitudes = Eigen::Map<Eigen::VectorXd>(amps.data(), Eigen::Index(amps.size()));
  out.signed_amplitudes = Eigen::Map<Eigen::VectorXd>(signs.data(), Eigen::Index(signs.size()));
  for (Eigen::Index i = 1; i < out.frequencies_hz.size(); ++i)
    if (!(out.frequencies_hz(i) > out.frequencies_hz(i - 1)))
      throw CalibrationError("calibrated frequency axis is not strictly increasing");

  std::ostringstream prov;
  prov << "window=" << window_name(cfg.window) << ";pad=" << cfg.zero_pad_factor
       << ";dc=" << (cfg.dc_removal == DcRemoval::Mean ? "mean" : "poly")
       << (cfg.dc_removal == DcRemoval::Polynomial ? std::to_string(cfg.polynomial_degree) : "")
       << ";data=" << data_fingerprint(positions_mm, counts);
  out.provenance = prov.str();
  return out;
}

std::vector<ReconstructedSpectrum> compare_resolution_study(const EmitterSpectrum& spectrum,
                                                            const std::vector<double>& scan_ranges_mm,
                                                            const ResolutionStudySetup& setup) {
  validate(setup.model);
  const SpectralGrid grid = covering_grid(spectrum, setup.grid_step_hz);
  std::vector<ReconstructedSpectrum> out;
  for (std::size_t r = 0; r < scan_ranges_mm.size(); ++r) {
    const double range = scan_ranges_mm[r];
    const double x0 = setup.model.zero_delay_position_mm;
    require(range > 0 && x0 - range >= 0 && x0 + range <= setup.model.travel_max_mm,
            "scan range exceeds the wedge travel");
    const auto half_steps = static_cast<Eigen::Index>(std::llround(range / setup.step_mm));
    const ScanSchedule schedule =
        ScanSchedule::symmetric(x0, double(half_steps) * setup.step_mm, 2 * half_steps + 1,
                                setup.dwell_s);
    const Eigen::VectorXd rates = expected_interferogram_rates(spectrum, grid, setup.model,
                                                               setup.counter, schedule.positions_mm);
    Eigen::VectorXd counts = rates * setup.dwell_s;
    if (setup.seed)
      counts = sample_interferogram(rates, schedule, setup.model, *setup.seed + r).counts;
    out.push_back(reconstruct(schedule.positions_mm, counts, setup.model, setup.config));
  }
  return out;
}

std::string format_spectrum(const ReconstructedSpectrum& s, SpectrumAxis axis) {
  std::ostringstream os;
  os << "# ftpl spectrum\n"
     << "# provenance=" << s.provenance << '\n'
     << "# x_max_effective_mm=" << io::format_number(s.x_max_effective_mm) << '\n'
     << "# model_hash=" << model_hash(s.model) << '\n';
  const Eigen::Index n = s.frequencies_hz.size();
  if (axis == SpectrumAxis::Frequency) {
    os << "frequency_hz,amplitude\n";
    for (Eigen::Index i = 0; i < n; ++i)
      os << io::format_number(s.frequencies_hz(i)) << ',' << io::format_number(s.amplitudes(i)) << '\n';
  } else {
    os << "wavelength_nm,amplitude\n";
    for (Eigen::Index i = n - 1; i >= 0; --i)
      os << io::format_number(hz_to_nm(s.frequencies_hz(i))) << ','
         << io::format_number(s.amplitudes(i)) << '\n';
  }
  return os.str();
}

SpectrumSamples parse_spectrum(const std::string& text) {
  const auto table = io::parse_commented_table(text);
  if (table.columns.size() != 2) throw FormatError("spectrum table must have two columns");
  const bool frequency_axis = table.columns[0] == "frequency_hz";
  if (!frequency_axis && table.columns[0] != "wavelength_nm")
    throw FormatError("spectrum first column must be wavelength_nm or frequency_hz");
  std::vector<std::pair<double, double>> rows;
  for (const auto& r : table.rows)
    rows.emplace_back(frequency_axis ? hz_to_nm(r[0]) : r[0], r[1]);
  std::sort(rows.begin(), rows.end());
  SpectrumSamples out;
  out.wavelengths_nm.resize(Eigen::Index(rows.size()));
  out.values.resize(Eigen::Index(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.wavelengths_nm(Eigen::Index(i)) = rows[i].first;
    out.values(Eigen::Index(i)) = rows[i].second;
  }
  return out;
}

SpectrumSamples to_samples(const ReconstructedSpectrum& s, SpectrumPart part) {
  SpectrumSamples out;
  out.wavelengths_nm = s.wavelengths_nm().reverse();
  out.values = (part == SpectrumPart::Real ? s.signed_amplitudes : s.amplitudes).reverse();
  return out;
}

SpectrumSamples crop(const SpectrumSamples& s, double lo_nm, double hi_nm) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < s.wavelengths_nm.size(); ++i)
    if (s.wavelengths_nm(i) >= lo_nm && s.wavelengths_nm(i) <= hi_nm) keep.push_back(i);
  SpectrumSamples out;
  out.wavelengths_nm = s.wavelengths_nm(keep);
  out.values = s.values(keep);
  return out;
}

std::string format_samples(const SpectrumSamples& s, const std::string& value_column,
                           const std::vector<std::pair<std::string, std::string>>& metadata) {
  std::ostringstream os;
  for (const auto& [k, v] : metadata) os << "# " << k << '=' << v << '\n';
  os << "wavelength_nm," << value_column << '\n';
  for (Eigen::Index i = 0; i < s.wavelengths_nm.size(); ++i)
    os << io::format_number(s.wavelengths_nm(i)) << ',' << io::format_number(s.values(i)) << '\n';
  return os.str();
}

}  // namespace ftpl
