#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ftpl/twins.hpp"

namespace ftpl {

enum class Window { None, Hann, Triangular };
enum class DcRemoval { Mean, Polynomial };

struct ReconstructionConfig {
  Window window = Window::Hann;
  int zero_pad_factor = 4;
  // Delay calibration; unset means "use the interferometer model's own".
  std::optional<Birefringence> delay_calibration;
  DcRemoval dc_removal = DcRemoval::Mean;
  int polynomial_degree = 1;
};

void validate(const ReconstructionConfig& cfg);

struct ReconstructedSpectrum {
  Eigen::VectorXd frequencies_hz;     // strictly increasing
  Eigen::VectorXd amplitudes;         // |FT|
  Eigen::VectorXd signed_amplitudes;  // Re(FT) with the phase referenced to zero delay
  TwinsModel model;
  double x_max_effective_mm = 0;      // one-sided excursion from zero delay
  std::string provenance;

  Eigen::VectorXd wavelengths_nm() const;
  double resolution_nm_at(double lambda_nm) const;
};

// DC removal, apodization about zero delay, zero padding and a DFT. Bin m
// maps to f_m = m / (N_padded * dtau); only 0 < f <= Nyquist is returned.
ReconstructedSpectrum reconstruct(const Interferogram& ig, const TwinsModel& model,
                                  const ReconstructionConfig& cfg);
ReconstructedSpectrum reconstruct(const Eigen::VectorXd& positions_mm,
                                  const Eigen::VectorXd& counts, const TwinsModel& model,
                                  const ReconstructionConfig& cfg);

// Apodization weights as used by reconstruct(), exposed for tests.
Eigen::VectorXd apodization(const Eigen::VectorXd& positions_mm, double zero_delay_mm,
                            Window window);

struct ResolutionStudySetup {
  TwinsModel model{};
  PhotonCounterModel counter{};
  ReconstructionConfig config = [] {
    ReconstructionConfig c;
    c.window = Window::None;
    c.zero_pad_factor = 8;
    return c;
  }();
  double step_mm = 28.0 / 1292.0;
  double dwell_s = 0.3;
  double grid_step_hz = 5e9;
  std::optional<std::uint64_t> seed;  // unset: noiseless expected counts
};

// One spectrum per scan range (one-sided excursion, mm), each scanned
// symmetrically about zero delay.
std::vector<ReconstructedSpectrum> compare_resolution_study(const EmitterSpectrum& spectrum,
                                                            const std::vector<double>& scan_ranges_mm,
                                                            const ResolutionStudySetup& setup = {});

enum class SpectrumAxis { Wavelength, Frequency };

// Two-column text (wavelength_nm or frequency_hz, amplitude) with a metadata
// header; wavelength rows are written in increasing wavelength.
std::string format_spectrum(const ReconstructedSpectrum& spectrum, SpectrumAxis axis);

// Generic two-column spectrum, for files written by format_spectrum or by the
// grating simulator.
struct SpectrumSamples {
  Eigen::VectorXd wavelengths_nm;  // increasing
  Eigen::VectorXd values;
};

SpectrumSamples parse_spectrum(const std::string& text);
enum class SpectrumPart { Magnitude, Real };
SpectrumSamples to_samples(const ReconstructedSpectrum& spectrum,
                           SpectrumPart part = SpectrumPart::Magnitude);
SpectrumSamples crop(const SpectrumSamples& spectrum, double lo_nm, double hi_nm);
// wavelength_nm,<value_column> with `# key=value` metadata lines.
std::string format_samples(const SpectrumSamples& spectrum, const std::string& value_column,
                           const std::vector<std::pair<std::string, std::string>>& metadata = {});

}  // namespace ftpl
