#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ftpl/units.hpp"

namespace ftpl {

// Uniform optical-frequency grid. Wavelength appears only at I/O boundaries.
struct SpectralGrid {
  double f_min = 0;  // Hz
  double f_max = 0;  // Hz
  Eigen::Index n_points = 0;

  double step() const { return (f_max - f_min) / double(n_points - 1); }
  double frequency(Eigen::Index k) const { return f_min + double(k) * step(); }
  Eigen::VectorXd frequencies() const;
  // Trapezoid quadrature weights (Hz); half weight on the two end points.
  Eigen::VectorXd trapezoid_weights() const;

  static SpectralGrid from_wavelengths(double lambda_short_nm, double lambda_long_nm,
                                       Eigen::Index n_points);
};

void validate(const SpectralGrid& grid);

enum class LineShape { Lorentzian, Gaussian };

// ---------------------------------------------------------------------------
// Unit-area lineshapes and their cumulative distributions, in whatever
// abscissa the caller uses (frequency for the models, wavelength for fits).

template <typename Scalar>
Scalar lorentzian_density(Scalar x, Scalar center, Scalar fwhm) {
  const Scalar half = fwhm / Scalar(2);
  const Scalar d = x - center;
  return half / (std::numbers::pi_v<Scalar> * (d * d + half * half));
}

template <typename Scalar>
Scalar lorentzian_cdf(Scalar x, Scalar center, Scalar fwhm) {
  return Scalar(0.5) + std::atan((x - center) / (fwhm / Scalar(2))) / std::numbers::pi_v<Scalar>;
}

template <typename Scalar>
Scalar gaussian_density(Scalar x, Scalar center, Scalar fwhm) {
  const Scalar sigma = fwhm / Scalar(kFwhmPerSigma);
  const Scalar z = (x - center) / sigma;
  return std::exp(Scalar(-0.5) * z * z) /
         (sigma * std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>));
}

template <typename Scalar>
Scalar gaussian_cdf(Scalar x, Scalar center, Scalar fwhm) {
  const Scalar sigma = fwhm / Scalar(kFwhmPerSigma);
  return Scalar(0.5) * std::erfc(-(x - center) / (sigma * std::numbers::sqrt2_v<Scalar>));
}

// Peak-normalized (value 1 at center) shapes, used by the peak fitter.
template <typename Scalar>
Scalar lorentzian_peak(Scalar x, Scalar center, Scalar fwhm) {
  const Scalar u = Scalar(2) * (x - center) / fwhm;
  return Scalar(1) / (Scalar(1) + u * u);
}

template <typename Scalar>
Scalar gaussian_peak(Scalar x, Scalar center, Scalar fwhm) {
  const Scalar z = (x - center) * Scalar(kFwhmPerSigma) / fwhm;
  return std::exp(Scalar(-0.5) * z * z);
}

// ---------------------------------------------------------------------------

struct SpectralComponent {
  LineShape shape = LineShape::Lorentzian;
  double center_nm = 0;
  double fwhm_hz = 0;
  double relative_weight = 0;

  double center_hz() const { return nm_to_hz(center_nm); }
  double cdf(double f_hz) const;
  double density(double f_hz) const;
};

struct EmitterSpectrum {
  std::vector<SpectralComponent> components;
  double total_brightness = 0;  // photons/s
  std::string name;

  double total_weight() const;
  // Share of total_brightness carried by component i (photons/s).
  double component_brightness(std::size_t i) const;
};

void validate(const EmitterSpectrum& spectrum);

struct EmitterLibraryEntry {
  std::string name;
  std::vector<double> zpl_wavelengths_nm;
  std::string notes;
};

using EmitterLibrary = std::vector<EmitterLibraryEntry>;

// Photon spectral density sampled on a grid (photons/s/Hz).
struct DensitySamples {
  Eigen::VectorXd density;
  bool coverage_warning = false;  // some component center is < 3 FWHM from a grid edge
};

// Default phonon-sideband center: ZPL shifted 10 THz toward lower frequency.
double default_psb_center_nm(double zpl_nm);

// Two-component ZPL (Lorentzian) + PSB (Gaussian) emitter. zpl_to_psb_ratio is
// the ZPL/PSB intensity ratio.
EmitterSpectrum build_divacancy_spectrum(double zpl_nm, double zpl_fwhm_hz, double psb_center_nm,
                                         double psb_fwhm_hz, double zpl_to_psb_ratio,
                                         double brightness);

// Bin-integrated density: each grid point carries the profile mass of its
// trapezoid cell divided by the cell width, so lines narrower than the grid
// step keep their full weight. The result is rescaled so that its trapezoid
// integral equals total_brightness. Throws CoverageError when a component
// center lies outside the grid.
DensitySamples evaluate_density(const EmitterSpectrum& spectrum, const SpectralGrid& grid);

// Density of a single component (same discretization, same normalization).
Eigen::VectorXd component_density(const EmitterSpectrum& spectrum, std::size_t index,
                                  const SpectralGrid& grid);

// Photons/s falling in [f_lo, f_hi] (no renormalization; light outside is lost).
double band_photon_rate(const EmitterSpectrum& spectrum, double f_lo_hz, double f_hi_hz);

// Grid spanning every component with `margin_fwhm` linewidths of margin,
// stepped at roughly `step_hz`.
SpectralGrid covering_grid(const EmitterSpectrum& spectrum, double step_hz,
                           double margin_fwhm = 3.0);

EmitterLibrary default_emitter_library();
std::optional<EmitterLibraryEntry> find_emitter(const EmitterLibrary& library,
                                                const std::string& name);
void validate(const EmitterLibrary& library);

// Text format: one record per line, `name | zpl_nm[, zpl_nm...] | notes`;
// blank lines and lines starting with '#' are ignored.
EmitterLibrary parse_emitter_library(const std::string& text);
EmitterLibrary load_emitter_library(const std::string& path);
std::string format_emitter_library(const EmitterLibrary& library);

}  // namespace ftpl
