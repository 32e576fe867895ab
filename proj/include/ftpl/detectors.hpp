#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "ftpl/spectral_model.hpp"

namespace ftpl {

// Detection efficiency: a constant, or a table over wavelength (linear
// interpolation, clamped to the end values outside the table).
struct QuantumEfficiency {
  double constant = 0.8;
  std::vector<double> wavelengths_nm;
  std::vector<double> values;

  double at(double wavelength_nm) const;
  bool tabulated() const { return !wavelengths_nm.empty(); }
};

void validate(const QuantumEfficiency& eta);

// InGaAs-style camera. Defaults are the commercial "high-gain" settings.
struct CameraModel {
  QuantumEfficiency eta{};
  double gain = 75.0;             // photo-electrons per count
  double dark_rate = 5.7e3;       // electrons / pixel / s
  double readout_noise = 400.0;   // electrons per readout
  double well_capacity = 4.5e6;   // electrons
};

// SNSPD-style single-photon counter.
struct PhotonCounterModel {
  QuantumEfficiency eta{};
  double dark_cps = 50.0;
  double saturation_cps = 5e6;
  double jitter_fwhm_ps = 100.0;
};

struct GratingMap {
  double lambda_start = 1050.0;  // nm
  double lambda_end = 1375.0;    // nm
  int n_pixels = 1024;
};

void validate(const CameraModel& model);
void validate(const PhotonCounterModel& model);
void validate(const GratingMap& map);

// Mean photo-electrons for one exposure: [eta*N_ph + N_d]*dt + R.
double camera_mean_electrons(const CameraModel& model, double photon_rate, double dt,
                             double wavelength_nm = 0);

// One exposure: Poisson electrons, clipped at the well capacity, divided by
// the gain. Quantization is neglected, so the result is a real count.
double camera_sample_counts(const CameraModel& model, double photon_rate, double dt,
                            std::uint64_t seed, double wavelength_nm = 0);

// min(eta*incident + dark, saturation)
double counter_rate(const PhotonCounterModel& model, double incident_rate,
                    double wavelength_nm = 0);

// Centers of n_pixels uniformly spaced pixels, first and last on the band
// edges; a single pixel sits at the band midpoint.
Eigen::VectorXd grating_pixel_centers(const GratingMap& map);

struct GratingSpectrum {
  Eigen::VectorXd wavelengths_nm;
  Eigen::VectorXd counts;
  Eigen::VectorXd photon_rates;  // noiseless incident photons/s per pixel
  bool coverage_warning = false;
};

// Bins the emitter into pixels and takes one exposure of total_time per pixel.
GratingSpectrum simulate_grating_acquisition(const EmitterSpectrum& spectrum, const GratingMap& map,
                                             const CameraModel& camera, double total_time,
                                             std::uint64_t seed);

// Noiseless per-pixel incident photon rates (photons/s) and coverage flag.
GratingSpectrum grating_photon_rates(const EmitterSpectrum& spectrum, const GratingMap& map);

}  // namespace ftpl
