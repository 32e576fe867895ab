#include "ftpl/detectors.hpp"

#include <algorithm>
#include <cmath>

#include "ftpl/errors.hpp"
#include "ftpl/random.hpp"

namespace ftpl {

double QuantumEfficiency::at(double wavelength_nm) const {
  if (!tabulated() || wavelength_nm <= 0) return constant;
  if (wavelength_nm <= wavelengths_nm.front()) return values.front();
  if (wavelength_nm >= wavelengths_nm.back()) return values.back();
  const auto hi = std::upper_bound(wavelengths_nm.begin(), wavelengths_nm.end(), wavelength_nm);
  const auto i = std::size_t(hi - wavelengths_nm.begin());
  const double t = (wavelength_nm - wavelengths_nm[i - 1]) / (wavelengths_nm[i] - wavelengths_nm[i - 1]);
  return values[i - 1] + t * (values[i] - values[i - 1]);
}

void validate(const QuantumEfficiency& eta) {
  require(eta.constant >= 0 && eta.constant <= 1, "quantum efficiency must lie in [0, 1]");
  require(eta.wavelengths_nm.size() == eta.values.size(),
          "quantum efficiency table: wavelength and value columns differ in length");
  for (std::size_t i = 0; i < eta.values.size(); ++i) {
    require(eta.values[i] >= 0 && eta.values[i] <= 1, "quantum efficiency must lie in [0, 1]");
    if (i > 0)
      require(eta.wavelengths_nm[i] > eta.wavelengths_nm[i - 1],
              "quantum efficiency table wavelengths must increase");
  }
}

void validate(const CameraModel& m) {
  validate(m.eta);
  require(m.gain > 0, "camera gain must be > 0");
  require(m.dark_rate >= 0, "camera dark rate must be >= 0");
  require(m.readout_noise >= 0, "camera readout noise must be >= 0");
  require(m.well_capacity > 0, "camera well capacity must be > 0");
}

void validate(const PhotonCounterModel& m) {
  validate(m.eta);
  require(m.dark_cps >= 0, "counter dark rate must be >= 0");
  require(m.saturation_cps > 0, "counter saturation must be > 0");
  require(m.jitter_fwhm_ps >= 0, "counter jitter must be >= 0");
}

void validate(const GratingMap& map) {
  require(map.lambda_start > 0 && map.lambda_end > map.lambda_start,
          "grating map needs 0 < lambda_start < lambda_end");
  require(map.n_pixels >= 1, "grating map needs at least one pixel");
}

double camera_mean_electrons(const CameraModel& model, double photon_rate, double dt,
                             double wavelength_nm) {
  validate(model);
  require(photon_rate >= 0, "photon rate must be >= 0");
  require(dt > 0, "integration time must be > 0");
  return (model.eta.at(wavelength_nm) * photon_rate + model.dark_rate) * dt + model.readout_noise;
}

double camera_sample_counts(const CameraModel& model, double photon_rate, double dt,
                            std::uint64_t seed, double wavelength_nm) {
  const double mean = camera_mean_electrons(model, photon_rate, dt, wavelength_nm);
  auto rng = make_rng(seed);
  const double electrons = std::min(double(poisson_draw(rng, mean)), model.well_capacity);
  return electrons / model.gain;
}

double counter_rate(const PhotonCounterModel& model, double incident_rate, double wavelength_nm) {
  validate(model);
  require(incident_rate >= 0, "incident rate must be >= 0");
  return std::min(model.eta.at(wavelength_nm) * incident_rate + model.dark_cps,
                  model.saturation_cps);
}

Eigen::VectorXd grating_pixel_centers(const GratingMap& map) {
  validate(map);
  if (map.n_pixels == 1)
    return Eigen::VectorXd::Constant(1, 0.5 * (map.lambda_start + map.lambda_end));
  return Eigen::VectorXd::LinSpaced(map.n_pixels, map.lambda_start, map.lambda_end);
}

GratingSpectrum grating_photon_rates(const EmitterSpectrum& spectrum, const GratingMap& map) {
  validate(spectrum);
  GratingSpectrum out;
  out.wavelengths_nm = grating_pixel_centers(map);
  const Eigen::Index n = out.wavelengths_nm.size();
  const double pitch = n > 1 ? out.wavelengths_nm(1) - out.wavelengths_nm(0)
                             : map.lambda_end - map.lambda_start;
  out.photon_rates.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lo_nm = out.wavelengths_nm(i) - 0.5 * pitch;
    const double hi_nm = out.wavelengths_nm(i) + 0.5 * pitch;
    out.photon_rates(i) = band_photon_rate(spectrum, nm_to_hz(hi_nm), nm_to_hz(lo_nm));
  }
  const double band_lo = out.wavelengths_nm(0) - 0.5 * pitch;
  const double band_hi = out.wavelengths_nm(n - 1) + 0.5 * pitch;
  for (const auto& c : spectrum.components)
    if (c.center_nm < band_lo || c.center_nm > band_hi) out.coverage_warning = true;
  return out;
}

GratingSpectrum simulate_grating_acquisition(const EmitterSpectrum& spectrum, const GratingMap& map,
                                             const CameraModel& camera, double total_time,
                                             std::uint64_t seed) {
  validate(camera);
  require(total_time > 0, "total integration time must be > 0");
  GratingSpectrum out = grating_photon_rates(spectrum, map);
  out.counts.resize(out.photon_rates.size());
  for (Eigen::Index i = 0; i < out.counts.size(); ++i) {
    const double mean =
        camera_mean_electrons(camera, out.photon_rates(i), total_time, out.wavelengths_nm(i));
    auto rng = make_rng(seed, std::uint64_t(i));
    const double electrons = std::min(double(poisson_draw(rng, mean)), camera.well_capacity);
    out.counts(i) = electrons / camera.gain;
  }
  return out;
}

}  // namespace ftpl
