#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "ftpl/detectors.hpp"
#include "ftpl/reconstruction.hpp"
#include "ftpl/spectral_model.hpp"

namespace ftpl {

struct WavelengthWindow {
  double lo_nm = 0;
  double hi_nm = 0;
};

// ---------------------------------------------------------------------------
// Least squares backend

struct LeastSquaresFit {
  Eigen::VectorXd params;
  Eigen::VectorXd sigma;       // 1 sigma, from s^2 (J^T J)^-1
  Eigen::MatrixXd covariance;
  double rss = 0;
  double reduced_norm = 0;     // sqrt(rss / (n - p))
  int evaluations = 0;
  bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Damped Gauss-Newton (MINPACK-style Levenberg-Marquardt) with a relative
// parameter tolerance. Throws DegenerateFitError when J^T J is singular at
// the optimum.
LeastSquaresFit least_squares(const ResidualFn& residuals, const JacobianFn& jacobian,
                              Eigen::VectorXd start, Eigen::Index n_values,
                              double relative_tolerance = 1e-10, int max_evaluations = 2000);

// ---------------------------------------------------------------------------
// Peaks

struct PeakFitResult {
  LineShape shape = LineShape::Lorentzian;
  double center_nm = 0;
  double fwhm_nm = 0;
  double amplitude = 0;
  double baseline = 0;
  double center_sigma = 0;
  double fwhm_sigma = 0;
  double amplitude_sigma = 0;
  double baseline_sigma = 0;
  double goodness = 0;  // reduced residual norm
  bool converged = false;
};

// baseline + amplitude * peak-normalized shape, fitted inside `window`.
PeakFitResult fit_peak(const Eigen::VectorXd& wavelengths_nm, const Eigen::VectorXd& values,
                       LineShape shape, WavelengthWindow window);
PeakFitResult fit_peak(const SpectrumSamples& spectrum, LineShape shape, WavelengthWindow window);
PeakFitResult fit_peak(const ReconstructedSpectrum& spectrum, LineShape shape,
                       WavelengthWindow window);

// ---------------------------------------------------------------------------
// Rabi and decay curves

struct RabiFitResult {
  double amplitude = 0, t_pi_s = 0, t2_star_s = 0, offset = 0;
  double amplitude_sigma = 0, t_pi_sigma = 0, t2_star_sigma = 0, offset_sigma = 0;
  double residual_norm = 0;  // sqrt(rss)
  bool converged = false;
};

// f(tau) = A sin(2 tau / T_pi) exp(-tau / T2*) + B, exactly as written.
RabiFitResult fit_rabi(const Eigen::VectorXd& durations_s, const Eigen::VectorXd& signal);

template <typename Scalar>
Scalar rabi_fit_function(Scalar tau, Scalar amplitude, Scalar t_pi, Scalar t2_star, Scalar offset) {
  return amplitude * std::sin(Scalar(2) * tau / t_pi) * std::exp(-tau / t2_star) + offset;
}

struct DecayFitResult {
  double amplitude = 0, tau_s = 0, offset = 0;
  double amplitude_sigma = 0, tau_sigma = 0, offset_sigma = 0;
  bool converged = false;
};

// A exp(-(t - t_0) / tau) + C, with t_0 the first sample time.
DecayFitResult fit_decay(const Eigen::VectorXd& t_s, const Eigen::VectorXd& values);

// ---------------------------------------------------------------------------
// SNR and identification

struct SnrReport {
  double peak_height = 0;
  double baseline_sigma = 0;
  double snr = 0;
  WavelengthWindow peak_window;
  WavelengthWindow noise_window;
};

// (max in peak window - median of noise window) / (1.4826 MAD of noise window)
SnrReport snr(const Eigen::VectorXd& wavelengths_nm, const Eigen::VectorXd& values,
              WavelengthWindow peak_window, WavelengthWindow noise_window);
SnrReport snr(const SpectrumSamples& spectrum, WavelengthWindow peak_window,
              WavelengthWindow noise_window);
// Uses the phase-corrected real part. Its noise is zero mean, unlike |FT|
// whose Rayleigh floor inflates the peak against a MAD-based sigma.
SnrReport snr(const ReconstructedSpectrum& spectrum, WavelengthWindow peak_window,
              WavelengthWindow noise_window);

struct EmitterMatch {
  std::string name;
  double zpl_nm = 0;
  double distance_nm = 0;
};

// Entries with a ZPL within tolerance of the center, nearest first.
std::vector<EmitterMatch> identify_emitter(double center_nm, const EmitterLibrary& library,
                                           double tolerance_nm);
std::vector<EmitterMatch> identify_emitter(const PeakFitResult& fit, const EmitterLibrary& library,
                                           double tolerance_nm);

// name=value records
std::string format_peak_fit(const PeakFitResult& fit);
std::string format_rabi_fit(const RabiFitResult& fit);
std::string format_decay_fit(const DecayFitResult& fit);
std::string format_snr(const SnrReport& report);
std::string format_matches(const std::vector<EmitterMatch>& matches);

}  // namespace ftpl
