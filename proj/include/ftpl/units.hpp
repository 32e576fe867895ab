#pragma once

#include <cmath>
#include <concepts>
#include <numbers>

namespace ftpl {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

// Optical frequency (Hz) <-> vacuum wavelength (nm).
template <std::floating_point Scalar>
constexpr Scalar nm_to_hz(Scalar wavelength_nm) {
  return Scalar(kSpeedOfLight) / (wavelength_nm * Scalar(1e-9));
}

template <std::floating_point Scalar>
constexpr Scalar hz_to_nm(Scalar frequency_hz) {
  return Scalar(kSpeedOfLight) / frequency_hz * Scalar(1e9);
}

// Linewidth conversion around a center wavelength, first order in dlambda.
template <std::floating_point Scalar>
constexpr Scalar fwhm_nm_to_hz(Scalar fwhm_nm, Scalar center_nm) {
  return Scalar(kSpeedOfLight) * fwhm_nm * Scalar(1e-9) /
         (center_nm * center_nm * Scalar(1e-18));
}

template <std::floating_point Scalar>
constexpr Scalar fwhm_hz_to_nm(Scalar fwhm_hz, Scalar center_nm) {
  return fwhm_hz * center_nm * center_nm * Scalar(1e-9) / Scalar(kSpeedOfLight);
}

template <std::floating_point Scalar>
constexpr Scalar deg_to_rad(Scalar degrees) {
  return degrees * std::numbers::pi_v<Scalar> / Scalar(180);
}

// Integer arguments (nm_to_hz(1131)) must not deduce an integer Scalar.
inline constexpr double nm_to_hz(double wavelength_nm) { return nm_to_hz<double>(wavelength_nm); }
inline constexpr double hz_to_nm(double frequency_hz) { return hz_to_nm<double>(frequency_hz); }
inline constexpr double fwhm_nm_to_hz(double fwhm_nm, double center_nm) {
  return fwhm_nm_to_hz<double>(fwhm_nm, center_nm);
}
inline constexpr double fwhm_hz_to_nm(double fwhm_hz, double center_nm) {
  return fwhm_hz_to_nm<double>(fwhm_hz, center_nm);
}
inline constexpr double deg_to_rad(double degrees) { return deg_to_rad<double>(degrees); }

// FWHM = 2 sqrt(2 ln 2) sigma
inline constexpr double kFwhmPerSigma = 2.3548200450309493;

}  // namespace ftpl
