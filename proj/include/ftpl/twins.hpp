#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ftpl/detectors.hpp"
#include "ftpl/spectral_model.hpp"

namespace ftpl {

// Birefringence of the wedge material. Constant by default; a table switches
// the model to dispersive mode where every optical frequency gets its own
// delay. Tables are linearly interpolated and never extrapolated.
struct Birefringence {
  double constant = 0.1224;  // alpha-BBO near 600 nm
  std::vector<double> wavelengths_nm;
  std::vector<double> values;

  bool dispersive() const { return !wavelengths_nm.empty(); }
  double at(double wavelength_nm) const;
};

// Translating-wedge birefringent interferometer. The fixed compensating
// plate only shows up through zero_delay_position_mm.
struct TwinsModel {
  double apex_angle_deg = 10.0;
  double travel_max_mm = 28.0;
  Birefringence birefringence{};
  double visibility = 1.0;
  double zero_delay_position_mm = 14.0;

  double sin_apex() const;
};

void validate(const Birefringence& dn);
void validate(const TwinsModel& model);

struct ScanSchedule {
  Eigen::VectorXd positions_mm;
  double dwell_s = 0;
  double motor_overhead_s = 0;

  Eigen::Index size() const { return positions_mm.size(); }
  double step_mm() const { return positions_mm(1) - positions_mm(0); }

  static ScanSchedule uniform(double start_mm, double step_mm, Eigen::Index n_steps,
                              double dwell_s, double motor_overhead_s = 0);
  // n_steps positions spanning [center - half_range, center + half_range].
  static ScanSchedule symmetric(double center_mm, double half_range_mm, Eigen::Index n_steps,
                                double dwell_s, double motor_overhead_s = 0);
};

void validate(const ScanSchedule& schedule);
void validate(const ScanSchedule& schedule, const TwinsModel& model);  // also checks travel

// counts holds integer values for sampled data and real expectations when an
// interferogram is built from means.
struct Interferogram {
  Eigen::VectorXd positions_mm;
  Eigen::VectorXd counts;
  double dwell_s = 0;
  std::string channel = "FT";
  ScanSchedule schedule;
  TwinsModel model;
  std::uint64_t seed = 0;
};

// Signed replica delay (s): dn(lambda) * (x - x0) * sin(alpha) / c.
double delay_at(const TwinsModel& model, double x_mm, double lambda_nm);

// Delay per mm of wedge travel at a given wavelength (s/mm).
double delay_per_mm(const TwinsModel& model, double lambda_nm);

// Instrument resolution: 0.605 lambda^2 / (dn * x_max * sin alpha), with
// x_max the one-sided excursion from zero delay.
double resolution_at(const TwinsModel& model, double lambda_nm, double x_max_effective_mm);

// Wall time of a scan: n_steps * (dwell + motor_overhead).
double schedule_duration(const ScanSchedule& schedule);

// Single per-step overhead that best explains measured scan totals, fitted
// on relative residuals so short and long scans weigh equally.
double fit_motor_overhead(Eigen::Index n_steps, const Eigen::VectorXd& dwell_s,
                          const Eigen::VectorXd& total_s);

// Mean detected count rate (counts/s) at each position, including the dark
// rate and the counter saturation clip:
//   R(x) = N_d + 1/2 sum_k eta(f_k) S(f_k) w_k [1 + V cos(2 pi f_k tau(x, f_k))]
Eigen::VectorXd expected_interferogram_rates(const EmitterSpectrum& spectrum,
                                             const SpectralGrid& grid, const TwinsModel& model,
                                             const PhotonCounterModel& counter,
                                             const Eigen::VectorXd& positions_mm);

// Same, from an already discretized detected-photon density (photons/s/Hz,
// efficiency applied), without dark counts or saturation.
Eigen::VectorXd interference_rates(const Eigen::VectorXd& detected_density,
                                   const SpectralGrid& grid, const TwinsModel& model,
                                   const Eigen::VectorXd& positions_mm);

// Poisson-samples counts from mean rates; position j draws from stream j.
Interferogram sample_interferogram(const Eigen::VectorXd& rates, const ScanSchedule& schedule,
                                   const TwinsModel& model, std::uint64_t seed);

Interferogram synthesize_interferogram(const EmitterSpectrum& spectrum, const SpectralGrid& grid,
                                       const TwinsModel& model, const PhotonCounterModel& counter,
                                       const ScanSchedule& schedule, std::uint64_t seed);

// Short stable hash of the model parameters (first 16 hex digits of SHA-256).
std::string model_hash(const TwinsModel& model);

// Two-column text table (position_mm, counts) with a commented metadata header.
std::string format_interferogram(const Interferogram& ig);
Interferogram parse_interferogram(const std::string& text);

}  // namespace ftpl
