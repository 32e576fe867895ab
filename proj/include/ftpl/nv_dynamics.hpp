#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

namespace ftpl {

// Level order used by every population vector below.
enum NvLevel : int { kG0 = 0, kG1 = 1, kE0 = 2, kE1 = 3, kSA = 4, kSB = 5 };
inline constexpr int kNvLevels = 6;

template <typename Scalar>
using NvPopulations = Eigen::Matrix<Scalar, kNvLevels, 1>;
template <typename Scalar>
using NvGenerator = Eigen::Matrix<Scalar, kNvLevels, kNvLevels>;

using Populations = NvPopulations<double>;

// Configuration defaults, not measured values: picked to respect a ~13 ns
// triplet lifetime, singlet-to-ground rates <= 1 MHz and k_es1 > k_es0.
struct NvRateModel {
  double k_exc = 2e6;   // pump g -> e, spin conserving
  double k_ge0 = 6.5e7; // e0 -> g0, visible
  double k_ge1 = 6.5e7; // e1 -> g1, visible
  double k_es0 = 1.1e7; // e0 -> sA
  double k_es1 = 8.0e7; // e1 -> sA
  double k_s = 1e9;     // sA -> sB, 1042 nm line
  double k_sg0 = 1e6;   // sB -> g0
  double k_sg1 = 0.4e6; // sB -> g1
};

void validate(const NvRateModel& model);

// Column j holds the outflow of level j: off-diagonals >= 0, columns sum to 0.
template <typename Scalar>
NvGenerator<Scalar> rate_matrix(const NvRateModel& m, bool laser_on) {
  NvGenerator<Scalar> g = NvGenerator<Scalar>::Zero();
  auto link = [&g](int from, int to, double rate) {
    g(to, from) += Scalar(rate);
    g(from, from) -= Scalar(rate);
  };
  if (laser_on) {
    link(kG0, kE0, m.k_exc);
    link(kG1, kE1, m.k_exc);
  }
  link(kE0, kG0, m.k_ge0);
  link(kE1, kG1, m.k_ge1);
  link(kE0, kSA, m.k_es0);
  link(kE1, kSA, m.k_es1);
  link(kSA, kSB, m.k_s);
  link(kSB, kG0, m.k_sg0);
  link(kSB, kG1, m.k_sg1);
  return g;
}

// Exact evolution exp(M t) p. Throws NumericalError if the result leaves the
// probability simplex by more than numerical slack.
Populations evolve(const Populations& state, const NvRateModel& model, bool laser_on, double t_s);

Populations apply_pi_pulse(const Populations& state);
// Partial ground-state rotation: transfer probability sin^2(angle / 2).
Populations apply_rotation(const Populations& state, double angle_rad);

// (visible, infrared) photon emission rates per emitter.
std::pair<double, double> emission_rates(const Populations& state, const NvRateModel& model);

Populations ground_state(int spin);  // all population in g0 or g1
// Unique stationary state under continuous illumination (needs k_exc > 0).
Populations steady_state(const NvRateModel& model);

// ---------------------------------------------------------------------------
// Pulse sequences

enum class Microwave { Off, PiPulse, Rotation };

struct PulseSegment {
  double duration_s = 0;
  bool laser = false;
  Microwave mw = Microwave::Off;
  double rotation_rad = 0;  // used by Microwave::Rotation
};

// Microwave actions are instantaneous and applied at the end of their segment.
struct PulseSequence {
  std::vector<PulseSegment> segments;
  double period() const;
};

void validate(const PulseSequence& seq);

// 15 us laser, 6.793 us dark, 207 ns dark (spin 0) or pi pulse (spin 1).
PulseSequence default_sequence(int spin);

// State at the start of the sequence after infinitely many repetitions.
Populations periodic_state(const NvRateModel& model, const PulseSequence& seq);

struct EmissionTrace {
  Eigen::VectorXd bin_start_s;
  Eigen::VectorXd vis;  // bin-averaged photons/s
  Eigen::VectorXd ir;
};

// Bin-averaged emission rates over [0, n_bins * bin) of the sequence, starting
// from `start` at the beginning of the first segment.
EmissionTrace sequence_emission(const NvRateModel& model, const PulseSequence& seq,
                                const Populations& start, double bin_s, Eigen::Index n_bins);
// Same, starting from the periodic state.
EmissionTrace sequence_emission(const NvRateModel& model, const PulseSequence& seq, double bin_s,
                                Eigen::Index n_bins);

// Emission under constant illumination from a prepared state, sampled at t.
EmissionTrace pumped_transient(const NvRateModel& model, const Populations& start,
                               const Eigen::VectorXd& t_s);

// First time after the extremum at which |trace| drops to 1/e of it (linear
// interpolation). Throws DataError if it never does.
double one_over_e_time(const Eigen::VectorXd& t_s, const Eigen::VectorXd& trace);

// ---------------------------------------------------------------------------
// Phenomenological ODMR

struct OdmrResonance {
  double frequency_mhz = 0;
  double contrast = 0;
  double linewidth_mhz = 0;
};

struct OdmrTrace {
  Eigen::VectorXd frequencies_mhz;
  Eigen::VectorXd vis;
  Eigen::VectorXd ir;
  double ir_gain = 0;  // relative IR rise per relative VIS dip
};

// Relative IR increase per relative VIS decrease when ground spins are mixed
// under continuous illumination.
double ir_to_vis_contrast_ratio(const NvRateModel& model);

OdmrTrace simulate_odmr(const NvRateModel& model, const std::vector<OdmrResonance>& resonances,
                        const Eigen::VectorXd& sweep_mhz);

// D -/+ gamma * B for a field along the NV axis.
std::pair<double, double> aligned_field_resonances_mhz(double field_gauss,
                                                       double zero_field_mhz = 2870.0,
                                                       double gyromagnetic_mhz_per_g = 2.8025);

// ---------------------------------------------------------------------------
// Rabi

struct RabiTrace {
  Eigen::VectorXd durations_s;
  Eigen::VectorXd transfer;  // population moved to m_s = 1
  Eigen::VectorXd vis;       // normalized to the undriven readout
  Eigen::VectorXd ir;
};

// Damped two-level transfer 1/2 [1 - cos(pi tau / t_pi) exp(-tau / t2*)],
// read out optically from the pumped start state over `readout_s`.
RabiTrace simulate_rabi(const NvRateModel& model, double t_pi_s, double t2_star_s,
                        const Eigen::VectorXd& durations_s, double readout_s = 1e-6);

// t, p_g0..p_sB, vis_rate, ir_rate
std::string format_trajectory(const Eigen::VectorXd& t_s, const std::vector<Populations>& states,
                              const NvRateModel& model);

}  // namespace ftpl
