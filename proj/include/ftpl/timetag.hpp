#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ftpl/detectors.hpp"
#include "ftpl/nv_dynamics.hpp"
#include "ftpl/reconstruction.hpp"
#include "ftpl/spectral_model.hpp"
#include "ftpl/twins.hpp"

namespace ftpl {

// ---------------------------------------------------------------------------
// Photon budget

struct PhotonBudget {
  double photons_per_bin_per_pulse = 0;
  double reps_needed = 0;
};

PhotonBudget photon_budget(double brightness_cps, double pulse_len_s, double bin_s,
                           double target_counts);

// Pure sequence time n_steps * n_reps * period (no motor or readout overhead).
double sequence_time_s(double n_steps, double n_reps, double period_s);

// ---------------------------------------------------------------------------
// Binary time-tag stream

inline constexpr std::uint16_t kMarkerFlag = 0x1;

struct TimeTagRecord {
  std::uint64_t timestamp_ps = 0;
  std::uint16_t channel = 0;
  std::uint16_t flags = 0;

  bool marker() const { return (flags & kMarkerFlag) != 0; }
  bool operator==(const TimeTagRecord&) const = default;
};

struct TimeTagStream {
  std::uint16_t channel_count = 1;
  std::string comment;
  std::vector<TimeTagRecord> records;
  std::size_t truncated_records = 0;  // warning: partial trailing record dropped
};

// "TTAG", u32 version 1, u16 channels, u16 reserved, u32 comment length,
// comment bytes, then 12-byte records (u64 ps, u16 channel, u16 flags), all
// little endian.
std::string write_timetag_stream(const TimeTagStream& stream);
TimeTagStream parse_timetag_stream(std::string_view bytes);

// ---------------------------------------------------------------------------
// Binned counts

// counts[c] is an (n_steps x n_bins) matrix for channel c. Sampled data hold
// integers; Expectation mode holds means.
struct BinnedCounts {
  std::vector<std::string> channels;
  std::vector<Eigen::MatrixXd> counts;
  Eigen::VectorXd positions_mm;
  double bin_s = 0;
  std::int64_t n_reps = 0;

  Eigen::Index n_steps() const { return counts.empty() ? 0 : counts.front().rows(); }
  Eigen::Index n_bins() const { return counts.empty() ? 0 : counts.front().cols(); }
  std::size_t channel_index(const std::string& name) const;
};

// One interferometer step: photon records binned by their phase within the
// sequence. A marker record restarts the phase; markers are not counted.
BinnedCounts bin_records(const std::vector<TimeTagRecord>& records, double sequence_period_s,
                         double bin_s, Eigen::Index n_bins, std::uint16_t channel_count);

// ---------------------------------------------------------------------------
// Time-resolved acquisition simulation

enum class NvEmission { Visible, Singlet };
enum class AcquisitionMode { Expectation, Sampling };

// A spectral profile whose photon rate follows one NV emission pathway.
// profile.total_brightness is its mean detected-equivalent rate over the
// spin-0 sequence.
struct ChannelComponent {
  EmitterSpectrum profile;
  NvEmission source = NvEmission::Visible;
};

struct DetectionChannel {
  std::string name;
  std::vector<ChannelComponent> components;
  PhotonCounterModel counter{};
};

struct TimeResolvedSetup {
  NvRateModel nv{};
  PulseSequence seq0 = default_sequence(0);
  PulseSequence seq1 = default_sequence(1);
  std::vector<DetectionChannel> channels;
  TwinsModel twins{};
  ScanSchedule schedule;
  std::int64_t n_reps = 10000;
  double bin_s = 10e-9;
  Eigen::Index n_bins = 1500;
  SpectralGrid grid = SpectralGrid::from_wavelengths(450.0, 1300.0, 4001);
  AcquisitionMode mode = AcquisitionMode::Expectation;
  std::uint64_t seed = 0;
  double max_sequence_time_s = 86400.0;  // refuse runs above this
};

void validate(const TimeResolvedSetup& setup);

// Scaled-down spin-resolved run: 128 one-sided steps of 0.01 mm, 1e4
// repetitions, 10 ns bins over the 15 us laser pulse; a visible triplet
// channel and an infrared channel with the 1042 nm line plus a leaked tail.
TimeResolvedSetup desk_scale_setup();

struct TimeResolvedCounts {
  BinnedCounts spin0;
  BinnedCounts spin1;
};

TimeResolvedCounts simulate_timeresolved_acquisition(const TimeResolvedSetup& setup);

// Records for one step of sampled counts: each count gets a uniform time in
// its bin, a uniform repetition index and Gaussian jitter. A marker opens
// every repetition.
TimeTagStream sampled_timetags(const BinnedCounts& counts, Eigen::Index step,
                               double sequence_period_s, double jitter_fwhm_ps,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Time-resolved spectra and difference maps

struct TimeResolvedSpectrum {
  Eigen::VectorXd wavelengths_nm;  // increasing
  Eigen::VectorXd time_s;          // bin starts
  Eigen::MatrixXd y;               // (wavelength x time), signed amplitude
  int spin = 0;
  std::string channel;
};

struct BandWindow {
  std::string name;
  double lo_nm = 0;
  double hi_nm = 0;
};

struct DifferenceMap {
  Eigen::VectorXd wavelengths_nm;
  Eigen::VectorXd time_s;
  Eigen::MatrixXd delta;  // y0 - y1
  std::map<std::string, Eigen::VectorXd> band_integrals;
  std::string channel;
};

struct WavelengthCrop {
  double lo_nm = 0;
  double hi_nm = std::numeric_limits<double>::infinity();
};

TimeResolvedSpectrum time_resolved_spectrum(const BinnedCounts& counts, const std::string& channel,
                                            const TwinsModel& twins, const ReconstructionConfig& cfg,
                                            int spin, WavelengthCrop crop = {});

DifferenceMap build_difference_map(const BinnedCounts& b0, const BinnedCounts& b1,
                                   const std::string& channel, const TwinsModel& twins,
                                   const ReconstructionConfig& cfg,
                                   const std::vector<BandWindow>& bands, WavelengthCrop crop = {});

// Long format: wavelength_nm,time_ns,delta
std::string format_difference_map(const DifferenceMap& map);
// time_ns followed by one column per band
std::string format_band_traces(const DifferenceMap& map);

}  // namespace ftpl
