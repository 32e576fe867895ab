#include "ftpl/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "ftpl/errors.hpp"
#include "ftpl/random.hpp"
#include "ftpl/text_io.hpp"

namespace ftpl {

PhotonBudget photon_budget(double brightness_cps, double pulse_len_s, double bin_s,
                           double target_counts) {
  require(brightness_cps > 0 && pulse_len_s > 0 && bin_s > 0,
          "photon budget needs positive brightness, pulse length and bin");
  require(target_counts >= 0, "target counts must be >= 0");
  require(bin_s <= pulse_len_s, "bin longer than the pulse");
  PhotonBudget b;
  b.photons_per_bin_per_pulse = brightness_cps * bin_s;
  // The guard keeps 100 / 5e-5 from rounding up to 2e6 + 1.
  b.reps_needed = target_counts == 0
                      ? 0.0
                      : std::ceil(target_counts / b.photons_per_bin_per_pulse * (1.0 - 1e-12));
  return b;
}

double sequence_time_s(double n_steps, double n_reps, double period_s) {
  require(n_steps >= 0 && n_reps >= 0 && period_s > 0, "sequence accounting needs valid inputs");
  return n_steps * n_reps * period_s;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'T', 'A', 'G'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderFixed = 16;
constexpr std::size_t kRecordBytes = 12;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(char((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= T(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

std::int64_t to_ps(double seconds) { return std::llround(seconds * 1e12); }

}  // namespace

std::string write_timetag_stream(const TimeTagStream& stream) {
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint16_t>(out, stream.channel_count);
  put_le<std::uint16_t>(out, 0);
  put_le<std::uint32_t>(out, std::uint32_t(stream.comment.size()));
  out += stream.comment;
  out.reserve(out.size() + stream.records.size() * kRecordBytes);
  for (const auto& r : stream.records) {
    put_le<std::uint64_t>(out, r.timestamp_ps);
    put_le<std::uint16_t>(out, r.channel);
    put_le<std::uint16_t>(out, r.flags);
  }
  return out;
}

TimeTagStream parse_timetag_stream(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("not a time-tag stream: expected magic \"TTAG\"");
  if (bytes.size() < kHeaderFixed) throw FormatError("time-tag header is truncated");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kVersion)
    throw FormatError("unsupported time-tag version " + std::to_string(version));
  TimeTagStream s;
  s.channel_count = get_le<std::uint16_t>(bytes, 8);
  const auto comment_len = get_le<std::uint32_t>(bytes, 12);
  if (bytes.size() - kHeaderFixed < comment_len)
    throw FormatError("time-tag comment runs past the end of the stream");
  s.comment = std::string(bytes.substr(kHeaderFixed, comment_len));

  const std::size_t body = kHeaderFixed + comment_len;
  const std::size_t n = (bytes.size() - body) / kRecordBytes;
  s.truncated_records = (bytes.size() - body) % kRecordBytes ? 1 : 0;
  s.records.reserve(n);
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = body + i * kRecordBytes;
    TimeTagRecord r{get_le<std::uint64_t>(bytes, at), get_le<std::uint16_t>(bytes, at + 8),
                    get_le<std::uint16_t>(bytes, at + 10)};
    if (r.timestamp_ps < last)
      throw IntegrityError("timestamp regression at byte offset " + std::to_string(at), at);
    if (r.channel >= s.channel_count)
      throw IntegrityError("undeclared channel " + std::to_string(r.channel) +
                               " at byte offset " + std::to_string(at),
                           at);
    last = r.timestamp_ps;
    s.records.push_back(r);
  }
  return s;
}

// ---------------------------------------------------------------------------

std::size_t BinnedCounts::channel_index(const std::string& name) const {
  const auto it = std::find(channels.begin(), channels.end(), name);
  if (it == channels.end()) throw ConfigError("no channel named '" + name + "'");
  return std::size_t(it - channels.begin());
}

BinnedCounts bin_records(const std::vector<TimeTagRecord>& records, double sequence_period_s,
                         double bin_s, Eigen::Index n_bins, std::uint16_t channel_count) {
  require(sequence_period_s > 0 && bin_s > 0 && n_bins > 0, "binning needs positive inputs");
  const std::int64_t period_ps = to_ps(sequence_period_s);
  const std::int64_t bin_ps = to_ps(bin_s);
  require(bin_ps > 0 && bin_ps * n_bins <= period_ps, "bins must fit inside the sequence period");

  BinnedCounts out;
  out.bin_s = bin_s;
  for (std::uint16_t c = 0; c < channel_count; ++c) {
    out.channels.push_back("ch" + std::to_string(c));
    out.counts.push_back(Eigen::MatrixXd::Zero(1, n_bins));
  }
  std::uint64_t phase_origin = 0;
  std::int64_t markers = 0;
  for (const auto& r : records) {
    if (r.marker()) {
      phase_origin = r.timestamp_ps;
      ++markers;
      continue;
    }
    if (r.channel >= channel_count) throw DataError("record on undeclared channel");
    if (r.timestamp_ps < phase_origin) throw DataError("record precedes its sequence marker");
    const auto phase = std::int64_t((r.timestamp_ps - phase_origin) % std::uint64_t(period_ps));
    const std::int64_t b = phase / bin_ps;
    if (b < n_bins) out.counts[r.channel](0, b) += 1.0;
  }
  out.n_reps = markers;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Per-photon/s interferogram response of one profile: detected rate at each
// position for a source emitting 1 photon/s with this spectral shape.
Eigen::VectorXd unit_response(const EmitterSpectrum& profile, const SpectralGrid& grid,
                              const TwinsModel& twins, const PhotonCounterModel& counter,
                              const Eigen::VectorXd& positions_mm) {
  PhotonCounterModel no_offsets = counter;
  no_offsets.dark_cps = 0;
  no_offsets.saturation_cps = std::numeric_limits<double>::infinity();
  EmitterSpectrum unit = profile;
  unit.total_brightness = 1.0;
  return expected_interferogram_rates(unit, grid, twins, no_offsets, positions_mm);
}

Eigen::VectorXd source_trace(const EmissionTrace& t, NvEmission source) {
  return source == NvEmission::Visible ? t.vis : t.ir;
}

// Gaussian timing blur over the bin axis; edges renormalized.
Eigen::VectorXd jitter_blur(const Eigen::VectorXd& trace, double bin_s, double jitter_fwhm_ps) {
  const double sigma_bins = jitter_fwhm_ps * 1e-12 / kFwhmPerSigma / bin_s;
  if (!(sigma_bins > 0)) return trace;
  const auto reach = static_cast<Eigen::Index>(std::ceil(4 * sigma_bins));
  Eigen::VectorXd out(trace.size());
  for (Eigen::Index b = 0; b < trace.size(); ++b) {
    double acc = 0, norm = 0;
    for (Eigen::Index d = -reach; d <= reach; ++d) {
      const Eigen::Index k = b + d;
      if (k < 0 || k >= trace.size()) continue;
      const double w = std::exp(-0.5 * double(d * d) / (sigma_bins * sigma_bins));
      acc += w * trace(k);
      norm += w;
    }
    out(b) = acc / norm;
  }
  return out;
}

}  // namespace

void validate(const TimeResolvedSetup& s) {
  validate(s.nv);
  validate(s.seq0);
  validate(s.seq1);
  validate(s.twins);
  validate(s.schedule, s.twins);
  validate(s.grid);
  require(s.n_reps >= 0, "n_reps must be >= 0");
  require(s.bin_s > 0 && s.n_bins > 0, "time bins must be positive");
  const double window = s.bin_s * double(s.n_bins);
  require(window <= s.seq0.period() * (1 + 1e-12) && window <= s.seq1.period() * (1 + 1e-12),
          "time bins extend past the sequence period");
  if (s.channels.empty()) throw ConfigError("time-resolved setup declares no detection channels");
  std::set<std::string> names;
  for (const auto& ch : s.channels) {
    if (ch.name.empty() || !names.insert(ch.name).second)
      throw ConfigError("detection channel names must be unique and non-empty");
    if (ch.components.empty())
      throw ConfigError("detection channel '" + ch.name + "' has no spectral profile");
    validate(ch.counter);
    require(s.bin_s * 1e12 >= ch.counter.jitter_fwhm_ps,
            "time bin is shorter than the detector jitter on '" + ch.name + "'");
    for (const auto& c : ch.components) validate(c.profile);
  }
  // Sequence-only time, same accounting as the full-scale dry run.
  const double seq_time = sequence_time_s(double(s.schedule.size()), double(s.n_reps), s.seq0.period());
  if (seq_time > s.max_sequence_time_s) {
    std::ostringstream os;
    os << "run needs " << seq_time << " s of sequence time, above the cap of "
       << s.max_sequence_time_s << " s";
    throw ParameterError(os.str());
  }
}

TimeResolvedSetup desk_scale_setup() {
  TimeResolvedSetup s;
  s.schedule = ScanSchedule::uniform(s.twins.zero_delay_position_mm, 0.01, 128,
                                     double(s.n_reps) * s.seq0.period());

  // Triplet emission: 637 nm line on a broad sideband.
  EmitterSpectrum vis = build_divacancy_spectrum(637.0, fwhm_nm_to_hz(1.0, 637.0), 700.0,
                                                 fwhm_nm_to_hz(100.0, 700.0), 0.03, 1e6);
  vis.name = "nv-triplet";
  EmitterSpectrum line;
  line.name = "nv-singlet";
  line.total_brightness = 2e3;
  line.components = {{LineShape::Lorentzian, 1042.0, fwhm_nm_to_hz(1.0, 1042.0), 1.0}};
  // Long-wavelength end of the triplet sideband leaking through the IR filter.
  EmitterSpectrum tail;
  tail.name = "triplet-tail";
  tail.total_brightness = 2e3;
  tail.components = {{LineShape::Gaussian, 960.0, fwhm_nm_to_hz(60.0, 960.0), 1.0}};

  s.channels.push_back({"VIS", {{vis, NvEmission::Visible}}, {}});
  s.channels.push_back({"IR", {{line, NvEmission::Singlet}, {tail, NvEmission::Visible}}, {}});
  return s;
}

TimeResolvedCounts simulate_timeresolved_acquisition(const TimeResolvedSetup& setup) {
  validate(setup);
  const NvRateModel& nv = setup.nv;
  const EmissionTrace mean0 = sequence_emission(nv, setup.seq0, setup.seq0.period(), 1);
  const EmissionTrace trace[2] = {sequence_emission(nv, setup.seq0, setup.bin_s, setup.n_bins),
                                  sequence_emission(nv, setup.seq1, setup.bin_s, setup.n_bins)};
  const Eigen::VectorXd& x = setup.schedule.positions_mm;
  const double scale = double(setup.n_reps) * setup.bin_s;

  TimeResolvedCounts out;
  BinnedCounts* dest[2] = {&out.spin0, &out.spin1};
  for (int spin = 0; spin < 2; ++spin) {
    dest[spin]->bin_s = setup.bin_s;
    dest[spin]->n_reps = setup.n_reps;
    dest[spin]->positions_mm = x;
  }

  for (std::size_t c = 0; c < setup.channels.size(); ++c) {
    const DetectionChannel& ch = setup.channels[c];
    const bool blur = setup.bin_s < 10 * ch.counter.jitter_fwhm_ps * 1e-12;
    std::vector<Eigen::VectorXd> response;
    for (const auto& comp : ch.components)
      response.push_back(unit_response(comp.profile, setup.grid, setup.twins, ch.counter, x));

    for (int spin = 0; spin < 2; ++spin) {
      Eigen::MatrixXd rate = Eigen::MatrixXd::Constant(x.size(), setup.n_bins, ch.counter.dark_cps);
      for (std::size_t p = 0; p < ch.components.size(); ++p) {
        const auto& comp = ch.components[p];
        const double norm = source_trace(mean0, comp.source)(0);
        if (!(norm > 0)) throw NumericalError("NV source emits nothing over the spin-0 sequence");
        Eigen::VectorXd r = source_trace(trace[spin], comp.source) / norm;
        if (blur) r = jitter_blur(r, setup.bin_s, ch.counter.jitter_fwhm_ps);
        rate.noalias() += comp.profile.total_brightness * response[p] * r.transpose();
      }
      Eigen::MatrixXd mean = rate.cwiseMin(ch.counter.saturation_cps) * scale;
      if (setup.mode == AcquisitionMode::Sampling) {
        for (Eigen::Index j = 0; j < mean.rows(); ++j) {
          auto rng = make_rng(setup.seed, (std::uint64_t(spin) * setup.channels.size() + c) *
                                              std::uint64_t(mean.rows()) + std::uint64_t(j));
          for (Eigen::Index b = 0; b < mean.cols(); ++b) mean(j, b) = double(poisson_draw(rng, mean(j, b)));
        }
      }
      dest[spin]->channels.push_back(ch.name);
      dest[spin]->counts.push_back(std::move(mean));
    }
  }
  return out;
}

TimeTagStream sampled_timetags(const BinnedCounts& counts, Eigen::Index step,
                               double sequence_period_s, double jitter_fwhm_ps, std::uint64_t seed) {
  require(step >= 0 && step < counts.n_steps(), "step index out of range");
  require(counts.n_reps > 0, "stream needs at least one repetition");
  require(counts.channels.size() <= 0xffff, "too many channels");
  const std::int64_t period_ps = to_ps(sequence_period_s);
  const std::int64_t bin_ps = to_ps(counts.bin_s);
  require(bin_ps * counts.n_bins() <= period_ps, "bins must fit inside the sequence period");

  auto rng = make_rng(seed, std::uint64_t(step));
  std::uniform_int_distribution<std::int64_t> rep_of(0, counts.n_reps - 1);
  std::normal_distribution<double> jitter(0.0, jitter_fwhm_ps / kFwhmPerSigma);

  TimeTagStream s;
  s.channel_count = std::uint16_t(counts.channels.size());
  s.comment = "sampled step " + std::to_string(step);
  for (std::int64_t r = 0; r < counts.n_reps; ++r)
    s.records.push_back({std::uint64_t(r * period_ps), 0, kMarkerFlag});
  for (std::size_t c = 0; c < counts.channels.size(); ++c) {
    for (Eigen::Index b = 0; b < counts.n_bins(); ++b) {
      const double k = counts.counts[c](step, b);
      if (k != std::floor(k) || k < 0) throw DataError("time tags need integer (sampled) counts");
      std::uniform_int_distribution<std::int64_t> in_bin(b * bin_ps, (b + 1) * bin_ps - 1);
      for (std::int64_t i = 0; i < std::int64_t(k); ++i) {
        std::int64_t t = in_bin(rng);
        if (jitter_fwhm_ps > 0) t += std::llround(jitter(rng));
        t = std::clamp<std::int64_t>(t, 0, period_ps - 1);  // stay inside the repetition
        s.records.push_back({std::uint64_t(rep_of(rng) * period_ps + t), std::uint16_t(c), 0});
      }
    }
  }
  // Markers sort ahead of photons sharing their timestamp.
  std::stable_sort(s.records.begin(), s.records.end(), [](const auto& a, const auto& b) {
    if (a.timestamp_ps != b.timestamp_ps) return a.timestamp_ps < b.timestamp_ps;
    return a.marker() && !b.marker();
  });
  return s;
}

// ---------------------------------------------------------------------------

TimeResolvedSpectrum time_resolved_spectrum(const BinnedCounts& counts, const std::string& channel,
                                            const TwinsModel& twins, const ReconstructionConfig& cfg,
                                            int spin, WavelengthCrop crop) {
  const std::size_t c = counts.channel_index(channel);
  if (counts.positions_mm.size() != counts.n_steps())
    throw DataError("binned counts lack interferometer positions");
  TimeResolvedSpectrum out;
  out.spin = spin;
  out.channel = channel;
  out.time_s = Eigen::VectorXd::LinSpaced(counts.n_bins(), 0.0,
                                          double(counts.n_bins() - 1) * counts.bin_s);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index b = 0; b < counts.n_bins(); ++b) {
    const ReconstructedSpectrum spec =
        reconstruct(counts.positions_mm, counts.counts[c].col(b), twins, cfg);
    if (b == 0) {
      const Eigen::VectorXd wl = spec.wavelengths_nm();
      for (Eigen::Index i = wl.size() - 1; i >= 0; --i)
        if (wl(i) >= crop.lo_nm && wl(i) <= crop.hi_nm) keep.push_back(i);
      if (keep.empty()) throw DataError("wavelength crop leaves no spectral bins");
      out.wavelengths_nm.resize(Eigen::Index(keep.size()));
      for (std::size_t k = 0; k < keep.size(); ++k) out.wavelengths_nm(Eigen::Index(k)) = wl(keep[k]);
      out.y.resize(Eigen::Index(keep.size()), counts.n_bins());
    }
    for (std::size_t k = 0; k < keep.size(); ++k)
      out.y(Eigen::Index(k), b) = spec.signed_amplitudes(keep[k]);
  }
  return out;
}

DifferenceMap build_difference_map(const BinnedCounts& b0, const BinnedCounts& b1,
                                   const std::string& channel, const TwinsModel& twins,
                                   const ReconstructionConfig& cfg,
                                   const std::vector<BandWindow>& bands, WavelengthCrop crop) {
  const std::size_t c0 = b0.channel_index(channel), c1 = b1.channel_index(channel);
  if (b0.counts[c0].rows() != b1.counts[c1].rows() || b0.counts[c0].cols() != b1.counts[c1].cols() ||
      b0.bin_s != b1.bin_s || b0.positions_mm != b1.positions_mm)
    throw DataError("spin datasets differ in shape, bin width or positions");
  const TimeResolvedSpectrum y0 = time_resolved_spectrum(b0, channel, twins, cfg, 0, crop);
  const TimeResolvedSpectrum y1 = time_resolved_spectrum(b1, channel, twins, cfg, 1, crop);

  DifferenceMap map;
  map.channel = channel;
  map.wavelengths_nm = y0.wavelengths_nm;
  map.time_s = y0.time_s;
  map.delta = y0.y - y1.y;
  for (const auto& band : bands) {
    require(band.hi_nm > band.lo_nm, "band window '" + band.name + "' is empty");
    Eigen::VectorXd trace = Eigen::VectorXd::Zero(map.time_s.size());
    for (Eigen::Index i = 0; i < map.wavelengths_nm.size(); ++i)
      if (map.wavelengths_nm(i) >= band.lo_nm && map.wavelengths_nm(i) <= band.hi_nm)
        trace += map.delta.row(i).transpose();
    map.band_integrals[band.name] = trace;
  }
  return map;
}

std::string format_difference_map(const DifferenceMap& map) {
  std::ostringstream os;
  os << "# channel=" << map.channel << '\n' << "wavelength_nm,time_ns,delta\n";
  for (Eigen::Index b = 0; b < map.time_s.size(); ++b)
    for (Eigen::Index i = 0; i < map.wavelengths_nm.size(); ++i)
      os << io::format_number(map.wavelengths_nm(i)) << ',' << io::format_number(map.time_s(b) * 1e9)
         << ',' << io::format_number(map.delta(i, b)) << '\n';
  return os.str();
}

std::string format_band_traces(const DifferenceMap& map) {
  std::ostringstream os;
  os << "# channel=" << map.channel << '\n' << "time_ns";
  for (const auto& [name, trace] : map.band_integrals) os << ',' << name;
  os << '\n';
  for (Eigen::Index b = 0; b < map.time_s.size(); ++b) {
    os << io::format_number(map.time_s(b) * 1e9);
    for (const auto& [name, trace] : map.band_integrals) os << ',' << io::format_number(trace(b));
    os << '\n';
  }
  return os.str();
}

}  // namespace ftpl
