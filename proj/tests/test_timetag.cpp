#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "ftpl/errors.hpp"
#include "ftpl/timetag.hpp"

using namespace ftpl;

namespace {

// Smaller than the desk preset so the unit suite stays quick.
TimeResolvedSetup small_setup(AcquisitionMode mode, std::uint64_t seed = 1) {
  TimeResolvedSetup s = desk_scale_setup();
  s.schedule = ScanSchedule::uniform(s.twins.zero_delay_position_mm, 0.01, 32, 1.0);
  s.n_reps = 2000;
  s.n_bins = 300;
  s.bin_s = 50e-9;
  s.mode = mode;
  s.seed = seed;
  return s;
}

void put_u32(std::string& bytes, std::size_t at, std::uint32_t v) { std::memcpy(&bytes[at], &v, 4); }

}  // namespace

TEST_SUITE("timetag") {

TEST_CASE("photon budget arithmetic") {
  const PhotonBudget b = photon_budget(1e6, 10e-6, 50e-12, 100);
  CHECK(b.photons_per_bin_per_pulse == doctest::Approx(5e-5).epsilon(1e-12));
  CHECK(b.reps_needed == 2e6);
  CHECK(photon_budget(1e6, 10e-6, 50e-12, 0).reps_needed == 0);
  const PhotonBudget d = photon_budget(1e6, 10e-6, 100e-12, 100);
  CHECK(d.photons_per_bin_per_pulse == doctest::Approx(2 * b.photons_per_bin_per_pulse));
  CHECK(d.reps_needed == 1e6);
  // 2930 steps x 1.6e7 reps x 22 us
  CHECK(sequence_time_s(2930, 1.6e7, 22e-6) / 86400 == doctest::Approx(11.94).epsilon(1e-3));
}

TEST_CASE("stream write then parse is bit exact") {
  TimeTagStream s;
  s.channel_count = 3;
  s.comment = "desk run";
  std::mt19937_64 rng(5);
  std::uint64_t t = 0;
  for (int i = 0; i < 5000; ++i) {
    t += rng() % 1000;
    s.records.push_back({t, std::uint16_t(rng() % 3), std::uint16_t(i % 17 == 0 ? kMarkerFlag : 0)});
  }
  const std::string bytes = write_timetag_stream(s);
  const TimeTagStream back = parse_timetag_stream(bytes);
  CHECK(back.records == s.records);
  CHECK(back.comment == s.comment);
  CHECK(back.channel_count == 3);
  CHECK(write_timetag_stream(back) == bytes);
}

TEST_CASE("stream edge cases and corruption") {
  TimeTagStream s;
  s.channel_count = 2;
  const std::string empty = write_timetag_stream(s);
  CHECK(parse_timetag_stream(empty).records.empty());

  s.records = {{10, 0, 0}, {20, 1, 0}, {15, 0, 0}};
  const std::string regress = write_timetag_stream(s);
  try {
    parse_timetag_stream(regress);
    FAIL("expected an integrity error");
  } catch (const IntegrityError& e) {
    CHECK(e.byte_offset() == empty.size() + 2 * 12);
  }

  s.records = {{10, 0, 0}, {20, 5, 0}};
  CHECK_THROWS_AS(parse_timetag_stream(write_timetag_stream(s)), IntegrityError);

  std::string bad = empty;
  bad[0] = 'X';
  try {
    parse_timetag_stream(bad);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("TTAG") != std::string::npos);
  }
  std::string version = empty;
  put_u32(version, 4, 7);
  CHECK_THROWS_AS(parse_timetag_stream(version), FormatError);

  s.records = {{10, 0, 0}};
  const std::string partial = write_timetag_stream(s) + "abc";
  CHECK(parse_timetag_stream(partial).truncated_records == 1);
}

TEST_CASE("binning conventions") {
  const double period = 1e-6, bin = 10e-9;
  CHECK(bin_records({{0, 0, 0}}, period, bin, 100, 1).counts[0](0, 0) == 1.0);
  // boundary goes to the higher bin
  CHECK(bin_records({{10000, 0, 0}}, period, bin, 100, 1).counts[0](0, 1) == 1.0);
  // markers restart the phase and are not counted
  const BinnedCounts b =
      bin_records({{0, 0, kMarkerFlag}, {500, 0, 0}, {777777, 0, kMarkerFlag}, {777777 + 25000, 0, 0}},
                  period, bin, 100, 1);
  CHECK(b.counts[0](0, 0) == 1.0);
  CHECK(b.counts[0](0, 2) == 1.0);
  CHECK(b.counts[0].sum() == 2.0);
  CHECK(b.n_reps == 2);
  CHECK(b.channel_index("ch0") == 0);
  CHECK_THROWS_AS(b.channel_index("VIS"), ConfigError);
}

TEST_CASE("uniform records fill bins uniformly and are all counted") {
  const double period = 1e-6, bin = 10e-9;
  const int n = 1000000;
  std::mt19937_64 rng(8);
  std::vector<TimeTagRecord> recs;
  recs.reserve(n + 1000);
  std::uint64_t origin = 0;
  for (int r = 0; r < 1000; ++r) {
    recs.push_back({origin, 0, kMarkerFlag});
    std::vector<std::uint64_t> ts(n / 1000);
    for (auto& t : ts) t = origin + rng() % 1000000;
    std::sort(ts.begin(), ts.end());
    for (auto t : ts) recs.push_back({t, std::uint16_t(rng() % 2), 0});
    origin += 1000000;
  }
  const BinnedCounts b = bin_records(recs, period, bin, 100, 2);
  CHECK(b.counts[0].sum() + b.counts[1].sum() == double(n));
  const Eigen::MatrixXd all = b.counts[0] + b.counts[1];
  const double mu = double(n) / 100;
  CHECK((all.array() - mu).abs().maxCoeff() < 5 * std::sqrt(mu));
}

TEST_CASE("setup validation") {
  TimeResolvedSetup s = small_setup(AcquisitionMode::Expectation);
  s.bin_s = 1e-12;
  CHECK_THROWS_AS(validate(s), Error);
  s = small_setup(AcquisitionMode::Expectation);
  s.channels.front().components.clear();
  CHECK_THROWS_AS(validate(s), ConfigError);
  s = small_setup(AcquisitionMode::Expectation);
  s.schedule = ScanSchedule::uniform(0, 0.001, 2930, 1.0);
  s.n_reps = 16000000;
  s.seq0 = s.seq1 = default_sequence(0);
  CHECK_THROWS_AS(simulate_timeresolved_acquisition(s), ParameterError);
}

TEST_CASE("zero repetitions and identical sequences") {
  TimeResolvedSetup s = small_setup(AcquisitionMode::Expectation);
  s.n_reps = 0;
  const TimeResolvedCounts zero = simulate_timeresolved_acquisition(s);
  for (const auto& m : zero.spin0.counts) CHECK(m.cwiseAbs().maxCoeff() == 0.0);

  s = small_setup(AcquisitionMode::Expectation);
  s.seq1 = s.seq0;
  const TimeResolvedCounts same = simulate_timeresolved_acquisition(s);
  for (std::size_t c = 0; c < same.spin0.counts.size(); ++c)
    CHECK((same.spin0.counts[c] - same.spin1.counts[c]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampling mode averages to the expectation") {
  const TimeResolvedCounts mean = simulate_timeresolved_acquisition(small_setup(AcquisitionMode::Expectation));
  const TimeResolvedCounts a = simulate_timeresolved_acquisition(small_setup(AcquisitionMode::Sampling, 1));
  const TimeResolvedCounts b = simulate_timeresolved_acquisition(small_setup(AcquisitionMode::Sampling, 1));
  CHECK(a.spin0.counts[0] == b.spin0.counts[0]);
  for (std::size_t c = 0; c < mean.spin0.counts.size(); ++c) {
    const double expected = mean.spin0.counts[c].sum();
    const double got = a.spin0.counts[c].sum();
    CHECK(std::abs(got - expected) < 5 * std::sqrt(expected));
    CHECK((a.spin0.counts[c].array() == a.spin0.counts[c].array().floor()).all());
  }
}

TEST_CASE("sampled time tags bin back to the same counts") {
  TimeResolvedSetup s = small_setup(AcquisitionMode::Sampling, 4);
  s.schedule = ScanSchedule::uniform(s.twins.zero_delay_position_mm, 0.01, 3, 1.0);
  s.n_reps = 200;
  const TimeResolvedCounts counts = simulate_timeresolved_acquisition(s);
  const double period = s.seq0.period();
  for (Eigen::Index step = 0; step < 3; ++step) {
    const TimeTagStream stream = sampled_timetags(counts.spin0, step, period, 0.0, 99);
    CHECK(parse_timetag_stream(write_timetag_stream(stream)).records == stream.records);
    const BinnedCounts back =
        bin_records(stream.records, period, s.bin_s, s.n_bins, stream.channel_count);
    CHECK(back.n_reps == s.n_reps);
    for (std::size_t c = 0; c < counts.spin0.counts.size(); ++c)
      CHECK((back.counts[c].row(0) - counts.spin0.counts[c].row(step)).cwiseAbs().maxCoeff() == 0.0);
  }
  const TimeResolvedCounts means = simulate_timeresolved_acquisition(small_setup(AcquisitionMode::Expectation));
  CHECK_THROWS_AS(sampled_timetags(means.spin0, 0, period, 0.0, 1), DataError);
}

TEST_CASE("difference maps") {
  const TimeResolvedSetup s = small_setup(AcquisitionMode::Expectation);
  const TimeResolvedCounts c = simulate_timeresolved_acquisition(s);
  const ReconstructionConfig cfg;
  const std::vector<BandWindow> bands{{"vis", 600, 900}, {"ir", 1025, 1060}};
  const WavelengthCrop crop{550, 1150};

  const DifferenceMap self = build_difference_map(c.spin0, c.spin0, "IR", s.twins, cfg, bands, crop);
  CHECK(self.delta.cwiseAbs().maxCoeff() == 0.0);

  const DifferenceMap d01 = build_difference_map(c.spin0, c.spin1, "VIS", s.twins, cfg, bands, crop);
  const DifferenceMap d10 = build_difference_map(c.spin1, c.spin0, "VIS", s.twins, cfg, bands, crop);
  CHECK((d01.delta + d10.delta).cwiseAbs().maxCoeff() == 0.0);

  const TimeResolvedSpectrum y0 = time_resolved_spectrum(c.spin0, "VIS", s.twins, cfg, 0, crop);
  const TimeResolvedSpectrum y1 = time_resolved_spectrum(c.spin1, "VIS", s.twins, cfg, 1, crop);
  CHECK((d01.delta - (y0.y - y1.y)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(y0.wavelengths_nm.minCoeff() >= 550);
  CHECK(y0.wavelengths_nm.maxCoeff() <= 1150);
  for (Eigen::Index i = 1; i < y0.wavelengths_nm.size(); ++i)
    CHECK(y0.wavelengths_nm(i) > y0.wavelengths_nm(i - 1));

  // band integral: plain sum over the rows inside the band
  double sum = 0;
  for (Eigen::Index i = 0; i < d01.wavelengths_nm.size(); ++i)
    if (d01.wavelengths_nm(i) >= 600 && d01.wavelengths_nm(i) <= 900) sum += d01.delta(i, 0);
  CHECK(d01.band_integrals.at("vis")(0) == doctest::Approx(sum));

  BinnedCounts short_one = c.spin1;
  short_one.counts[0].conservativeResize(short_one.counts[0].rows(), 10);
  short_one.counts[1].conservativeResize(short_one.counts[1].rows(), 10);
  CHECK_THROWS_AS(build_difference_map(c.spin0, short_one, "VIS", s.twins, cfg, bands, crop), DataError);
  CHECK_THROWS_AS(build_difference_map(c.spin0, c.spin1, "UV", s.twins, cfg, bands, crop), ConfigError);
}

TEST_CASE("spin-resolved signs and steady state at late times") {
  const TimeResolvedSetup s = desk_scale_setup();
  const TimeResolvedCounts c = simulate_timeresolved_acquisition(s);
  const ReconstructionConfig cfg;
  const std::vector<BandWindow> bands{{"vis", 600, 900}, {"ir", 1025, 1060}};
  const DifferenceMap vis = build_difference_map(c.spin0, c.spin1, "VIS", s.twins, cfg, bands, {550, 1150});
  const DifferenceMap ir = build_difference_map(c.spin0, c.spin1, "IR", s.twins, cfg, bands, {550, 1150});
  const Eigen::VectorXd v = vis.band_integrals.at("vis"), r = ir.band_integrals.at("ir");
  CHECK(v.head(20).minCoeff() >= 0);
  CHECK(r.head(20).maxCoeff() <= 0);
  CHECK(std::abs(v.tail(50).mean()) < 1e-3 * v.cwiseAbs().maxCoeff());
  CHECK(std::abs(r.tail(50).mean()) < 1e-3 * r.cwiseAbs().maxCoeff());

  const std::string text = format_difference_map(vis);
  CHECK(text.find("wavelength_nm,time_ns,delta") != std::string::npos);
  CHECK(format_band_traces(ir).find("time_ns,") != std::string::npos);
}

}  // TEST_SUITE
