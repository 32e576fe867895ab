#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "ftpl/analysis.hpp"
#include "ftpl/errors.hpp"

using namespace ftpl;

namespace {

Eigen::VectorXd lorentz(const Eigen::VectorXd& x, double c, double w, double a, double b) {
  return x.unaryExpr([&](double v) { return b + a * lorentzian_peak(v, c, w); });
}

PhotonCounterModel ideal() {
  PhotonCounterModel c;
  c.eta.constant = 1;
  c.dark_cps = 0;
  c.saturation_cps = 1e12;
  return c;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("least squares reproduces the normal equations on a straight line") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0, 0.3);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(40, -2, 5);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) y(i) = 1.5 - 0.7 * x(i) + noise(rng);
  Eigen::MatrixXd j(40, 2);
  j.col(0).setOnes();
  j.col(1) = x;
  const LeastSquaresFit f = least_squares([&](const Eigen::VectorXd& p) { return Eigen::VectorXd(j * p - y); },
                                          [&](const Eigen::VectorXd&) { return j; }, Eigen::Vector2d(0, 0), 40);
  const Eigen::Vector2d p = (j.transpose() * j).ldlt().solve(j.transpose() * y);
  CHECK(f.params(0) == doctest::Approx(p(0)).epsilon(1e-8));
  CHECK(f.params(1) == doctest::Approx(p(1)).epsilon(1e-8));
  const double s2 = (j * p - y).squaredNorm() / 38;
  const Eigen::Matrix2d cov = s2 * (j.transpose() * j).inverse();
  CHECK(f.sigma(0) == doctest::Approx(std::sqrt(cov(0, 0))).epsilon(1e-6));
  CHECK(f.sigma(1) == doctest::Approx(std::sqrt(cov(1, 1))).epsilon(1e-6));
  CHECK(f.converged);
}

TEST_CASE("noiseless peaks are recovered exactly") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(801, 1070, 1086);
  const PeakFitResult l = fit_peak(x, lorentz(x, 1078, 0.56, 40, 3), LineShape::Lorentzian, {1070, 1086});
  CHECK(l.center_nm == doctest::Approx(1078).epsilon(1e-4 / 1078));
  CHECK(l.fwhm_nm == doctest::Approx(0.56).epsilon(1e-4));
  CHECK(l.amplitude == doctest::Approx(40).epsilon(1e-4));
  CHECK(l.baseline == doctest::Approx(3).epsilon(1e-4));
  const Eigen::VectorXd g = x.unaryExpr([](double v) { return 1 + 10 * gaussian_peak(v, 1077.3, 2.0); });
  const PeakFitResult gf = fit_peak(x, g, LineShape::Gaussian, {1070, 1086});
  CHECK(gf.center_nm == doctest::Approx(1077.3).epsilon(1e-7));
  CHECK(gf.fwhm_nm == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("peak fit uncertainties match the scatter over seeds") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(201, 1070, 1086);
  std::normal_distribution<double> noise(0, 1.0);
  std::vector<double> pulls;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    Eigen::VectorXd y = lorentz(x, 1078, 1.0, 20, 5);
    for (auto& v : y) v += noise(rng);
    const PeakFitResult f = fit_peak(x, y, LineShape::Lorentzian, {1070, 1086});
    pulls.push_back((f.center_nm - 1078) / f.center_sigma);
  }
  double m = 0, v = 0;
  for (double p : pulls) m += p / 200;
  for (double p : pulls) v += (p - m) * (p - m) / 199;
  CHECK(std::abs(m) < 0.3);
  CHECK(std::sqrt(v) == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("peak fit failure modes") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(100, 1070, 1086);
  CHECK_THROWS_AS(fit_peak(x, Eigen::VectorXd::Constant(100, 4.0), LineShape::Lorentzian, {1070, 1086}),
                  DegenerateFitError);
  CHECK_THROWS_AS(fit_peak(x, x, LineShape::Lorentzian, {1070, 1086}), FitError);
  CHECK_THROWS_AS(fit_peak(x, x, LineShape::Lorentzian, {1000, 1001}), DataError);
}

TEST_CASE("resolution-limited line has the instrument width") {
  TwinsModel m;
  EmitterSpectrum s;
  s.components = {{LineShape::Lorentzian, 1078, 300e6, 1.0}};
  s.total_brightness = 5000;
  const SpectralGrid g = covering_grid(s, 2e9);
  // one-sided range chosen for a 2.5 nm instrument
  const double x_max = 0.605 * 1078.0 * 1078.0 / (0.1224 * 2.5e6 * m.sin_apex());
  const ScanSchedule sched = ScanSchedule::symmetric(14, x_max, 1201, 1.0);
  const Eigen::VectorXd counts = expected_interferogram_rates(s, g, m, ideal(), sched.positions_mm);
  ReconstructionConfig cfg;
  cfg.window = Window::None;
  cfg.zero_pad_factor = 8;
  const ReconstructedSpectrum r = reconstruct(sched.positions_mm, counts, m, cfg);
  CHECK(r.resolution_nm_at(1078) == doctest::Approx(2.5).epsilon(1e-3));
  // the fit needs the sinc core plus its first zeros, about 1.25 resolution each side
  const PeakFitResult f = fit_peak(r, LineShape::Lorentzian, {1078 - 3.125, 1078 + 3.125});
  CHECK(f.fwhm_nm == doctest::Approx(2.5).epsilon(0.2));
  CHECK(f.center_nm == doctest::Approx(1078).epsilon(0.1 / 1078));
}

TEST_CASE("Rabi fit") {
  const double t_pi = 200.5e-9, t2 = 245.8e-9;
  const Eigen::VectorXd tau = Eigen::VectorXd::LinSpaced(101, 0, 1e-6);
  const Eigen::VectorXd clean =
      tau.unaryExpr([&](double t) { return rabi_fit_function(t, 0.4, t_pi, t2, 0.5); });
  const RabiFitResult exact = fit_rabi(tau, clean);
  CHECK(exact.residual_norm < 1e-10);
  CHECK(exact.t_pi_s == doctest::Approx(t_pi).epsilon(1e-8));
  CHECK(exact.t2_star_s == doctest::Approx(t2).epsilon(1e-8));

  int ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0, 0.01);
    Eigen::VectorXd y = clean;
    for (auto& v : y) v += noise(rng);
    if (std::abs(fit_rabi(tau, y).t_pi_s / t_pi - 1) < 0.05) ++ok;
  }
  CHECK(ok == 20);

  CHECK_THROWS_AS(fit_rabi(tau, Eigen::VectorXd::Constant(101, 0.5)), DegenerateFitError);
  const Eigen::VectorXd short_tau = Eigen::VectorXd::LinSpaced(20, 0, 100e-9);
  const Eigen::VectorXd short_y =
      short_tau.unaryExpr([&](double t) { return rabi_fit_function(t, 0.4, t_pi, t2, 0.5); });
  CHECK_THROWS_AS(fit_rabi(short_tau, short_y), FitError);
}

TEST_CASE("decay fit") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(200, 2e-6, 12e-6);
  const Eigen::VectorXd y = t.unaryExpr([](double v) { return 0.5 + 7 * std::exp(-(v - 2e-6) / 1.3e-6); });
  const DecayFitResult f = fit_decay(t, y);
  CHECK(f.tau_s == doctest::Approx(1.3e-6).epsilon(1e-7));
  CHECK(f.amplitude == doctest::Approx(7).epsilon(1e-7));
  CHECK(f.offset == doctest::Approx(0.5).epsilon(1e-6));
  CHECK_THROWS_AS(fit_decay(t, Eigen::VectorXd::Ones(200)), DegenerateFitError);
}

TEST_CASE("SNR metric") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(2001, 1050, 1375);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0, 1);
  Eigen::VectorXd y = lorentz(x, 1131, 1.0, 30, 10);
  for (auto& v : y) v += noise(rng);
  const SnrReport a = snr(x, y, {1126, 1136}, {1300, 1375});
  CHECK(a.snr == doctest::Approx(a.peak_height / a.baseline_sigma));
  for (double c : {1e-3, 7.0, 1e6}) {
    const SnrReport b = snr(x, Eigen::VectorXd(c * y), {1126, 1136}, {1300, 1375});
    CHECK(std::abs(b.snr - a.snr) <= 1e-9 * a.snr);
  }
  const SnrReport clean = snr(x, lorentz(x, 1131, 1.0, 30, 10), {1126, 1136}, {1300, 1375});
  CHECK(clean.baseline_sigma > 0);
  CHECK(clean.snr > 1e3);
  CHECK_THROWS_AS(snr(x, y, {1126, 1136}, {1400, 1500}), DataError);
  CHECK_THROWS_AS(snr(x, y, {1126, 1136}, {1130, 1200}), Error);
}

TEST_CASE("dark-only FT spectra rarely pass the SNR threshold") {
  const TwinsModel m;
  const ScanSchedule sched = ScanSchedule::uniform(0, 28.0 / 1292, 1293, 300.0 / 1293);
  const Eigen::VectorXd rates = Eigen::VectorXd::Constant(1293, 50.0);
  int below = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Interferogram ig = sample_interferogram(rates, sched, m, seed);
    const ReconstructedSpectrum r = reconstruct(ig, m, ReconstructionConfig{});
    if (snr(r, {1126, 1136}, {1300, 1375}).snr < 3) ++below;
  }
  CHECK(below >= 190);
}

TEST_CASE("emitter identification") {
  const EmitterLibrary lib = default_emitter_library();
  CHECK(identify_emitter(1077.9, lib, 5).front().name == "PL4");
  CHECK(identify_emitter(1133.0, lib, 5).front().name == "PL1");
  CHECK(identify_emitter(500, lib, 5).empty());
  const auto close = identify_emitter(1132.4, lib, 2);
  REQUIRE(close.size() == 2);
  CHECK(close[0].name == "PL2");
  CHECK(close[0].distance_nm <= close[1].distance_nm);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> nm(1000, 1200), tol(0.1, 40);
  for (int trial = 0; trial < 100; ++trial) {
    EmitterLibrary shuffled = lib;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const double c = nm(rng), t = tol(rng);
    const auto a = identify_emitter(c, lib, t), b = identify_emitter(c, shuffled, t);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].name == b[i].name);
    const auto wider = identify_emitter(c, lib, 2 * t);
    CHECK(wider.size() >= a.size());
    for (const auto& match : a)
      CHECK(std::any_of(wider.begin(), wider.end(), [&](const auto& w) { return w.name == match.name; }));
  }
}

TEST_CASE("records are name=value lines") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(801, 1070, 1086);
  const PeakFitResult f = fit_peak(x, lorentz(x, 1078, 0.56, 40, 3), LineShape::Lorentzian, {1070, 1086});
  const std::string text = format_peak_fit(f);
  CHECK(text.find("center_nm=") != std::string::npos);
  CHECK(text.find("fwhm_nm=") != std::string::npos);
  CHECK(format_matches(identify_emitter(1078, default_emitter_library(), 1)).find("PL4") != std::string::npos);
}

}  // TEST_SUITE
