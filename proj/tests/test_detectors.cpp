#include <cmath>

#include "doctest.h"
#include "ftpl/detectors.hpp"
#include "ftpl/errors.hpp"

using namespace ftpl;

TEST_SUITE("detectors") {

TEST_CASE("camera mean electrons") {
  CameraModel cam;
  cam.eta.constant = 0.8;
  // (0.8 * 1000 + 5700) * 60 + 400
  CHECK(camera_mean_electrons(cam, 1000, 60) == doctest::Approx(390400.0));
  CameraModel silent;
  silent.dark_rate = 0;
  silent.readout_noise = 0;
  CHECK(camera_mean_electrons(silent, 0, 10) == 0.0);
  CHECK(camera_mean_electrons(silent, 123, 20) == doctest::Approx(2 * camera_mean_electrons(silent, 123, 10)));
  CHECK_THROWS_AS(camera_mean_electrons(cam, -1, 1), ParameterError);
  CHECK_THROWS_AS(camera_mean_electrons(cam, 1, 0), ParameterError);
}

TEST_CASE("camera saturation and Poisson statistics") {
  CameraModel cam;
  cam.dark_rate = 0;
  cam.readout_noise = 0;
  cam.eta.constant = 1.0;
  // mean 9e6 electrons against a 4.5e6 well: always 4.5e6 / 75
  for (std::uint64_t s = 0; s < 20; ++s) CHECK(camera_sample_counts(cam, 9e6, 1.0, s) == 60000.0);
  CHECK(camera_sample_counts(cam, 0, 1.0, 3) == 0.0);

  const int n = 10000;
  const double mean_e = 1e5;
  double sum = 0;
  for (int s = 0; s < n; ++s) sum += camera_sample_counts(cam, mean_e, 1.0, std::uint64_t(s));
  const double expected = mean_e / cam.gain;
  const double stderr_counts = std::sqrt(mean_e) / cam.gain / std::sqrt(double(n));
  CHECK(std::abs(sum / n - expected) < 5 * stderr_counts);
}

TEST_CASE("counter rate with dark counts and saturation") {
  PhotonCounterModel c;
  c.eta.constant = 0.8;
  c.dark_cps = 50;
  CHECK(counter_rate(c, 2000) == doctest::Approx(1650));
  CHECK(counter_rate(c, (7e6 - 50) / 0.8) == doctest::Approx(5e6));
  c.dark_cps = 0;
  CHECK(counter_rate(c, 0) == 0.0);
}

TEST_CASE("efficiency tables interpolate and clamp") {
  QuantumEfficiency q;
  q.wavelengths_nm = {1000, 1200};
  q.values = {0.2, 0.6};
  CHECK(q.at(1100) == doctest::Approx(0.4));
  CHECK(q.at(900) == doctest::Approx(0.2));
  CHECK(q.at(1300) == doctest::Approx(0.6));
  q.values = {0.2, 1.2};
  CHECK_THROWS_AS(validate(q), ParameterError);
}

TEST_CASE("model validation") {
  CameraModel cam;
  cam.gain = 0;
  CHECK_THROWS_AS(validate(cam), ParameterError);
  PhotonCounterModel pc;
  pc.saturation_cps = 0;
  CHECK_THROWS_AS(validate(pc), ParameterError);
  CHECK_THROWS_AS(validate(GratingMap{1375, 1050, 10}), ParameterError);
  CHECK_THROWS_AS(validate(GratingMap{1050, 1375, 0}), ParameterError);
}

TEST_CASE("grating pixel map") {
  const Eigen::VectorXd px = grating_pixel_centers(GratingMap{1050, 1375, 1024});
  CHECK(px(1) - px(0) == doctest::Approx(0.3177).epsilon(1e-3));
  CHECK(std::abs((px(1) - px(0)) - 0.32) < 0.01);
  const Eigen::VectorXd two = grating_pixel_centers(GratingMap{1000, 1001, 2});
  CHECK(two(0) == 1000.0);
  CHECK(two(1) == 1001.0);
  const Eigen::VectorXd one = grating_pixel_centers(GratingMap{1000, 1010, 1});
  REQUIRE(one.size() == 1);
  CHECK(one(0) == 1005.0);
}

TEST_CASE("grating acquisition") {
  const GratingMap map;
  const CameraModel cam;
  SUBCASE("pixel rates conserve the in-band brightness") {
    EmitterSpectrum s;
    s.components = {{LineShape::Gaussian, 1200, 2e12, 1.0}};
    s.total_brightness = 5000;
    CHECK(grating_photon_rates(s, map).photon_rates.sum() == doctest::Approx(5000).epsilon(1e-6));
  }
  SUBCASE("zero brightness only shows the baseline") {
    EmitterSpectrum s;
    s.components = {{LineShape::Lorentzian, 1131, 3e8, 1.0}};
    s.total_brightness = 0;
    const GratingSpectrum g = simulate_grating_acquisition(s, map, cam, 60, 5);
    const double base = camera_mean_electrons(cam, 0, 60) / cam.gain;
    const double sigma = std::sqrt(camera_mean_electrons(cam, 0, 60)) / cam.gain;
    CHECK(std::abs(g.counts.mean() - base) < 5 * sigma / std::sqrt(double(g.counts.size())));
    CHECK((g.counts.array() - base).abs().maxCoeff() < 6 * sigma);
  }
  SUBCASE("emitter outside the band warns and yields no signal") {
    EmitterSpectrum s;
    s.components = {{LineShape::Lorentzian, 900, 3e8, 1.0}};
    s.total_brightness = 1e4;
    const GratingSpectrum g = grating_photon_rates(s, map);
    CHECK(g.coverage_warning);
    CHECK(g.photon_rates.maxCoeff() < 1.0);
  }
  SUBCASE("10 kcps emitter is clear at 300 s") {
    const EmitterSpectrum s =
        build_divacancy_spectrum(1131, 300e6, default_psb_center_nm(1131), 20e12, 0.04, 1e4);
    int clear = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const GratingSpectrum g = simulate_grating_acquisition(s, map, cam, 300, seed);
      Eigen::Index k = 0;
      (g.wavelengths_nm.array() - 1131).abs().minCoeff(&k);
      const Eigen::VectorXd ref = g.counts.segment(k - 60, 40);
      const double mu = ref.mean();
      const double sd = std::sqrt((ref.array() - mu).square().sum() / (ref.size() - 1));
      if (g.counts(k) - mu > 5 * sd) ++clear;
    }
    CHECK(clear >= 18);
  }
}

}  // TEST_SUITE
