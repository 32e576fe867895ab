#include "ftpl/analysis.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "ftpl/errors.hpp"
#include "ftpl/text_io.hpp"

namespace ftpl {

namespace {

struct LmFunctor {
  const ResidualFn& residuals;
  const JacobianFn& jacobian;
  Eigen::Index m, n;

  int values() const { return int(m); }
  int inputs() const { return int(n); }
  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    fvec = residuals(x);
    return fvec.allFinite() ? 0 : -1;
  }
  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& fjac) const {
    fjac = jacobian(x);
    return fjac.allFinite() ? 0 : -1;
  }
};

double median(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty window");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + std::ptrdiff_t(mid)));
  return m;
}

std::vector<Eigen::Index> in_window(const Eigen::VectorXd& x, WavelengthWindow w) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) >= w.lo_nm && x(i) <= w.hi_nm) idx.push_back(i);
  return idx;
}

bool flat(const Eigen::VectorXd& y) {
  const double range = y.maxCoeff() - y.minCoeff();
  return !(range > 1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff()));
}

}  // namespace

LeastSquaresFit least_squares(const ResidualFn& residuals, const JacobianFn& jacobian,
                              Eigen::VectorXd start, Eigen::Index n_values,
                              double relative_tolerance, int max_evaluations) {
  const Eigen::Index p = start.size();
  require(n_values >= p, "least squares needs at least as many values as parameters");
  LmFunctor functor{residuals, jacobian, n_values, p};
  Eigen::LevenbergMarquardt<LmFunctor> lm(functor);
  lm.parameters.xtol = relative_tolerance;
  lm.parameters.ftol = 1e-15;
  lm.parameters.maxfev = max_evaluations;
  const auto status = lm.minimize(start);
  using namespace Eigen::LevenbergMarquardtSpace;
  if (status == ImproperInputParameters) throw ParameterError("improper least-squares setup");
  if (status == UserAsked) throw FitError("model produced non-finite values during the fit");

  LeastSquaresFit fit;
  fit.params = start;
  fit.evaluations = int(lm.nfev);
  fit.converged = status != TooManyFunctionEvaluation;
  const Eigen::VectorXd r = residuals(start);
  fit.rss = r.squaredNorm();
  fit.reduced_norm = n_values > p ? std::sqrt(fit.rss / double(n_values - p)) : 0.0;

  const Eigen::MatrixXd j = jacobian(start);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  if (!(s(p - 1) > 1e-12 * s(0)))
    throw DegenerateFitError("fit parameters are not identifiable (singular curvature)");
  const double s2 = fit.reduced_norm * fit.reduced_norm;
  fit.covariance = svd.matrixV() * s.cwiseInverse().cwiseAbs2().asDiagonal() *
                   svd.matrixV().transpose() * s2;
  fit.sigma = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

// ---------------------------------------------------------------------------

PeakFitResult fit_peak(const Eigen::VectorXd& x_all, const Eigen::VectorXd& y_all, LineShape shape,
                       WavelengthWindow window) {
  if (x_all.size() != y_all.size()) throw DataError("spectrum axes differ in length");
  const auto idx = in_window(x_all, window);
  if (idx.size() < 5) throw DataError("peak window holds fewer than 5 samples");
  Eigen::VectorXd x(Eigen::Index(idx.size())), y(Eigen::Index(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    x(Eigen::Index(k)) = x_all(idx[k]);
    y(Eigen::Index(k)) = y_all(idx[k]);
  }
  if (flat(y)) throw DegenerateFitError("flat spectrum: no peak to fit");
  Eigen::Index top = 0;
  y.maxCoeff(&top);
  if (top == 0 || top == y.size() - 1) throw FitError("no local maximum inside the fit window");

  // Initial guesses: argmax, median baseline, half-height width.
  const double base0 = median(std::vector<double>(y.data(), y.data() + y.size()));
  const double amp0 = y(top) - base0;
  const double half = base0 + 0.5 * amp0;
  auto crossing = [&](int dir) -> double {
    for (Eigen::Index i = top + dir; i >= 0 && i < y.size(); i += dir) {
      if (y(i) <= half) {
        const Eigen::Index prev = i - dir;
        const double f = (y(prev) - half) / (y(prev) - y(i));
        return std::abs(x(prev) + f * (x(i) - x(prev)) - x(top));
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  };
  const double left = crossing(-1), right = crossing(+1);
  double width0 = std::isnan(left) ? 2 * right : std::isnan(right) ? 2 * left : left + right;
  if (!(width0 > 0)) width0 = 0.25 * (x(x.size() - 1) - x(0));

  const double x_ref = x(top);
  const Eigen::ArrayXd xr = x.array() - x_ref;
  const bool lorentz = shape == LineShape::Lorentzian;

  // params: center offset, fwhm, amplitude, baseline
  auto model_parts = [&](const Eigen::VectorXd& p, Eigen::ArrayXd& g, Eigen::ArrayXd& dg_dc,
                         Eigen::ArrayXd& dg_dw) {
    const double c = p(0), w = p(1);
    if (lorentz) {
      const Eigen::ArrayXd u = 2.0 * (xr - c) / w;
      const Eigen::ArrayXd den = 1.0 + u.square();
      g = den.inverse();
      dg_dc = 4.0 * u / (w * den.square());
      dg_dw = 2.0 * u.square() / (w * den.square());
    } else {
      const Eigen::ArrayXd z = kFwhmPerSigma * (xr - c) / w;
      g = (-0.5 * z.square()).exp();
      dg_dc = g * z * kFwhmPerSigma / w;
      dg_dw = g * z.square() / w;
    }
  };
  ResidualFn res = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    Eigen::ArrayXd g, dc, dw;
    model_parts(p, g, dc, dw);
    return (p(3) + p(2) * g - y.array()).matrix();
  };
  JacobianFn jac = [&](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
    Eigen::ArrayXd g, dc, dw;
    model_parts(p, g, dc, dw);
    Eigen::MatrixXd j(y.size(), 4);
    j.col(0) = (p(2) * dc).matrix();
    j.col(1) = (p(2) * dw).matrix();
    j.col(2) = g.matrix();
    j.col(3).setOnes();
    return j;
  };
  Eigen::VectorXd start(4);
  start << 0.0, width0, amp0, base0;
  const LeastSquaresFit fit = least_squares(res, jac, start, y.size(), 1e-10);

  PeakFitResult out;
  out.shape = shape;
  out.center_nm = x_ref + fit.params(0);
  out.fwhm_nm = std::abs(fit.params(1));
  out.amplitude = fit.params(2);
  out.baseline = fit.params(3);
  out.center_sigma = fit.sigma(0);
  out.fwhm_sigma = fit.sigma(1);
  out.amplitude_sigma = fit.sigma(2);
  out.baseline_sigma = fit.sigma(3);
  out.goodness = fit.reduced_norm;
  out.converged = fit.converged;
  return out;
}

PeakFitResult fit_peak(const SpectrumSamples& s, LineShape shape, WavelengthWindow window) {
  return fit_peak(s.wavelengths_nm, s.values, shape, window);
}

PeakFitResult fit_peak(const ReconstructedSpectrum& s, LineShape shape, WavelengthWindow window) {
  return fit_peak(to_samples(s), shape, window);
}

// ---------------------------------------------------------------------------

RabiFitResult fit_rabi(const Eigen::VectorXd& durations_s, const Eigen::VectorXd& signal) {
  if (durations_s.size() != signal.size()) throw DataError("Rabi axes differ in length");
  if (durations_s.size() < 8) throw DataError("Rabi fit needs at least 8 points");
  if (flat(signal)) throw DegenerateFitError("flat Rabi signal: T_pi is not identifiable");

  // Work on durations scaled to [0, 1]; fit w = 2 / T and g = 1 / T2*.
  const double scale = durations_s.maxCoeff();
  require(scale > 0, "Rabi durations must span a positive range");
  const Eigen::ArrayXd t = durations_s.array() / scale;
  const Eigen::ArrayXd y = signal.array();
  const Eigen::Index n = t.size();

  ResidualFn res = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    return (p(0) * (p(1) * t).sin() * (-p(2) * t).exp() + p(3) - y).matrix();
  };
  JacobianFn jac = [&](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
    const Eigen::ArrayXd s = (p(1) * t).sin(), c = (p(1) * t).cos(), e = (-p(2) * t).exp();
    Eigen::MatrixXd j(n, 4);
    j.col(0) = (s * e).matrix();
    j.col(1) = (p(0) * t * c * e).matrix();
    j.col(2) = (-p(0) * t * s * e).matrix();
    j.col(3).setOnes();
    return j;
  };

  // Seed the frequency from a sine periodogram; keep the best of a few starts.
  const double mean = y.mean();
  const double dt_min = [&] {
    double d = 1.0;
    for (Eigen::Index i = 1; i < n; ++i) d = std::min(d, std::abs(t(i) - t(i - 1)));
    return d > 0 ? d : 1.0 / double(n);
  }();
  const double w_max = std::numbers::pi / dt_min;
  std::vector<std::pair<double, double>> scores;  // (explained, w)
  for (double w = 0.5; w <= w_max; w *= 1.02) {
    const Eigen::ArrayXd s = (w * t).sin();
    const double ss = s.square().sum();
    if (ss <= 0) continue;
    const double a = (s * (y - mean)).sum() / ss;
    scores.emplace_back(a * a * ss, w);
  }
  std::vector<double> seeds;
  for (std::size_t i = 1; i + 1 < scores.size(); ++i)
    if (scores[i].first >= scores[i - 1].first && scores[i].first >= scores[i + 1].first)
      seeds.push_back(scores[i].second);
  std::sort(seeds.begin(), seeds.end(), [&](double a, double b) {
    auto score = [&](double w) {
      for (const auto& s : scores)
        if (s.second == w) return s.first;
      return 0.0;
    };
    return score(a) > score(b);
  });
  if (seeds.size() > 4) seeds.resize(4);
  if (seeds.empty()) seeds.push_back(2 * std::numbers::pi);

  std::optional<LeastSquaresFit> best;
  std::string failures;
  for (double w : seeds) {
    const Eigen::ArrayXd s = (w * t).sin();
    Eigen::VectorXd start(4);
    start << (s * (y - mean)).sum() / s.square().sum(), w, 1.0, mean;
    try {
      LeastSquaresFit f = least_squares(res, jac, start, n, 1e-12, 4000);
      if (!best || f.rss < best->rss) best = std::move(f);
    } catch (const FitError& e) {
      failures += " [w0=" + io::format_number(w / scale) + " rad/s: " + e.what() + "]";
    }
  }
  if (!best) throw FitError("Rabi fit failed from every initializer:" + failures);

  const Eigen::VectorXd& p = best->params;
  if (!(std::abs(p(0)) > 0 && p(1) > 0)) throw DegenerateFitError("Rabi amplitude or frequency vanished");
  RabiFitResult out;
  out.amplitude = p(0);
  out.t_pi_s = 2.0 / p(1) * scale;
  out.t2_star_s = p(2) != 0 ? scale / p(2) : std::numeric_limits<double>::infinity();
  out.offset = p(3);
  out.amplitude_sigma = best->sigma(0);
  out.t_pi_sigma = 2.0 * best->sigma(1) / (p(1) * p(1)) * scale;
  out.t2_star_sigma = p(2) != 0 ? best->sigma(2) / (p(2) * p(2)) * scale
                                : std::numeric_limits<double>::infinity();
  out.offset_sigma = best->sigma(3);
  out.residual_norm = std::sqrt(best->rss);
  out.converged = best->converged;
  const double span = durations_s.maxCoeff() - durations_s.minCoeff();
  if (span < std::numbers::pi * out.t_pi_s)
    throw FitError("Rabi data span less than one oscillation of the fitted curve");
  return out;
}

DecayFitResult fit_decay(const Eigen::VectorXd& t_s, const Eigen::VectorXd& values) {
  if (t_s.size() != values.size()) throw DataError("decay axes differ in length");
  if (t_s.size() < 5) throw DataError("decay fit needs at least 5 points");
  if (flat(values)) throw DegenerateFitError("flat trace: no decay to fit");
  const double t0 = t_s(0);
  const double span = t_s(t_s.size() - 1) - t0;
  require(span > 0, "decay times must increase");
  const Eigen::ArrayXd t = (t_s.array() - t0) / span;
  const Eigen::ArrayXd y = values.array();
  const Eigen::Index n = t.size();

  const Eigen::Index tail = std::max<Eigen::Index>(1, n / 10);
  const double c0 = y.tail(tail).mean();
  const double a0 = y(0) - c0;
  double k0 = 3.0;
  for (Eigen::Index i = 1; i < n; ++i)
    if (std::abs(y(i) - c0) <= std::abs(a0) / std::numbers::e) {
      if (t(i) > 0) k0 = 1.0 / t(i);
      break;
    }

  ResidualFn res = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    return (p(0) * (-p(1) * t).exp() + p(2) - y).matrix();
  };
  JacobianFn jac = [&](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
    const Eigen::ArrayXd e = (-p(1) * t).exp();
    Eigen::MatrixXd j(n, 3);
    j.col(0) = e.matrix();
    j.col(1) = (-p(0) * t * e).matrix();
    j.col(2).setOnes();
    return j;
  };
  Eigen::VectorXd start(3);
  start << a0, k0, c0;
  const LeastSquaresFit f = least_squares(res, jac, start, n, 1e-10);
  if (!(f.params(1) > 0)) throw FitError("fitted decay rate is not positive");
  DecayFitResult out;
  out.amplitude = f.params(0);
  out.tau_s = span / f.params(1);
  out.offset = f.params(2);
  out.amplitude_sigma = f.sigma(0);
  out.tau_sigma = span * f.sigma(1) / (f.params(1) * f.params(1));
  out.offset_sigma = f.sigma(2);
  out.converged = f.converged;
  return out;
}

// ---------------------------------------------------------------------------

SnrReport snr(const Eigen::VectorXd& x, const Eigen::VectorXd& y, WavelengthWindow peak_window,
              WavelengthWindow noise_window) {
  if (x.size() != y.size()) throw DataError("spectrum axes differ in length");
  require(peak_window.hi_nm < noise_window.lo_nm || noise_window.hi_nm < peak_window.lo_nm,
          "peak and noise windows must be disjoint");
  const auto pk = in_window(x, peak_window);
  const auto nz = in_window(x, noise_window);
  if (pk.empty() || nz.size() < 2) throw DataError("SNR window holds no samples");
  double peak = -std::numeric_limits<double>::infinity();
  for (auto i : pk) peak = std::max(peak, y(i));
  std::vector<double> noise;
  for (auto i : nz) noise.push_back(y(i));
  const double med = median(noise);
  std::vector<double> dev;
  for (double v : noise) dev.push_back(std::abs(v - med));
  double sigma = 1.4826 * median(dev);
  // Noiseless inputs: fall back to the rounding floor of the data.
  const double floor = std::numeric_limits<double>::epsilon() * y.cwiseAbs().maxCoeff();
  if (!(sigma > floor)) sigma = std::max(floor, std::numeric_limits<double>::min());
  SnrReport r;
  r.peak_height = peak - med;
  r.baseline_sigma = sigma;
  r.snr = r.peak_height / sigma;
  r.peak_window = peak_window;
  r.noise_window = noise_window;
  return r;
}

SnrReport snr(const SpectrumSamples& s, WavelengthWindow peak_window, WavelengthWindow noise_window) {
  return snr(s.wavelengths_nm, s.values, peak_window, noise_window);
}

SnrReport snr(const ReconstructedSpectrum& s, WavelengthWindow peak_window, WavelengthWindow noise_window) {
  return snr(to_samples(s, SpectrumPart::Real), peak_window, noise_window);
}

std::vector<EmitterMatch> identify_emitter(double center_nm, const EmitterLibrary& library,
                                           double tolerance_nm) {
  require(tolerance_nm >= 0, "identification tolerance must be >= 0");
  std::vector<EmitterMatch> out;
  for (const auto& e : library) {
    EmitterMatch best{e.name, 0, std::numeric_limits<double>::infinity()};
    for (double z : e.zpl_wavelengths_nm) {
      const double d = std::abs(z - center_nm);
      if (d < best.distance_nm || (d == best.distance_nm && z < best.zpl_nm)) best = {e.name, z, d};
    }
    if (best.distance_nm <= tolerance_nm) out.push_back(best);
  }
  std::sort(out.begin(), out.end(), [](const EmitterMatch& a, const EmitterMatch& b) {
    if (a.distance_nm != b.distance_nm) return a.distance_nm < b.distance_nm;
    if (a.name != b.name) return a.name < b.name;
    return a.zpl_nm < b.zpl_nm;
  });
  return out;
}

std::vector<EmitterMatch> identify_emitter(const PeakFitResult& fit, const EmitterLibrary& library,
                                           double tolerance_nm) {
  require(fit.fwhm_nm > 0, "identification needs a non-degenerate fit");
  return identify_emitter(fit.center_nm, library, tolerance_nm);
}

// ---------------------------------------------------------------------------

namespace {

void kv(std::ostream& os, const char* key, double value) {
  os << key << '=' << io::format_number(value) << '\n';
}

}  // namespace

std::string format_peak_fit(const PeakFitResult& f) {
  std::ostringstream os;
  os << "shape=" << (f.shape == LineShape::Lorentzian ? "lorentzian" : "gaussian") << '\n';
  kv(os, "center_nm", f.center_nm);
  kv(os, "center_sigma_nm", f.center_sigma);
  kv(os, "fwhm_nm", f.fwhm_nm);
  kv(os, "fwhm_sigma_nm", f.fwhm_sigma);
  kv(os, "amplitude", f.amplitude);
  kv(os, "amplitude_sigma", f.amplitude_sigma);
  kv(os, "baseline", f.baseline);
  kv(os, "baseline_sigma", f.baseline_sigma);
  kv(os, "goodness", f.goodness);
  os << "converged=" << (f.converged ? "true" : "false") << '\n';
  return os.str();
}

std::string format_rabi_fit(const RabiFitResult& f) {
  std::ostringstream os;
  kv(os, "amplitude", f.amplitude);
  kv(os, "amplitude_sigma", f.amplitude_sigma);
  kv(os, "t_pi_s", f.t_pi_s);
  kv(os, "t_pi_sigma_s", f.t_pi_sigma);
  kv(os, "t2_star_s", f.t2_star_s);
  kv(os, "t2_star_sigma_s", f.t2_star_sigma);
  kv(os, "offset", f.offset);
  kv(os, "offset_sigma", f.offset_sigma);
  kv(os, "residual_norm", f.residual_norm);
  os << "converged=" << (f.converged ? "true" : "false") << '\n';
  return os.str();
}

std::string format_decay_fit(const DecayFitResult& f) {
  std::ostringstream os;
  kv(os, "amplitude", f.amplitude);
  kv(os, "amplitude_sigma", f.amplitude_sigma);
  kv(os, "tau_s", f.tau_s);
  kv(os, "tau_sigma_s", f.tau_sigma);
  kv(os, "offset", f.offset);
  kv(os, "offset_sigma", f.offset_sigma);
  os << "converged=" << (f.converged ? "true" : "false") << '\n';
  return os.str();
}

std::string format_snr(const SnrReport& r) {
  std::ostringstream os;
  kv(os, "peak_height", r.peak_height);
  kv(os, "baseline_sigma", r.baseline_sigma);
  kv(os, "snr", r.snr);
  kv(os, "peak_lo_nm", r.peak_window.lo_nm);
  kv(os, "peak_hi_nm", r.peak_window.hi_nm);
  kv(os, "noise_lo_nm", r.noise_window.lo_nm);
  kv(os, "noise_hi_nm", r.noise_window.hi_nm);
  return os.str();
}

std::string format_matches(const std::vector<EmitterMatch>& matches) {
  std::ostringstream os;
  os << "matches=" << matches.size() << '\n';
  for (std::size_t i = 0; i < matches.size(); ++i)
    os << "match" << i + 1 << '=' << matches[i].name << " zpl_nm=" << io::format_number(matches[i].zpl_nm)
       << " distance_nm=" << io::format_number(matches[i].distance_nm) << '\n';
  return os.str();
}

}  // namespace ftpl
