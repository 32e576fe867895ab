#include "ftpl/nv_dynamics.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "ftpl/errors.hpp"
#include "ftpl/spectral_model.hpp"
#include "ftpl/text_io.hpp"

namespace ftpl {

namespace {

using Generator = NvGenerator<double>;
using Augmented = Eigen::Matrix<double, 2 * kNvLevels, 2 * kNvLevels>;

constexpr double kSimplexSlack = 1e-12;

Populations checked(Populations p, const char* where) {
  for (int i = 0; i < kNvLevels; ++i) {
    if (!std::isfinite(p(i)) || p(i) < -kSimplexSlack) {
      std::ostringstream os;
      os << where << ": population " << i << " = " << p(i) << " left the simplex";
      throw NumericalError(os.str());
    }
    if (p(i) < 0) p(i) = 0;
  }
  if (std::abs(p.sum() - 1.0) > 1e-9) {
    std::ostringstream os;
    os << where << ": population sum drifted to " << p.sum();
    throw NumericalError(os.str());
  }
  return p;
}

// exp(M h) and the integral of exp(M s) over [0, h].
struct Propagator {
  Generator step;
  Generator integral;
};

Propagator propagator(const NvRateModel& model, bool laser_on, double h) {
  Augmented a = Augmented::Zero();
  a.topLeftCorner<kNvLevels, kNvLevels>() = rate_matrix<double>(model, laser_on) * h;
  a.topRightCorner<kNvLevels, kNvLevels>() = Generator::Identity() * h;
  const Augmented e = a.exp();
  return {e.topLeftCorner<kNvLevels, kNvLevels>(), e.topRightCorner<kNvLevels, kNvLevels>()};
}

Populations apply_microwave(const Populations& p, const PulseSegment& seg) {
  switch (seg.mw) {
    case Microwave::Off: return p;
    case Microwave::PiPulse: return apply_pi_pulse(p);
    case Microwave::Rotation: return apply_rotation(p, seg.rotation_rad);
  }
  return p;
}

// Solves A p = 0 with sum(p) = 1 by replacing the last row of A.
Populations stationary(Generator a, const char* what) {
  a.row(kNvLevels - 1).setOnes();
  Populations rhs = Populations::Zero();
  rhs(kNvLevels - 1) = 1.0;
  Eigen::FullPivLU<Generator> lu(a);
  if (lu.rank() < kNvLevels) throw NumericalError(std::string(what) + " is not unique");
  return checked(lu.solve(rhs), what);
}

Populations mix_ground(const Populations& p, double q) {
  Populations out = p;
  out(kG0) = (1 - q) * p(kG0) + q * p(kG1);
  out(kG1) = q * p(kG0) + (1 - q) * p(kG1);
  return out;
}

double vis_of(const Populations& p, const NvRateModel& m) { return emission_rates(p, m).first; }
double ir_of(const Populations& p, const NvRateModel& m) { return emission_rates(p, m).second; }

}  // namespace

void validate(const NvRateModel& m) {
  for (double k : {m.k_exc, m.k_ge0, m.k_ge1, m.k_es0, m.k_es1, m.k_s, m.k_sg0, m.k_sg1})
    require(std::isfinite(k) && k >= 0, "NV rates must be finite and non-negative");
  require(m.k_es1 > m.k_es0, "NV model needs k_es1 > k_es0");
}

Populations evolve(const Populations& state, const NvRateModel& model, bool laser_on, double t_s) {
  require(t_s >= 0, "evolution time must be non-negative");
  if (t_s == 0) return state;
  const Generator step = (rate_matrix<double>(model, laser_on) * t_s).exp();
  return checked(step * state, "evolve");
}

Populations apply_pi_pulse(const Populations& state) {
  Populations out = state;
  std::swap(out(kG0), out(kG1));
  return out;
}

Populations apply_rotation(const Populations& state, double angle_rad) {
  const double s = std::sin(angle_rad / 2);
  return mix_ground(state, s * s);
}

std::pair<double, double> emission_rates(const Populations& p, const NvRateModel& m) {
  return {m.k_ge0 * p(kE0) + m.k_ge1 * p(kE1), m.k_s * p(kSA)};
}

Populations ground_state(int spin) {
  require(spin == 0 || spin == 1, "spin label must be 0 or 1");
  Populations p = Populations::Zero();
  p(spin == 0 ? kG0 : kG1) = 1.0;
  return p;
}

Populations steady_state(const NvRateModel& model) {
  validate(model);
  require(model.k_exc > 0, "steady state needs a non-zero pump rate");
  return stationary(rate_matrix<double>(model, true), "pumped steady state");
}

double PulseSequence::period() const {
  double t = 0;
  for (const auto& s : segments) t += s.duration_s;
  return t;
}

void validate(const PulseSequence& seq) {
  require(!seq.segments.empty(), "pulse sequence has no segments");
  for (const auto& s : seq.segments)
    require(std::isfinite(s.duration_s) && s.duration_s > 0,
            "pulse segment durations must be positive and finite");
}

PulseSequence default_sequence(int spin) {
  require(spin == 0 || spin == 1, "spin label must be 0 or 1");
  PulseSequence seq;
  seq.segments.push_back({15e-6, true, Microwave::Off, 0});
  seq.segments.push_back({6.793e-6, false, Microwave::Off, 0});
  seq.segments.push_back({207e-9, false, spin == 1 ? Microwave::PiPulse : Microwave::Off, 0});
  return seq;
}

Populations periodic_state(const NvRateModel& model, const PulseSequence& seq) {
  validate(model);
  validate(seq);
  Generator map = Generator::Identity();
  for (const auto& s : seq.segments) {
    map = (rate_matrix<double>(model, s.laser) * s.duration_s).exp() * map;
    Generator mw = Generator::Identity();
    for (int j = 0; j < kNvLevels; ++j) mw.col(j) = apply_microwave(Generator::Identity().col(j), s);
    map = mw * map;
  }
  return stationary(map - Generator::Identity(), "periodic sequence state");
}

EmissionTrace sequence_emission(const NvRateModel& model, const PulseSequence& seq,
                                const Populations& start, double bin_s, Eigen::Index n_bins) {
  validate(model);
  validate(seq);
  require(bin_s > 0 && n_bins >= 0, "bin width must be positive");

  std::vector<double> seg_end;
  double acc = 0;
  for (const auto& s : seq.segments) seg_end.push_back(acc += s.duration_s);
  const double period = acc;

  // Pieces repeat (mostly one bin wide); key on femtoseconds.
  std::map<std::pair<bool, long long>, Propagator> cache;
  auto piece = [&](bool laser, double h) -> const Propagator& {
    const long long key = std::llround(h * 1e15);
    auto it = cache.find({laser, key});
    if (it == cache.end())
      it = cache.emplace(std::make_pair(laser, key), propagator(model, laser, double(key) * 1e-15))
               .first;
    return it->second;
  };

  EmissionTrace out;
  out.bin_start_s.resize(n_bins);
  out.vis.resize(n_bins);
  out.ir.resize(n_bins);
  Populations p = start;
  std::size_t seg = 0;
  double cycle_offset = 0;  // start time of the current repetition
  double t = 0;
  for (Eigen::Index b = 0; b < n_bins; ++b) {
    const double t_hi = double(b + 1) * bin_s;
    Populations integral = Populations::Zero();
    while (t < t_hi) {
      const double boundary = cycle_offset + seg_end[seg];
      const double stop = std::min(t_hi, boundary);
      if (stop > t) {
        const Propagator& prop = piece(seq.segments[seg].laser, stop - t);
        integral += prop.integral * p;
        p = prop.step * p;
      }
      t = stop;
      if (boundary - t <= 1e-18) {
        p = apply_microwave(p, seq.segments[seg]);
        t = boundary;
        if (++seg == seq.segments.size()) {
          seg = 0;
          cycle_offset += period;
        }
      }
    }
    const Populations mean = integral / bin_s;
    out.bin_start_s(b) = double(b) * bin_s;
    std::tie(out.vis(b), out.ir(b)) = emission_rates(mean, model);
  }
  return out;
}

EmissionTrace sequence_emission(const NvRateModel& model, const PulseSequence& seq, double bin_s,
                                Eigen::Index n_bins) {
  return sequence_emission(model, seq, periodic_state(model, seq), bin_s, n_bins);
}

EmissionTrace pumped_transient(const NvRateModel& model, const Populations& start,
                               const Eigen::VectorXd& t_s) {
  EmissionTrace out;
  out.bin_start_s = t_s;
  out.vis.resize(t_s.size());
  out.ir.resize(t_s.size());
  for (Eigen::Index i = 0; i < t_s.size(); ++i)
    std::tie(out.vis(i), out.ir(i)) = emission_rates(evolve(start, model, true, t_s(i)), model);
  return out;
}

double one_over_e_time(const Eigen::VectorXd& t_s, const Eigen::VectorXd& trace) {
  if (t_s.size() != trace.size() || t_s.size() < 2)
    throw DataError("decay trace needs matching axes with at least two samples");
  Eigen::Index peak_at = 0;
  trace.cwiseAbs().maxCoeff(&peak_at);
  const double threshold = std::abs(trace(peak_at)) / std::numbers::e;
  for (Eigen::Index i = peak_at + 1; i < trace.size(); ++i) {
    const double hi = std::abs(trace(i - 1)), lo = std::abs(trace(i));
    if (lo <= threshold) {
      const double frac = (hi - threshold) / (hi - lo);
      return t_s(i - 1) + frac * (t_s(i) - t_s(i - 1)) - t_s(peak_at);
    }
  }
  throw DataError("trace never falls to 1/e of its extremum");
}

double ir_to_vis_contrast_ratio(const NvRateModel& model) {
  const Populations plain = steady_state(model);
  // Fast ground-spin mixing stands in for resonant driving.
  Generator mixed = rate_matrix<double>(model, true);
  const double k_mix = 1e3 * (model.k_exc + model.k_sg0 + model.k_sg1);
  mixed(kG1, kG0) += k_mix;
  mixed(kG0, kG0) -= k_mix;
  mixed(kG0, kG1) += k_mix;
  mixed(kG1, kG1) -= k_mix;
  const Populations driven = stationary(mixed, "driven steady state");
  const double vis_drop = (vis_of(plain, model) - vis_of(driven, model)) / vis_of(plain, model);
  const double ir_rise = (ir_of(driven, model) - ir_of(plain, model)) / ir_of(plain, model);
  if (!(vis_drop > 0)) throw NumericalError("model has no visible spin contrast");
  return ir_rise / vis_drop;
}

OdmrTrace simulate_odmr(const NvRateModel& model, const std::vector<OdmrResonance>& resonances,
                        const Eigen::VectorXd& sweep_mhz) {
  for (const auto& r : resonances) {
    require(r.contrast >= 0 && r.contrast < 1, "ODMR contrast must lie in [0, 1)");
    require(r.linewidth_mhz > 0, "ODMR linewidth must be positive");
  }
  OdmrTrace out;
  out.frequencies_mhz = sweep_mhz;
  out.vis = Eigen::VectorXd::Ones(sweep_mhz.size());
  out.ir = Eigen::VectorXd::Ones(sweep_mhz.size());
  if (resonances.empty()) return out;
  out.ir_gain = ir_to_vis_contrast_ratio(model);
  for (Eigen::Index i = 0; i < sweep_mhz.size(); ++i) {
    double dip = 0;
    for (const auto& r : resonances)
      dip += r.contrast * lorentzian_peak<double>(sweep_mhz(i), r.frequency_mhz, r.linewidth_mhz);
    out.vis(i) = 1.0 - dip;
    out.ir(i) = 1.0 + out.ir_gain * dip;
  }
  return out;
}

std::pair<double, double> aligned_field_resonances_mhz(double field_gauss, double zero_field_mhz,
                                                       double gyromagnetic_mhz_per_g) {
  const double split = gyromagnetic_mhz_per_g * field_gauss;
  return {zero_field_mhz - split, zero_field_mhz + split};
}

RabiTrace simulate_rabi(const NvRateModel& model, double t_pi_s, double t2_star_s,
                        const Eigen::VectorXd& durations_s, double readout_s) {
  require(t_pi_s > 0 && t2_star_s > 0, "Rabi times must be positive");
  require(readout_s > 0, "readout window must be positive");
  validate(model);
  // Pumped, then left dark long enough for the singlet to empty.
  const Populations start = evolve(steady_state(model), model, false, 20e-6);
  const Propagator readout = propagator(model, true, readout_s);
  const double vis0 = vis_of(readout.integral * start, model);
  const double ir0 = ir_of(readout.integral * start, model);

  RabiTrace out;
  out.durations_s = durations_s;
  out.transfer.resize(durations_s.size());
  out.vis.resize(durations_s.size());
  out.ir.resize(durations_s.size());
  for (Eigen::Index i = 0; i < durations_s.size(); ++i) {
    const double tau = durations_s(i);
    require(tau >= 0, "Rabi durations must be non-negative");
    const double q =
        0.5 * (1.0 - std::cos(std::numbers::pi * tau / t_pi_s) * std::exp(-tau / t2_star_s));
    out.transfer(i) = q;
    const Populations read = readout.integral * mix_ground(start, q);
    out.vis(i) = vis_of(read, model) / vis0;
    out.ir(i) = ir_of(read, model) / ir0;
  }
  return out;
}

std::string format_trajectory(const Eigen::VectorXd& t_s, const std::vector<Populations>& states,
                              const NvRateModel& model) {
  if (std::size_t(t_s.size()) != states.size())
    throw DataError("trajectory times and states differ in length");
  std::ostringstream os;
  os << "t_s,p_g0,p_g1,p_e0,p_e1,p_sA,p_sB,vis_rate,ir_rate\n";
  for (std::size_t i = 0; i < states.size(); ++i) {
    os << io::format_number(t_s(Eigen::Index(i)));
    for (int k = 0; k < kNvLevels; ++k) os << ',' << io::format_number(states[i](k));
    const auto [vis, ir] = emission_rates(states[i], model);
    os << ',' << io::format_number(vis) << ',' << io::format_number(ir) << '\n';
  }
  return os.str();
}

}  // namespace ftpl
