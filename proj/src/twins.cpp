#include "ftpl/twins.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ftpl/errors.hpp"
#include "ftpl/random.hpp"
#include "ftpl/text_io.hpp"

namespace ftpl {

double Birefringence::at(double wavelength_nm) const {
  if (!dispersive()) return constant;
  const double lo = wavelengths_nm.front();
  const double hi = wavelengths_nm.back();
  if (wavelength_nm < lo || wavelength_nm > hi) {
    std::ostringstream os;
    os << "birefringence table covers [" << lo << ", " << hi << "] nm; " << wavelength_nm
       << " nm would need extrapolation";
    throw ExtrapolationError(os.str());
  }
  const auto it = std::upper_bound(wavelengths_nm.begin(), wavelengths_nm.end(), wavelength_nm);
  const auto i = std::min<std::size_t>(std::size_t(it - wavelengths_nm.begin()),
                                       wavelengths_nm.size() - 1);
  const double t = (wavelength_nm - wavelengths_nm[i - 1]) / (wavelengths_nm[i] - wavelengths_nm[i - 1]);
  return values[i - 1] + t * (values[i] - values[i - 1]);
}

double TwinsModel::sin_apex() const { return std::sin(deg_to_rad(apex_angle_deg)); }

void validate(const Birefringence& dn) {
  if (!dn.dispersive()) {
    require(dn.constant > 0, "birefringence must be > 0");
    return;
  }
  require(dn.wavelengths_nm.size() == dn.values.size() && dn.values.size() >= 2,
          "birefringence table needs >= 2 rows of (wavelength, dn)");
  for (std::size_t i = 0; i < dn.values.size(); ++i) {
    require(dn.values[i] > 0, "birefringence must be > 0");
    if (i > 0)
      require(dn.wavelengths_nm[i] > dn.wavelengths_nm[i - 1],
              "birefringence table wavelengths must increase");
  }
}

void validate(const TwinsModel& m) {
  require(m.apex_angle_deg > 0 && m.apex_angle_deg < 90, "apex angle must lie in (0, 90) deg");
  require(m.travel_max_mm > 0, "travel range must be > 0");
  require(m.visibility >= 0 && m.visibility <= 1, "visibility must lie in [0, 1]");
  require(m.zero_delay_position_mm >= 0 && m.zero_delay_position_mm <= m.travel_max_mm,
          "zero-delay position must lie within the travel range");
  validate(m.birefringence);
}

ScanSchedule ScanSchedule::uniform(double start_mm, double step_mm, Eigen::Index n_steps,
                                   double dwell_s, double motor_overhead_s) {
  require(n_steps >= 2, "scan needs at least two positions");
  ScanSchedule s;
  s.positions_mm = Eigen::VectorXd::LinSpaced(n_steps, start_mm,
                                              start_mm + double(n_steps - 1) * step_mm);
  s.dwell_s = dwell_s;
  s.motor_overhead_s = motor_overhead_s;
  validate(s);
  return s;
}

ScanSchedule ScanSchedule::symmetric(double center_mm, double half_range_mm, Eigen::Index n_steps,
                                     double dwell_s, double motor_overhead_s) {
  require(n_steps >= 2 && half_range_mm > 0, "symmetric scan needs n >= 2 and range > 0");
  ScanSchedule s;
  s.positions_mm = Eigen::VectorXd::LinSpaced(n_steps, center_mm - half_range_mm,
                                              center_mm + half_range_mm);
  s.dwell_s = dwell_s;
  s.motor_overhead_s = motor_overhead_s;
  validate(s);
  return s;
}

void validate(const ScanSchedule& s) {
  require(s.positions_mm.size() >= 2, "scan needs at least two positions");
  require(s.dwell_s > 0, "dwell must be > 0");
  require(s.motor_overhead_s >= 0, "motor overhead must be >= 0");
  const double step = s.step_mm();
  require(step > 0, "scan positions must be strictly increasing");
  const double scale = std::max(std::abs(s.positions_mm(0)), std::abs(s.positions_mm.tail(1)(0)));
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    const double d = s.positions_mm(i) - s.positions_mm(i - 1);
    if (std::abs(d - step) > 1e-9 * std::max(step, scale))
      throw CalibrationError("scan positions are not uniformly spaced");
  }
}

void validate(const ScanSchedule& s, const TwinsModel& m) {
  validate(s);
  validate(m);
  const double tol = 1e-9 * m.travel_max_mm;
  if (s.positions_mm.minCoeff() < -tol || s.positions_mm.maxCoeff() > m.travel_max_mm + tol)
    throw ParameterError("scan positions exceed the wedge travel range");
}

double delay_per_mm(const TwinsModel& model, double lambda_nm) {
  return model.birefringence.at(lambda_nm) * 1e-3 * model.sin_apex() / kSpeedOfLight;
}

double delay_at(const TwinsModel& model, double x_mm, double lambda_nm) {
  validate(model);
  require(x_mm >= 0 && x_mm <= model.travel_max_mm, "wedge position outside travel range");
  return delay_per_mm(model, lambda_nm) * (x_mm - model.zero_delay_position_mm);
}

double resolution_at(const TwinsModel& model, double lambda_nm, double x_max_effective_mm) {
  validate(model);
  require(lambda_nm > 0 && x_max_effective_mm > 0, "resolution needs positive inputs");
  const double x_nm = x_max_effective_mm * 1e6;
  return 0.605 * lambda_nm * lambda_nm /
         (model.birefringence.at(lambda_nm) * x_nm * model.sin_apex());
}

double schedule_duration(const ScanSchedule& s) {
  validate(s);
  return double(s.size()) * (s.dwell_s + s.motor_overhead_s);
}

double fit_motor_overhead(Eigen::Index n_steps, const Eigen::VectorXd& dwell_s,
                          const Eigen::VectorXd& total_s) {
  require(n_steps > 0 && dwell_s.size() == total_s.size() && dwell_s.size() > 0,
          "overhead fit needs matching, non-empty dwell and total lists");
  require((total_s.array() > 0).all(), "measured totals must be positive");
  // residual_i = n (d_i + o) / T_i - 1, linear in o
  const double n = double(n_steps);
  const Eigen::ArrayXd slope = n / total_s.array();
  const Eigen::ArrayXd offset = n * dwell_s.array() / total_s.array() - 1.0;
  return -(slope * offset).sum() / slope.square().sum();
}

Eigen::VectorXd interference_rates(const Eigen::VectorXd& detected_density,
                                   const SpectralGrid& grid, const TwinsModel& model,
                                   const Eigen::VectorXd& positions_mm) {
  validate(grid);
  validate(model);
  require(detected_density.size() == grid.n_points, "density does not match grid");
  const Eigen::VectorXd freqs = grid.frequencies();
  const Eigen::VectorXd photons = detected_density.cwiseProduct(grid.trapezoid_weights());

  // Per-frequency delay slope (s/mm). Constant unless the birefringence is
  // tabulated.
  Eigen::VectorXd slope(grid.n_points);
  if (model.birefringence.dispersive()) {
    for (Eigen::Index k = 0; k < grid.n_points; ++k)
      slope(k) = photons(k) > 0 ? delay_per_mm(model, hz_to_nm(freqs(k))) : 0.0;
  } else {
    slope.setConstant(delay_per_mm(model, 0.0));
  }

  const double two_pi = 2.0 * std::numbers::pi;
  const double dc = 0.5 * photons.sum();
  Eigen::VectorXd rates(positions_mm.size());
  for (Eigen::Index j = 0; j < positions_mm.size(); ++j) {
    const double dx = positions_mm(j) - model.zero_delay_position_mm;
    double ac = 0;
    for (Eigen::Index k = 0; k < grid.n_points; ++k) {
      if (photons(k) == 0) continue;
      ac += photons(k) * std::cos(two_pi * freqs(k) * slope(k) * dx);
    }
    rates(j) = dc + 0.5 * model.visibility * ac;
  }
  return rates;
}

Eigen::VectorXd expected_interferogram_rates(const EmitterSpectrum& spectrum,
                                             const SpectralGrid& grid, const TwinsModel& model,
                                             const PhotonCounterModel& counter,
                                             const Eigen::VectorXd& positions_mm) {
  validate(counter);
  Eigen::VectorXd density = evaluate_density(spectrum, grid).density;
  if (counter.eta.tabulated()) {
    for (Eigen::Index k = 0; k < grid.n_points; ++k)
      density(k) *= counter.eta.at(hz_to_nm(grid.frequency(k)));
  } else {
    density *= counter.eta.constant;
  }
  Eigen::VectorXd rates = interference_rates(density, grid, model, positions_mm);
  rates.array() += counter.dark_cps;
  return rates.cwiseMin(counter.saturation_cps);
}

Interferogram sample_interferogram(const Eigen::VectorXd& rates, const ScanSchedule& schedule,
                                   const TwinsModel& model, std::uint64_t seed) {
  validate(schedule, model);
  require(rates.size() == schedule.size(), "rate vector does not match the schedule");
  Interferogram ig;
  ig.positions_mm = schedule.positions_mm;
  ig.counts.resize(schedule.size());
  for (Eigen::Index j = 0; j < schedule.size(); ++j) {
    auto rng = make_rng(seed, std::uint64_t(j));
    ig.counts(j) = double(poisson_draw(rng, rates(j) * schedule.dwell_s));
  }
  ig.dwell_s = schedule.dwell_s;
  ig.schedule = schedule;
  ig.model = model;
  ig.seed = seed;
  return ig;
}

Interferogram synthesize_interferogram(const EmitterSpectrum& spectrum, const SpectralGrid& grid,
                                       const TwinsModel& model, const PhotonCounterModel& counter,
                                       const ScanSchedule& schedule, std::uint64_t seed) {
  validate(schedule, model);
  const Eigen::VectorXd rates =
      expected_interferogram_rates(spectrum, grid, model, counter, schedule.positions_mm);
  return sample_interferogram(rates, schedule, model, seed);
}

namespace {

std::string birefringence_text(const Birefringence& dn) {
  if (!dn.dispersive()) return io::format_number(dn.constant);
  std::string out;
  for (std::size_t i = 0; i < dn.values.size(); ++i)
    out += (i ? ";" : "") + io::format_number(dn.wavelengths_nm[i]) + ":" +
           io::format_number(dn.values[i]);
  return out;
}

Birefringence parse_birefringence(const std::string& text) {
  Birefringence dn;
  if (text.find(':') == std::string::npos) {
    dn.constant = std::stod(text);
    return dn;
  }
  std::stringstream ss(text);
  std::string pair;
  while (std::getline(ss, pair, ';')) {
    const auto colon = pair.find(':');
    if (colon == std::string::npos) throw FormatError("bad birefringence table entry '" + pair + "'");
    dn.wavelengths_nm.push_back(std::stod(pair.substr(0, colon)));
    dn.values.push_back(std::stod(pair.substr(colon + 1)));
  }
  return dn;
}

}  // namespace

std::string model_hash(const TwinsModel& m) {
  std::ostringstream os;
  os << "apex=" << io::format_number(m.apex_angle_deg)
     << ";travel=" << io::format_number(m.travel_max_mm)
     << ";dn=" << birefringence_text(m.birefringence)
     << ";V=" << io::format_number(m.visibility)
     << ";x0=" << io::format_number(m.zero_delay_position_mm);
  return io::sha256_hex(os.str()).substr(0, 16);
}

std::string format_interferogram(const Interferogram& ig) {
  std::ostringstream os;
  os << "# ftpl interferogram\n"
     << "# channel=" << ig.channel << '\n'
     << "# dwell_s=" << io::format_number(ig.dwell_s) << '\n'
     << "# motor_overhead_s=" << io::format_number(ig.schedule.motor_overhead_s) << '\n'
     << "# seed=" << ig.seed << '\n'
     << "# model_hash=" << model_hash(ig.model) << '\n'
     << "# apex_angle_deg=" << io::format_number(ig.model.apex_angle_deg) << '\n'
     << "# travel_max_mm=" << io::format_number(ig.model.travel_max_mm) << '\n'
     << "# birefringence=" << birefringence_text(ig.model.birefringence) << '\n'
     << "# visibility=" << io::format_number(ig.model.visibility) << '\n'
     << "# zero_delay_position_mm=" << io::format_number(ig.model.zero_delay_position_mm) << '\n'
     << "position_mm,counts\n";
  for (Eigen::Index j = 0; j < ig.positions_mm.size(); ++j)
    os << io::format_number(ig.positions_mm(j)) << ',' << io::format_number(ig.counts(j)) << '\n';
  return os.str();
}

Interferogram parse_interferogram(const std::string& text) {
  const auto table = io::parse_commented_table(text);
  if (table.columns.size() != 2 || table.columns[0] != "position_mm" || table.columns[1] != "counts")
    throw FormatError("interferogram table must have columns position_mm,counts");
  Interferogram ig;
  const auto n = Eigen::Index(table.rows.size());
  ig.positions_mm.resize(n);
  ig.counts.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    ig.positions_mm(j) = table.rows[j][0];
    ig.counts(j) = table.rows[j][1];
    if (ig.counts(j) < 0) throw FormatError("interferogram counts must be >= 0");
  }
  ig.dwell_s = io::metadata_number(table, "dwell_s", 1.0);
  if (auto it = table.metadata.find("channel"); it != table.metadata.end()) ig.channel = it->second;
  if (auto it = table.metadata.find("seed"); it != table.metadata.end())
    ig.seed = std::stoull(it->second);
  ig.model.apex_angle_deg = io::metadata_number(table, "apex_angle_deg", ig.model.apex_angle_deg);
  ig.model.travel_max_mm = io::metadata_number(table, "travel_max_mm", ig.model.travel_max_mm);
  ig.model.visibility = io::metadata_number(table, "visibility", ig.model.visibility);
  ig.model.zero_delay_position_mm =
      io::metadata_number(table, "zero_delay_position_mm", ig.model.zero_delay_position_mm);
  if (auto it = table.metadata.find("birefringence"); it != table.metadata.end())
    ig.model.birefringence = parse_birefringence(it->second);
  ig.schedule.positions_mm = ig.positions_mm;
  ig.schedule.dwell_s = ig.dwell_s;
  ig.schedule.motor_overhead_s = io::metadata_number(table, "motor_overhead_s", 0.0);
  return ig;
}

}  // namespace ftpl
