#include "ftpl/spectral_model.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "ftpl/errors.hpp"

namespace ftpl {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Eigen::VectorXd SpectralGrid::frequencies() const {
  return Eigen::VectorXd::LinSpaced(n_points, f_min, f_max);
}

Eigen::VectorXd SpectralGrid::trapezoid_weights() const {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n_points, step());
  w(0) *= 0.5;
  w(n_points - 1) *= 0.5;
  return w;
}

SpectralGrid SpectralGrid::from_wavelengths(double lambda_short_nm, double lambda_long_nm,
                                            Eigen::Index n_points) {
  require(lambda_short_nm > 0 && lambda_long_nm > lambda_short_nm,
          "grid wavelengths must satisfy 0 < short < long");
  SpectralGrid grid{nm_to_hz(lambda_long_nm), nm_to_hz(lambda_short_nm), n_points};
  validate(grid);
  return grid;
}

void validate(const SpectralGrid& grid) {
  require(grid.f_min > 0, "SpectralGrid: f_min must be > 0");
  require(grid.f_max > grid.f_min, "SpectralGrid: f_max must exceed f_min");
  require(grid.n_points >= 2, "SpectralGrid: n_points must be >= 2");
}

double SpectralComponent::cdf(double f_hz) const {
  return shape == LineShape::Lorentzian ? lorentzian_cdf(f_hz, center_hz(), fwhm_hz)
                                        : gaussian_cdf(f_hz, center_hz(), fwhm_hz);
}

double SpectralComponent::density(double f_hz) const {
  return shape == LineShape::Lorentzian ? lorentzian_density(f_hz, center_hz(), fwhm_hz)
                                        : gaussian_density(f_hz, center_hz(), fwhm_hz);
}

double EmitterSpectrum::total_weight() const {
  double sum = 0;
  for (const auto& c : components) sum += c.relative_weight;
  return sum;
}

double EmitterSpectrum::component_brightness(std::size_t i) const {
  const double total = total_weight();
  return total > 0 ? total_brightness * components.at(i).relative_weight / total : 0.0;
}

void validate(const EmitterSpectrum& spectrum) {
  require(spectrum.total_brightness >= 0, "EmitterSpectrum: total_brightness must be >= 0");
  require(!spectrum.components.empty(), "EmitterSpectrum: needs at least one component");
  for (const auto& c : spectrum.components) {
    require(c.center_nm > 0, "SpectralComponent: center must be > 0");
    require(c.fwhm_hz > 0, "SpectralComponent: fwhm must be > 0");
    require(c.relative_weight >= 0, "SpectralComponent: relative_weight must be >= 0");
  }
  require(spectrum.total_brightness == 0 || spectrum.total_weight() > 0,
          "EmitterSpectrum: all component weights are zero");
}

double default_psb_center_nm(double zpl_nm) { return hz_to_nm(nm_to_hz(zpl_nm) - 10e12); }

EmitterSpectrum build_divacancy_spectrum(double zpl_nm, double zpl_fwhm_hz, double psb_center_nm,
                                         double psb_fwhm_hz, double zpl_to_psb_ratio,
                                         double brightness) {
  require(zpl_nm > 0 && zpl_fwhm_hz > 0 && psb_center_nm > 0 && psb_fwhm_hz > 0,
          "build_divacancy_spectrum: wavelengths and linewidths must be positive");
  require(zpl_to_psb_ratio > 0, "build_divacancy_spectrum: ratio must be positive");
  require(brightness >= 0, "build_divacancy_spectrum: brightness must be >= 0");

  // w_zpl / w_psb = ratio, w_zpl + w_psb = 1
  const double w_psb = 1.0 / (1.0 + zpl_to_psb_ratio);
  const double w_zpl = zpl_to_psb_ratio * w_psb;
  EmitterSpectrum s;
  s.name = "divacancy";
  s.total_brightness = brightness;
  s.components = {{LineShape::Lorentzian, zpl_nm, zpl_fwhm_hz, w_zpl},
                  {LineShape::Gaussian, psb_center_nm, psb_fwhm_hz, w_psb}};
  return s;
}

namespace {

// Profile mass of each trapezoid cell divided by the cell width.
Eigen::VectorXd cell_averaged_profile(const SpectralComponent& c, const SpectralGrid& grid,
                                      double& captured) {
  const Eigen::Index n = grid.n_points;
  const double df = grid.step();
  Eigen::VectorXd edges(n + 1);
  edges(0) = c.cdf(grid.f_min);
  for (Eigen::Index k = 1; k < n; ++k) edges(k) = c.cdf(grid.f_min + (double(k) - 0.5) * df);
  edges(n) = c.cdf(grid.f_max);
  const Eigen::VectorXd mass = edges.tail(n) - edges.head(n);
  captured = edges(n) - edges(0);
  return mass.cwiseQuotient(grid.trapezoid_weights()).cwiseMax(0.0);
}

void check_coverage(const SpectralComponent& c, const SpectralGrid& grid, bool& warning) {
  const double f0 = c.center_hz();
  if (f0 < grid.f_min || f0 > grid.f_max) {
    std::ostringstream os;
    os << "component at " << c.center_nm << " nm lies outside the spectral grid ["
       << hz_to_nm(grid.f_max) << ", " << hz_to_nm(grid.f_min) << "] nm";
    throw CoverageError(os.str());
  }
  const double margin = 3.0 * c.fwhm_hz;
  if (f0 - grid.f_min < margin || grid.f_max - f0 < margin) warning = true;
}

}  // namespace

Eigen::VectorXd component_density(const EmitterSpectrum& spectrum, std::size_t index,
                                  const SpectralGrid& grid) {
  validate(grid);
  validate(spectrum);
  const auto& c = spectrum.components.at(index);
  bool warning = false;
  check_coverage(c, grid, warning);
  const double brightness = spectrum.component_brightness(index);
  if (brightness == 0) return Eigen::VectorXd::Zero(grid.n_points);
  double captured = 0;
  Eigen::VectorXd profile = cell_averaged_profile(c, grid, captured);
  if (captured <= 0) throw CoverageError("component has no support on the spectral grid");
  return profile * (brightness / captured);
}

DensitySamples evaluate_density(const EmitterSpectrum& spectrum, const SpectralGrid& grid) {
  validate(grid);
  validate(spectrum);
  DensitySamples out;
  out.density = Eigen::VectorXd::Zero(grid.n_points);
  for (const auto& c : spectrum.components) check_coverage(c, grid, out.coverage_warning);
  for (std::size_t i = 0; i < spectrum.components.size(); ++i)
    out.density += component_density(spectrum, i, grid);
  return out;
}

double band_photon_rate(const EmitterSpectrum& spectrum, double f_lo_hz, double f_hi_hz) {
  double rate = 0;
  for (std::size_t i = 0; i < spectrum.components.size(); ++i) {
    const auto& c = spectrum.components[i];
    rate += spectrum.component_brightness(i) * (c.cdf(f_hi_hz) - c.cdf(f_lo_hz));
  }
  return rate;
}

SpectralGrid covering_grid(const EmitterSpectrum& spectrum, double step_hz, double margin_fwhm) {
  validate(spectrum);
  require(step_hz > 0, "covering_grid: step must be > 0");
  double lo = std::numeric_limits<double>::max();
  double hi = 0;
  for (const auto& c : spectrum.components) {
    lo = std::min(lo, c.center_hz() - margin_fwhm * c.fwhm_hz);
    hi = std::max(hi, c.center_hz() + margin_fwhm * c.fwhm_hz);
  }
  lo = std::max(lo, step_hz);
  const auto n = static_cast<Eigen::Index>(std::ceil((hi - lo) / step_hz)) + 1;
  return SpectralGrid{lo, lo + double(n - 1) * step_hz, std::max<Eigen::Index>(n, 2)};
}

EmitterLibrary default_emitter_library() {
  return {
      {"PL1", {1133.0}, "(hh) divacancy, 4H-SiC"},
      {"PL2", {1132.0}, "(kk) divacancy, 4H-SiC"},
      {"PL3", {1108.0}, "basal divacancy, 4H-SiC"},
      {"PL4", {1078.0}, "basal (kh) divacancy, 4H-SiC"},
      {"NV-triplet", {637.0}, "NV- triplet ZPL, diamond"},
      {"NV-singlet", {1042.0}, "NV- singlet (IR) line, diamond"},
  };
}

std::optional<EmitterLibraryEntry> find_emitter(const EmitterLibrary& library,
                                                const std::string& name) {
  const auto it = std::find_if(library.begin(), library.end(),
                               [&](const auto& e) { return e.name == name; });
  if (it == library.end()) return std::nullopt;
  return *it;
}

void validate(const EmitterLibrary& library) {
  std::set<std::string> names;
  for (const auto& e : library) {
    require(!e.name.empty(), "emitter library: empty name");
    require(names.insert(e.name).second, "emitter library: duplicate name '" + e.name + "'");
    require(!e.zpl_wavelengths_nm.empty(), "emitter library: '" + e.name + "' has no ZPL");
    for (double w : e.zpl_wavelengths_nm)
      require(w > 0, "emitter library: '" + e.name + "' has a non-positive wavelength");
  }
}

EmitterLibrary parse_emitter_library(const std::string& text) {
  EmitterLibrary library;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ls(t);
    std::string field;
    while (std::getline(ls, field, '|')) fields.push_back(trim(field));
    if (fields.size() < 2 || fields.size() > 3)
      throw FormatError("emitter library line " + std::to_string(line_no) +
                        ": expected `name | zpl_nm[,...] | notes`");
    EmitterLibraryEntry entry{fields[0], {}, fields.size() == 3 ? fields[2] : ""};
    std::stringstream ws(fields[1]);
    std::string token;
    while (std::getline(ws, token, ',')) {
      try {
        entry.zpl_wavelengths_nm.push_back(std::stod(trim(token)));
      } catch (const std::exception&) {
        throw FormatError("emitter library line " + std::to_string(line_no) +
                          ": bad wavelength '" + token + "'");
      }
    }
    library.push_back(std::move(entry));
  }
  validate(library);
  return library;
}

EmitterLibrary load_emitter_library(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open emitter library '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_emitter_library(buffer.str());
}

std::string format_emitter_library(const EmitterLibrary& library) {
  std::ostringstream os;
  os << "# name | zpl_nm[, zpl_nm...] | notes\n";
  os.precision(10);
  for (const auto& e : library) {
    os << e.name << " | ";
    for (std::size_t i = 0; i < e.zpl_wavelengths_nm.size(); ++i)
      os << (i ? ", " : "") << e.zpl_wavelengths_nm[i];
    os << " | " << e.notes << '\n';
  }
  return os.str();
}

}  // namespace ftpl
