#include "csk/channel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "csk/error.hpp"

namespace csk {

void CellProfile::validate() const {
  if (responsivity.power.size() != responsivity.wavelengths_nm.size() || responsivity.power.empty()) {
    throw Error(ErrorCode::GridMismatch, "responsivity of " + name + " does not match its grid");
  }
  bool any = false;
  for (double r : responsivity.power) {
    if (r < 0.0) throw Error(ErrorCode::InvalidArgument, "negative responsivity in " + name);
    any = any || r > 0.0;
  }
  if (!any) throw Error(ErrorCode::InvalidArgument, "all-zero responsivity in " + name);
  if (!(gain > 0.0)) throw Error(ErrorCode::InvalidArgument, "gain must be positive in " + name);
  if (tau_ms < 0.0) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0 in " + name);
}

void ChannelConfig::validate() const {
  if (profiles.empty()) throw Error(ErrorCode::Config, "at least one cell profile is required");
  for (const auto& p : profiles) {
    p.validate();
    require_same_grid(p.responsivity.wavelengths_nm, profiles.front().responsivity.wavelengths_nm);
  }
  if (!(distance_m > 0.0)) throw Error(ErrorCode::Config, "distance_m must be positive");
  if (ambient_lux < 0.0) throw Error(ErrorCode::Config, "ambient_lux must be >= 0");
  if (adc_bits < 8 || adc_bits > 16) throw Error(ErrorCode::Config, "adc_bits must be in [8, 16]");
  if (!(fs_hz > 0.0)) throw Error(ErrorCode::Config, "fs_hz must be positive");
  if (!(full_scale_v > 0.0)) throw Error(ErrorCode::Config, "full_scale_v must be positive");
  if (noise_sigma < 0.0) throw Error(ErrorCode::Config, "noise_sigma must be >= 0");
  for (double m : miscalibration) {
    if (!(m > 0.0)) throw Error(ErrorCode::Config, "miscalibration factors must be positive");
  }
}

double ChannelConfig::lsb_v() const { return full_scale_v / static_cast<double>((1 << adc_bits) - 1); }

std::vector<double> default_grid() { return default_cmf().wavelengths_nm; }

Spectrum normalized_to_unit_power(Spectrum s) {
  const double total = trapezoid(s.wavelengths_nm, s.power);
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "spectrum has no power");
  for (double& p : s.power) p /= total;
  return s;
}

std::array<Spectrum, 3> default_led_spectra(const std::vector<double>& grid, double fwhm_nm) {
  return {normalized_to_unit_power(gaussian_spectrum(kRedCenterNm, fwhm_nm, grid)),
          normalized_to_unit_power(gaussian_spectrum(kGreenCenterNm, fwhm_nm, grid)),
          normalized_to_unit_power(gaussian_spectrum(kBlueCenterNm, fwhm_nm, grid))};
}

Spectrum flat_ambient(const std::vector<double>& grid) {
  return normalized_to_unit_power(Spectrum{grid, std::vector<double>(grid.size(), 1.0)});
}

namespace {

double overlap(const Spectrum& a, const Spectrum& b) {
  require_same_grid(a.wavelengths_nm, b.wavelengths_nm);
  std::vector<double> prod(a.power.size());
  for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = a.power[k] * b.power[k];
  return trapezoid(a.wavelengths_nm, prod);
}

}  // namespace

Eigen::MatrixXd coupling_matrix(const std::vector<CellProfile>& profiles, const std::array<Spectrum, 3>& led_spectra) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(profiles.size()), 3);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const Spectrum unit = normalized_to_unit_power(led_spectra[c]);
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = overlap(profiles[i].responsivity, unit);
    }
  }
  return k;
}

Eigen::VectorXd ambient_coupling(const std::vector<CellProfile>& profiles, const Spectrum& ambient) {
  Eigen::VectorXd kappa(static_cast<Eigen::Index>(profiles.size()));
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    kappa(static_cast<Eigen::Index>(i)) = overlap(profiles[i].responsivity, ambient);
  }
  return kappa;
}

void calibrate_gains(std::vector<CellProfile>& profiles, const std::array<Spectrum, 3>& led_spectra,
                     double full_scale_v) {
  const Eigen::MatrixXd k = coupling_matrix(profiles, led_spectra);
  const double d2 = kReferenceDistanceM * kReferenceDistanceM;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const double peak = k.row(static_cast<Eigen::Index>(i)).maxCoeff();
    profiles[i].gain = kReferencePeakFraction * full_scale_v * d2 / peak;
  }
}

namespace {

// Sum of Gaussian bands on top of a flat floor.
Spectrum bands(const std::vector<double>& grid, double floor,
               std::initializer_list<std::array<double, 3>> peaks /* centre, width, amplitude */) {
  Spectrum s{grid, std::vector<double>(grid.size(), floor)};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (const auto& [centre, width, amp] : peaks) {
      const double u = (grid[k] - centre) / width;
      s.power[k] += amp * std::exp(-0.5 * u * u);
    }
  }
  return s;
}

Spectrum linear_ramp(const std::vector<double>& grid, double at_start, double at_end) {
  Spectrum s{grid, std::vector<double>(grid.size())};
  const double span = grid.back() - grid.front();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    s.power[k] = at_start + (at_end - at_start) * (grid[k] - grid.front()) / span;
  }
  return s;
}

}  // namespace

std::vector<CellProfile> default_profiles() {
  const auto grid = default_grid();
  std::vector<CellProfile> p = {
      {"poly-si", linear_ramp(grid, 1.0, 0.5), 1.0, 0.2},
      {"amorphous-si", bands(grid, 0.35, {{{440.0, 70.0, 0.65}}}), 1.0, 0.2},
      {"organic-a", bands(grid, 0.30, {{{460.0, 30.0, 1.0}}, {{620.0, 35.0, 0.45}}}), 1.0, 0.3},
      {"organic-b", bands(grid, 0.30, {{{520.0, 30.0, 1.0}}, {{690.0, 35.0, 0.6}}}), 1.0, 0.4},
      {"organic-c", bands(grid, 0.30, {{{585.0, 40.0, 1.0}}}), 1.0, 0.5},
      {"organic-d", bands(grid, 0.30, {{{425.0, 30.0, 0.6}}, {{645.0, 30.0, 1.0}}}), 1.0, 1.2},
      {"organic-e", bands(grid, 0.30, {{{495.0, 25.0, 0.8}}, {{600.0, 30.0, 1.0}}}), 1.0, 0.6},
  };
  calibrate_gains(p, default_led_spectra(grid));
  return p;
}

std::vector<CellProfile> silicon_profiles() {
  const auto grid = default_grid();
  std::vector<CellProfile> p;
  for (int k = 0; k < 7; ++k) {
    // Gently falling response with a few percent of cell-to-cell spread.
    const double top = 1.0 + 0.01 * k;
    const double drop = 0.08 * (1.0 + 0.05 * (k - 3));
    p.push_back({"silicon-" + std::to_string(k + 1), linear_ramp(grid, top, top * (1.0 - drop)), 1.0, 0.2});
  }
  calibrate_gains(p, default_led_spectra(grid));
  return p;
}

namespace {

void put_double(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

}  // namespace

// Format: one block per cell
//   cell <name> <gain> <tau_ms> <n>
//   <wavelength> <responsivity>   (n lines)
void save_profiles(std::ostream& out, const std::vector<CellProfile>& profiles) {
  out << "# csk cell profiles v1\n";
  for (const auto& p : profiles) {
    out << "cell " << p.name << ' ';
    put_double(out, p.gain);
    out << ' ';
    put_double(out, p.tau_ms);
    out << ' ' << p.responsivity.power.size() << '\n';
    for (std::size_t k = 0; k < p.responsivity.power.size(); ++k) {
      put_double(out, p.responsivity.wavelengths_nm[k]);
      out << ' ';
      put_double(out, p.responsivity.power[k]);
      out << '\n';
    }
  }
}

std::vector<CellProfile> load_profiles(std::istream& in) {
  std::vector<CellProfile> profiles;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream head(line);
    std::string tag;
    CellProfile p;
    std::size_t n = 0;
    if (!(head >> tag >> p.name >> p.gain >> p.tau_ms >> n) || tag != "cell") {
      throw Error(ErrorCode::Io, "bad profile header: " + line);
    }
    for (std::size_t k = 0; k < n; ++k) {
      double w = 0, r = 0;
      if (!std::getline(in, line)) throw Error(ErrorCode::Io, "truncated profile " + p.name);
      std::istringstream row(line);
      if (!(row >> w >> r)) throw Error(ErrorCode::Io, "bad profile row: " + line);
      p.responsivity.wavelengths_nm.push_back(w);
      p.responsivity.power.push_back(r);
    }
    p.validate();
    profiles.push_back(std::move(p));
  }
  if (profiles.empty()) throw Error(ErrorCode::Io, "no profiles found");
  return profiles;
}

void save_profiles(const std::filesystem::path& path, const std::vector<CellProfile>& profiles) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  save_profiles(out, profiles);
}

std::vector<CellProfile> load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load_profiles(in);
}

ChannelConfig default_channel_config() {
  ChannelConfig cfg;
  const auto grid = default_grid();
  cfg.profiles = default_profiles();
  cfg.led_spectra = default_led_spectra(grid);
  cfg.ambient_spectrum = flat_ambient(grid);
  return cfg;
}

ChannelConfig with_cells(const ChannelConfig& cfg, const std::vector<std::size_t>& cells) {
  ChannelConfig out = cfg;
  out.profiles.clear();
  for (std::size_t i : cells) {
    if (i >= cfg.profiles.size()) throw Error(ErrorCode::OutOfBounds, "cell index out of range");
    out.profiles.push_back(cfg.profiles[i]);
  }
  return out;
}

int samples_per_slot(double fs_hz, double baud_hz) {
  if (!(baud_hz > 0.0) || !(fs_hz > 0.0)) throw Error(ErrorCode::Config, "rates must be positive");
  const double ratio = fs_hz / baud_hz;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw Error(ErrorCode::Config, "fs must be an integer multiple of the baud rate");
  }
  return static_cast<int>(rounded);
}

namespace {

struct CellModel {
  Eigen::MatrixXd gk;        // g_i K_{i,c} / d^2
  Eigen::VectorXd offset;    // g_i * lux * kappa_i * A
};

CellModel cell_model(const ChannelConfig& cfg) {
  const Eigen::MatrixXd k = coupling_matrix(cfg.profiles, cfg.led_spectra);
  const Eigen::VectorXd kappa = ambient_coupling(cfg.profiles, normalized_to_unit_power(cfg.ambient_spectrum));
  const auto n = static_cast<Eigen::Index>(cfg.profiles.size());
  CellModel m{Eigen::MatrixXd(n, 3), Eigen::VectorXd(n)};
  const double d2 = cfg.distance_m * cfg.distance_m;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = cfg.profiles[static_cast<std::size_t>(i)].gain;
    m.gk.row(i) = g * k.row(i) / d2;
    m.offset(i) = g * cfg.ambient_lux * kappa(i) * kAmbientPerLux;
  }
  return m;
}

}  // namespace

Eigen::VectorXd steady_state_volts(const ChannelConfig& cfg, const Rgb& optical_power) {
  cfg.validate();
  const CellModel m = cell_model(cfg);
  return m.gk * Eigen::Vector3d(optical_power[0], optical_power[1], optical_power[2]) + m.offset;
}

AdcTrace propagate(const PowerWaveform& w, const ChannelConfig& cfg, std::size_t lead_samples,
                   std::size_t tail_samples) {
  cfg.validate();
  const int spb = samples_per_slot(cfg.fs_hz, w.baud_hz);
  const CellModel m = cell_model(cfg);
  const auto n_cells = static_cast<Eigen::Index>(cfg.profiles.size());
  const std::size_t n_body = w.size() * static_cast<std::size_t>(spb);
  const auto n_samples = static_cast<Eigen::Index>(lead_samples + n_body + tail_samples);

  // Ideal (memoryless) voltages. The LED divides the commanded duty by the
  // calibrated efficiency, scaled by any true-efficiency mismatch.
  Eigen::MatrixXd ideal(n_cells, n_samples);
  ideal.colwise() = m.offset;
  for (std::size_t slot = 0; slot < w.size(); ++slot) {
    Rgb p = w.optical_power(slot);
    for (std::size_t c = 0; c < 3; ++c) p[c] *= cfg.miscalibration[c];
    const Eigen::VectorXd v = m.gk * Eigen::Vector3d(p[0], p[1], p[2]) + m.offset;
    const auto first = static_cast<Eigen::Index>(lead_samples + slot * static_cast<std::size_t>(spb));
    for (Eigen::Index k = 0; k < spb; ++k) ideal.col(first + k) = v;
  }

  AdcTrace t;
  t.fs_hz = cfg.fs_hz;
  t.adc_bits = cfg.adc_bits;
  t.full_scale_v = cfg.full_scale_v;
  t.analog.resize(n_cells, n_samples);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double noise_v = cfg.noise_sigma * cfg.full_scale_v;

  for (Eigen::Index i = 0; i < n_cells; ++i) {
    const double tau_s = cfg.profiles[static_cast<std::size_t>(i)].tau_ms * 1e-3;
    const double alpha = tau_s > 0.0 ? 1.0 - std::exp(-1.0 / (cfg.fs_hz * tau_s)) : 1.0;
    double state = n_samples > 0 ? ideal(i, 0) : 0.0;
    for (Eigen::Index k = 0; k < n_samples; ++k) {
      state += alpha * (ideal(i, k) - state);
      t.analog(i, k) = state;
    }
  }
  if (noise_v > 0.0) {
    // Sample-major draw order keeps the noise stream independent of cell count per sample.
    for (Eigen::Index k = 0; k < n_samples; ++k) {
      for (Eigen::Index i = 0; i < n_cells; ++i) t.analog(i, k) += noise_v * gauss(rng);
    }
  }

  const int max_code = (1 << cfg.adc_bits) - 1;
  const double lsb = cfg.lsb_v();
  t.codes.resize(n_cells, n_samples);
  t.volts.resize(n_cells, n_samples);
  Eigen::Index clipped = 0;
  for (Eigen::Index k = 0; k < n_samples; ++k) {
    for (Eigen::Index i = 0; i < n_cells; ++i) {
      const long long code = std::llround(t.analog(i, k) / lsb);
      if (code >= max_code) ++clipped;
      const int c = static_cast<int>(std::clamp<long long>(code, 0, max_code));
      t.codes(i, k) = c;
      t.volts(i, k) = c * lsb;
    }
  }
  t.saturated = n_samples > 0 && static_cast<double>(clipped) > 0.01 * static_cast<double>(n_cells * n_samples);
  return t;
}

}  // namespace csk
