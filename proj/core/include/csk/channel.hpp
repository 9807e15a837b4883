#pragma once

// Optical channel and solar-cell array simulator.
//
// Every cell i sees
//   v_i = g_i * ( (K s)_i / d^2 + lux * kappa_i * A )
// followed by a first-order low-pass with time constant tau_i, additive white
// Gaussian noise and an N-bit ADC. K_{i,c} is the overlap of the cell
// responsivity with the unit-power LED line c, kappa_i the overlap with the
// unit-power ambient spectrum.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "csk/colorspace.hpp"
#include "csk/phy_tx.hpp"

namespace csk {

struct CellProfile {
  std::string name;
  Spectrum responsivity;
  /// Post-amplifier gain in volts per unit coupled optical power.
  double gain = 1.0;
  double tau_ms = 0.0;

  void validate() const;
};

/// Reference geometry used for gain calibration and the ambient scale.
inline constexpr double kReferenceDistanceM = 0.25;
/// One lux adds 1/5000 of the reference-distance signal per unit ambient overlap.
inline constexpr double kAmbientPerLux = 1.0 / (5000.0 * kReferenceDistanceM * kReferenceDistanceM);
/// Each cell's strongest primary at the reference distance reads this fraction of full scale.
inline constexpr double kReferencePeakFraction = 0.6;
inline constexpr double kDefaultFullScaleV = 3.3;
inline constexpr double kReferenceNoiseSigma = 0.005;

struct ChannelConfig {
  std::vector<CellProfile> profiles;
  std::array<Spectrum, 3> led_spectra;
  double distance_m = kReferenceDistanceM;
  double ambient_lux = 0.0;
  Spectrum ambient_spectrum;
  /// Noise standard deviation as a fraction of ADC full scale.
  double noise_sigma = kReferenceNoiseSigma;
  int adc_bits = 12;
  double fs_hz = 2000.0;
  double full_scale_v = kDefaultFullScaleV;
  std::uint64_t seed = 0;
  /// True LED efficiency relative to the transmitter's calibration; 1 = exact.
  Rgb miscalibration{1.0, 1.0, 1.0};

  void validate() const;
  std::size_t n_cells() const { return profiles.size(); }
  double lsb_v() const;
};

/// Quantized per-cell voltage record.
struct AdcTrace {
  double fs_hz = 0.0;
  int adc_bits = 12;
  double full_scale_v = kDefaultFullScaleV;
  Eigen::MatrixXi codes;   // n_cells x n_samples
  Eigen::MatrixXd volts;   // dequantized codes
  Eigen::MatrixXd analog;  // pre-quantization voltages (after dynamics and noise)
  /// More than 1% of samples clipped at full scale.
  bool saturated = false;

  Eigen::Index n_cells() const { return codes.rows(); }
  Eigen::Index n_samples() const { return codes.cols(); }
};

/// 380-780 nm at 5 nm, matching the bundled CMF table.
std::vector<double> default_grid();

/// Unit-power Gaussian LED lines at 625/525/465 nm.
std::array<Spectrum, 3> default_led_spectra(const std::vector<double>& grid, double fwhm_nm = kLedFwhmNm);

/// Flat spectrum normalised to unit integrated power.
Spectrum flat_ambient(const std::vector<double>& grid);

/// Scales `s` so its trapezoidal integral is 1.
Spectrum normalized_to_unit_power(Spectrum s);

/// K (n_cells x 3): overlap of each responsivity with each unit-power LED line.
Eigen::MatrixXd coupling_matrix(const std::vector<CellProfile>& profiles, const std::array<Spectrum, 3>& led_spectra);

/// Overlap of each responsivity with the (unit-power) ambient spectrum.
Eigen::VectorXd ambient_coupling(const std::vector<CellProfile>& profiles, const Spectrum& ambient);

/// Sets every gain so the cell's strongest primary at the reference distance
/// reads kReferencePeakFraction of full scale.
void calibrate_gains(std::vector<CellProfile>& profiles, const std::array<Spectrum, 3>& led_spectra,
                     double full_scale_v = kDefaultFullScaleV);

/// Seven synthetic multi-material cells: polycrystalline Si, amorphous Si and
/// five organics. Cell index 5 (the sixth cell) is the slowest.
std::vector<CellProfile> default_profiles();

/// Seven near-identical silicon cells.
std::vector<CellProfile> silicon_profiles();

void save_profiles(std::ostream& out, const std::vector<CellProfile>& profiles);
std::vector<CellProfile> load_profiles(std::istream& in);
void save_profiles(const std::filesystem::path& path, const std::vector<CellProfile>& profiles);
std::vector<CellProfile> load_profiles(const std::filesystem::path& path);

/// Default configuration: seven multi-material cells, 25 cm, dark, reference noise.
ChannelConfig default_channel_config();

/// Keeps only the listed cells (in the given order).
ChannelConfig with_cells(const ChannelConfig& cfg, const std::vector<std::size_t>& cells);

/// Noise-free, dynamics-free cell voltages for a constant optical power triple.
Eigen::VectorXd steady_state_volts(const ChannelConfig& cfg, const Rgb& optical_power);

/// Drives the array with the waveform, optionally padded with dark samples.
/// Sample k is taken at (k + 0.5)/fs, so every slot spans fs/baud whole samples.
AdcTrace propagate(const PowerWaveform& w, const ChannelConfig& cfg, std::size_t lead_samples = 0,
                   std::size_t tail_samples = 0);

/// Samples per slot; throws Error(Config) unless fs is an integer multiple of baud.
int samples_per_slot(double fs_hz, double baud_hz);

}  // namespace csk
