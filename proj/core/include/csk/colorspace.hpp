#pragma once

// CIE 1931 colorimetry and CSK constellation geometry.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace csk {

/// Linear RGB optical power (or PWM duty) triple, ordered R, G, B.
using Rgb = std::array<double, 3>;

/// Standard-observer colour matching functions on an ascending wavelength grid.
struct CmfTable {
  std::vector<double> wavelengths_nm;
  std::vector<double> xbar;
  std::vector<double> ybar;
  std::vector<double> zbar;

  std::size_t size() const { return wavelengths_nm.size(); }
  /// Throws Error(InvalidArgument) when the table is malformed.
  void validate() const;
};

/// Parses the whitespace-separated `wavelength_nm xbar ybar zbar` format.
/// Lines starting with `#` and blank lines are skipped.
CmfTable parse_cmf(std::istream& in);
CmfTable load_cmf(const std::filesystem::path& path);

/// The CIE 1931 2-degree table (380-780 nm, 5 nm) compiled into the library.
const CmfTable& default_cmf();

/// Spectral power distribution sampled on a wavelength grid.
struct Spectrum {
  std::vector<double> wavelengths_nm;
  std::vector<double> power;
};

struct ChromaticityPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const ChromaticityPoint&, const ChromaticityPoint&) = default;
};

/// Red, green and blue LED chromaticities, in that order.
using Vertices = std::array<ChromaticityPoint, 3>;

/// Trapezoidal integral of y over the (possibly non-uniform) grid x.
double trapezoid(std::span<const double> x, std::span<const double> y);

/// Throws Error(GridMismatch) unless both grids are element-wise identical.
void require_same_grid(std::span<const double> a, std::span<const double> b);

/// Integrates the spectrum against the CMFs and projects to (x, y).
ChromaticityPoint xy_from_spectrum(const Spectrum& s, const CmfTable& cmf);

/// Gaussian line shape on the given grid, peak value 1.
Spectrum gaussian_spectrum(double center_nm, double fwhm_nm, std::span<const double> grid);

/// Chromaticity of a Gaussian LED line.
ChromaticityPoint led_chromaticity(double center_nm, double fwhm_nm, const CmfTable& cmf);

inline constexpr double kRedCenterNm = 625.0;
inline constexpr double kGreenCenterNm = 525.0;
inline constexpr double kBlueCenterNm = 465.0;
inline constexpr double kLedFwhmNm = 20.0;

/// Chromaticities of the default 625/525/465 nm LEDs.
Vertices default_vertices();

/// Forward mixture map: the chromaticity produced by power triple p.
ChromaticityPoint mix_chromaticity(const Rgb& p, const Vertices& v);

double triangle_area(const Vertices& v);

struct Constellation {
  int order = 0;
  Vertices vertices{};
  std::vector<ChromaticityPoint> points;
  std::vector<Rgb> powers;
  int bits_per_symbol = 0;
  /// bit_map[symbol] is the symbol's bit pattern, MSB first over bits_per_symbol bits.
  std::vector<std::uint32_t> bit_map;

  std::size_t size() const { return points.size(); }
  /// Inverse of bit_map.
  std::size_t symbol_for_bits(std::uint32_t pattern) const;
};

/// Builds the 4-, 8- or 16-point constellation inside the vertex triangle.
///
/// 4:  R, G, B, centroid.
/// 8:  R, G, B, edge midpoints RG, GB, BR, then interior points with
///     barycentric weights (1/2, 1/4, 1/4) and (1/4, 1/4, 1/2).
/// 16: the 15-point degree-4 barycentric lattice (i, j, k)/4 enumerated with
///     i descending then j descending, followed by the centroid.
///
/// Power triples are solved from the chromaticities; the bit map is natural
/// binary (symbol index == bit value).
Constellation make_constellation(int order, const Vertices& vertices);

/// Index of the closest constellation point; ties go to the lowest index.
std::size_t nearest_symbol(ChromaticityPoint p, const Constellation& c);

double distance(ChromaticityPoint a, ChromaticityPoint b);

/// Smallest pairwise distance between constellation points.
double min_pairwise_distance(const Constellation& c);

}  // namespace csk
