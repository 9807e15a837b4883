#include "csk/colorspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "csk/error.hpp"
#include "csk/phy_tx.hpp"

namespace csk {

namespace detail {
extern const char* const kCie1931Table;
}

void CmfTable::validate() const {
  const std::size_t n = wavelengths_nm.size();
  if (n < 2 || xbar.size() != n || ybar.size() != n || zbar.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "CMF table needs >= 2 rows of equal length");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(wavelengths_nm[i] > wavelengths_nm[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "CMF wavelengths must be strictly ascending");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (xbar[i] < 0.0 || ybar[i] < 0.0 || zbar[i] < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "CMF weights must be non-negative");
    }
  }
}

CmfTable parse_cmf(std::istream& in) {
  CmfTable t;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    double w = 0, x = 0, y = 0, z = 0;
    if (!(row >> w >> x >> y >> z)) {
      throw Error(ErrorCode::InvalidArgument, "bad CMF row: " + line);
    }
    t.wavelengths_nm.push_back(w);
    t.xbar.push_back(x);
    t.ybar.push_back(y);
    t.zbar.push_back(z);
  }
  t.validate();
  return t;
}

CmfTable load_cmf(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_cmf(in);
}

const CmfTable& default_cmf() {
  static const CmfTable table = [] {
    std::istringstream in(detail::kCie1931Table);
    return parse_cmf(in);
  }();
  return table;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::GridMismatch, "integrand length differs from grid");
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  }
  return acc;
}

void require_same_grid(std::span<const double> a, std::span<const double> b) {
  if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) {
    throw Error(ErrorCode::GridMismatch, "wavelength grids differ");
  }
}

ChromaticityPoint xy_from_spectrum(const Spectrum& s, const CmfTable& cmf) {
  require_same_grid(s.wavelengths_nm, cmf.wavelengths_nm);
  if (s.power.size() != s.wavelengths_nm.size()) {
    throw Error(ErrorCode::GridMismatch, "spectrum power length differs from its grid");
  }
  std::vector<double> prod(s.power.size());
  auto tristimulus = [&](const std::vector<double>& bar) {
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = s.power[i] * bar[i];
    return trapezoid(s.wavelengths_nm, prod);
  };
  const double X = tristimulus(cmf.xbar);
  const double Y = tristimulus(cmf.ybar);
  const double Z = tristimulus(cmf.zbar);
  const double sum = X + Y + Z;
  if (!(sum > 1e-15)) throw Error(ErrorCode::ZeroTristimulus, "X+Y+Z is zero");
  return {X / sum, Y / sum};
}

Spectrum gaussian_spectrum(double center_nm, double fwhm_nm, std::span<const double> grid) {
  if (!(fwhm_nm > 0.0)) throw Error(ErrorCode::InvalidArgument, "fwhm must be positive");
  const double sigma = fwhm_nm / 2.3548;
  Spectrum s;
  s.wavelengths_nm.assign(grid.begin(), grid.end());
  s.power.reserve(grid.size());
  for (double w : grid) {
    const double u = (w - center_nm) / sigma;
    s.power.push_back(std::exp(-0.5 * u * u));
  }
  return s;
}

ChromaticityPoint led_chromaticity(double center_nm, double fwhm_nm, const CmfTable& cmf) {
  if (!(center_nm > 380.0 && center_nm < 780.0)) {
    throw Error(ErrorCode::InvalidArgument, "LED centre outside 380-780 nm");
  }
  return xy_from_spectrum(gaussian_spectrum(center_nm, fwhm_nm, cmf.wavelengths_nm), cmf);
}

Vertices default_vertices() {
  static const Vertices v = {
      led_chromaticity(kRedCenterNm, kLedFwhmNm, default_cmf()),
      led_chromaticity(kGreenCenterNm, kLedFwhmNm, default_cmf()),
      led_chromaticity(kBlueCenterNm, kLedFwhmNm, default_cmf()),
  };
  return v;
}

ChromaticityPoint mix_chromaticity(const Rgb& p, const Vertices& v) {
  return {p[0] * v[0].x + p[1] * v[1].x + p[2] * v[2].x,
          p[0] * v[0].y + p[1] * v[1].y + p[2] * v[2].y};
}

double triangle_area(const Vertices& v) {
  return 0.5 * std::abs((v[1].x - v[0].x) * (v[2].y - v[0].y) -
                        (v[2].x - v[0].x) * (v[1].y - v[0].y));
}

std::size_t Constellation::symbol_for_bits(std::uint32_t pattern) const {
  const auto it = std::find(bit_map.begin(), bit_map.end(), pattern);
  if (it == bit_map.end()) throw Error(ErrorCode::InvalidArgument, "bit pattern outside constellation");
  return static_cast<std::size_t>(it - bit_map.begin());
}

namespace {

std::vector<Rgb> barycentric_layout(int order) {
  switch (order) {
    case 4:
      return {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    case 8:
      return {{1, 0, 0},     {0, 1, 0},         {0, 0, 1},          {0.5, 0.5, 0},
              {0, 0.5, 0.5}, {0.5, 0, 0.5},     {0.5, 0.25, 0.25},  {0.25, 0.25, 0.5}};
    case 16: {
      std::vector<Rgb> w;
      for (int i = 4; i >= 0; --i) {
        for (int j = 4 - i; j >= 0; --j) {
          const int k = 4 - i - j;
          w.push_back({i / 4.0, j / 4.0, k / 4.0});
        }
      }
      w.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3});
      return w;
    }
    default:
      throw Error(ErrorCode::InvalidArgument, "constellation order must be 4, 8 or 16");
  }
}

}  // namespace

Constellation make_constellation(int order, const Vertices& vertices) {
  const auto weights = barycentric_layout(order);
  if (triangle_area(vertices) <= 1e-9) {
    throw Error(ErrorCode::DegenerateTriangle, "LED chromaticities are collinear");
  }
  Constellation c;
  c.order = order;
  c.vertices = vertices;
  c.bits_per_symbol = static_cast<int>(std::lround(std::log2(order)));
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const ChromaticityPoint p = mix_chromaticity(weights[k], vertices);
    c.points.push_back(p);
    c.powers.push_back(symbol_powers(p, vertices));
    c.bit_map.push_back(static_cast<std::uint32_t>(k));
  }
  return c;
}

double distance(ChromaticityPoint a, ChromaticityPoint b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

std::size_t nearest_symbol(ChromaticityPoint p, const Constellation& c) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < c.points.size(); ++k) {
    const double dx = p.x - c.points[k].x;
    const double dy = p.y - c.points[k].y;
    const double d2 = dx * dx + dy * dy;
    // Relative slack so rounding in equidistant cases cannot beat the lower index.
    if (d2 < best_d2 * (1.0 - 1e-12)) {
      best_d2 = d2;
      best = k;
    }
  }
  return best;
}

double min_pairwise_distance(const Constellation& c) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    for (std::size_t j = i + 1; j < c.points.size(); ++j) {
      best = std::min(best, distance(c.points[i], c.points[j]));
    }
  }
  return best;
}

}  // namespace csk
