#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "csk/channel.hpp"
#include "csk/error.hpp"
#include "csk/phy_tx.hpp"

using namespace csk;

namespace {

double oracle_trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

// Unit-power Gaussian line computed without the library.
std::vector<double> oracle_led(double center, double fwhm, const std::vector<double>& grid) {
  const double sigma = fwhm / 2.3548;
  std::vector<double> p(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) p[i] = std::exp(-0.5 * std::pow((grid[i] - center) / sigma, 2));
  const double total = oracle_trapezoid(grid, p);
  for (double& v : p) v /= total;
  return p;
}

double oracle_coupling(const Spectrum& r, const std::vector<double>& led) {
  std::vector<double> prod(led.size());
  for (std::size_t i = 0; i < led.size(); ++i) prod[i] = r.power[i] * led[i];
  return oracle_trapezoid(r.wavelengths_nm, prod);
}

ChannelConfig quiet_config() {
  ChannelConfig cfg = default_channel_config();
  cfg.noise_sigma = 0.0;
  for (auto& p : cfg.profiles) p.tau_ms = 0.0;
  return cfg;
}

PowerWaveform constant_waveform(const Rgb& p, std::size_t slots, double baud) {
  PowerWaveform w;
  w.baud_hz = baud;
  w.efficiency = EfficiencyTriple{};
  w.duty.assign(slots, apply_efficiency(p, w.efficiency));
  return w;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) { return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues(); }

double separation_ratio(const ChannelConfig& cfg) {
  const Constellation c = make_constellation(8, default_vertices());
  std::vector<Eigen::VectorXd> centroids;
  for (const Rgb& p : c.powers) centroids.push_back(steady_state_volts(cfg, p));
  double best = 1e300;
  for (std::size_t a = 0; a < centroids.size(); ++a)
    for (std::size_t b = a + 1; b < centroids.size(); ++b) best = std::min(best, (centroids[a] - centroids[b]).norm());
  return best / (kReferenceNoiseSigma * cfg.full_scale_v);
}

}  // namespace

TEST(Coupling, FlatResponsivitySeesTotalPower) {
  const auto grid = default_grid();
  CellProfile flat{"flat", {grid, std::vector<double>(grid.size(), 1.0)}, 1.0, 0.0};
  const Eigen::MatrixXd k = coupling_matrix({flat}, default_led_spectra(grid));
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(k(0, c), 1.0, 1e-12);
}

TEST(Coupling, RedBandCellMatchesIntegrationOracle) {
  const auto grid = default_grid();
  std::vector<double> r(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) r[i] = grid[i] >= 600 && grid[i] <= 700 ? 1.0 : 0.0;
  CellProfile band{"band", {grid, r}, 1.0, 0.0};
  const Eigen::MatrixXd k = coupling_matrix({band}, default_led_spectra(grid));
  EXPECT_NEAR(k(0, 0), oracle_coupling(band.responsivity, oracle_led(625, 20, grid)), 1e-12);
  EXPECT_NEAR(k(0, 2), oracle_coupling(band.responsivity, oracle_led(465, 20, grid)), 1e-12);
  EXPECT_GT(k(0, 0), 100.0 * k(0, 2));
}

TEST(Coupling, GridMismatchRejected) {
  const auto grid = default_grid();
  std::vector<double> shifted = grid;
  shifted[0] -= 1.0;
  CellProfile p{"p", {shifted, std::vector<double>(grid.size(), 1.0)}, 1.0, 0.0};
  try {
    coupling_matrix({p}, default_led_spectra(grid));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}

TEST(Profiles, DefaultSetIsWellConditioned) {
  const auto profiles = default_profiles();
  ASSERT_EQ(profiles.size(), 7u);
  const Eigen::MatrixXd k = coupling_matrix(profiles, default_led_spectra(default_grid()));
  const Eigen::VectorXd sv = singular_values(k);
  EXPECT_GT(sv(2), 1e-10 * sv(0));
  const Eigen::VectorXd sv2 = singular_values(k.transpose() * k);
  EXPECT_LT(sv2(0) / sv2(2), 1e4);
  for (Eigen::Index i = 0; i < k.size(); ++i) EXPECT_GE(k.data()[i], 0.0);
}

TEST(Profiles, DefaultTimeConstants) {
  const auto profiles = default_profiles();
  const double expected[] = {0.2, 0.2, 0.3, 0.4, 0.5, 1.2, 0.6};
  for (std::size_t i = 0; i < 7; ++i) EXPECT_DOUBLE_EQ(profiles[i].tau_ms, expected[i]);
}

TEST(Profiles, SiliconSetIsNearRankOne) {
  const Eigen::MatrixXd k = coupling_matrix(silicon_profiles(), default_led_spectra(default_grid()));
  const Eigen::VectorXd sv = singular_values(k);
  EXPECT_LT(sv(1) / sv(0), 0.05);
}

TEST(Profiles, SaveLoadIsByteIdentical) {
  for (const auto& set : {default_profiles(), silicon_profiles()}) {
    std::ostringstream a;
    save_profiles(a, set);
    std::istringstream in(a.str());
    std::ostringstream b;
    save_profiles(b, load_profiles(in));
    EXPECT_EQ(a.str(), b.str());
  }
}

TEST(Profiles, CalibrationHitsReferenceFraction) {
  const ChannelConfig cfg = quiet_config();
  for (const Rgb& p : {Rgb{1, 0, 0}, Rgb{0, 1, 0}, Rgb{0, 0, 1}}) {
    const Eigen::VectorXd v = steady_state_volts(cfg, p);
    EXPECT_LE(v.maxCoeff(), kReferencePeakFraction * cfg.full_scale_v + 1e-12);
  }
  Eigen::MatrixXd all(7, 3);
  all.col(0) = steady_state_volts(cfg, {1, 0, 0});
  all.col(1) = steady_state_volts(cfg, {0, 1, 0});
  all.col(2) = steady_state_volts(cfg, {0, 0, 1});
  for (Eigen::Index i = 0; i < 7; ++i) EXPECT_NEAR(all.row(i).maxCoeff(), 0.6 * 3.3, 1e-12);
}

TEST(Propagate, ConstantRedMatchesClosedForm) {
  const ChannelConfig cfg = quiet_config();
  const AdcTrace t = propagate(constant_waveform({1, 0, 0}, 3, 500), cfg);
  ASSERT_EQ(t.n_samples(), 12);
  const Eigen::MatrixXd k = coupling_matrix(cfg.profiles, cfg.led_spectra);
  for (Eigen::Index i = 0; i < t.n_cells(); ++i) {
    const double expected = cfg.profiles[static_cast<std::size_t>(i)].gain * k(i, 0) / 0.0625;
    for (Eigen::Index s = 0; s < t.n_samples(); ++s) {
      EXPECT_NEAR(t.analog(i, s), expected, 1e-12);
      EXPECT_NEAR(t.volts(i, s), expected, cfg.lsb_v() / 2 + 1e-12);
    }
  }
}

TEST(Propagate, InverseSquareLaw) {
  ChannelConfig near = quiet_config();
  ChannelConfig far = near;
  far.distance_m = 0.5;
  const auto w = constant_waveform({0.2, 0.5, 0.3}, 2, 500);
  const AdcTrace a = propagate(w, near);
  const AdcTrace b = propagate(w, far);
  EXPECT_LT((b.analog * 4.0 - a.analog).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Propagate, StepResponseFollowsRecursiveFilter) {
  ChannelConfig cfg = quiet_config();
  cfg = with_cells(cfg, {5});
  cfg.profiles[0].tau_ms = 1.2;
  const std::size_t lead = 8;
  const AdcTrace t = propagate(constant_waveform({1, 0, 0}, 5, 500), cfg, lead);
  const double target = steady_state_volts(cfg, {1, 0, 0})(0);
  const double alpha = 1.0 - std::exp(-1.0 / (2000.0 * 1.2e-3));
  double state = 0.0;
  for (std::size_t k = 1; k <= 20; ++k) {
    state += alpha * (target - state);
    const double closed = target * (1.0 - std::exp(-static_cast<double>(k) / (2000.0 * 1.2e-3)));
    EXPECT_NEAR(t.analog(0, static_cast<Eigen::Index>(lead + k - 1)), state, 1e-12);
    EXPECT_NEAR(state, closed, 1e-12);
  }
  for (std::size_t k = 0; k < lead; ++k) EXPECT_EQ(t.analog(0, static_cast<Eigen::Index>(k)), 0.0);
}

TEST(Propagate, LinearInPowerTriple) {
  const ChannelConfig cfg = quiet_config();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    const Rgb a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
    const Rgb sum{a[0] + b[0], a[1] + b[1], a[2] + b[2]};
    PowerWaveform w;
    w.baud_hz = 500;
    w.efficiency = EfficiencyTriple{};
    auto run = [&](const Rgb& p) {
      w.duty = {apply_efficiency(p, w.efficiency)};
      return propagate(w, cfg).analog;
    };
    const Eigen::MatrixXd lhs = run(sum);
    const Eigen::MatrixXd rhs = run(a) + run(b);
    ASSERT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9 * cfg.full_scale_v);
  }
}

TEST(Propagate, DoublingGainsDoublesAnalog) {
  ChannelConfig cfg = default_channel_config();
  cfg.noise_sigma = 0.0;
  ChannelConfig doubled = cfg;
  for (auto& p : doubled.profiles) p.gain *= 2.0;
  const auto w = constant_waveform({0.1, 0.3, 0.6}, 4, 500);
  const AdcTrace a = propagate(w, cfg, 3, 3);
  const AdcTrace b = propagate(w, doubled, 3, 3);
  EXPECT_EQ(b.analog, a.analog * 2.0);
}

TEST(Propagate, DeterministicPerSeed) {
  ChannelConfig cfg = default_channel_config();
  cfg.seed = 99;
  cfg.ambient_lux = 300;
  const auto w = constant_waveform({0.5, 0.25, 0.25}, 10, 500);
  const AdcTrace a = propagate(w, cfg, 5, 5);
  const AdcTrace b = propagate(w, cfg, 5, 5);
  EXPECT_EQ(a.codes, b.codes);
  cfg.seed = 100;
  EXPECT_NE(propagate(w, cfg, 5, 5).codes, a.codes);
}

TEST(Propagate, CodesStayInRangeAndSaturationIsFlagged) {
  ChannelConfig cfg = default_channel_config();
  cfg.distance_m = 0.1;
  const AdcTrace t = propagate(constant_waveform({1, 0, 0}, 10, 500), cfg);
  EXPECT_TRUE(t.saturated);
  EXPECT_GE(t.codes.minCoeff(), 0);
  EXPECT_LE(t.codes.maxCoeff(), 4095);
  cfg.distance_m = 0.25;
  EXPECT_FALSE(propagate(constant_waveform({1, 0, 0}, 10, 500), cfg).saturated);
}

TEST(Propagate, AmbientAddsConstantOffset) {
  ChannelConfig dark = quiet_config();
  ChannelConfig lit = dark;
  lit.ambient_lux = 1000;
  const auto w = constant_waveform({0, 0, 1}, 2, 500);
  const Eigen::MatrixXd diff = propagate(w, lit).analog - propagate(w, dark).analog;
  const Eigen::VectorXd kappa = ambient_coupling(dark.profiles, dark.ambient_spectrum);
  for (Eigen::Index i = 0; i < diff.rows(); ++i) {
    const double expected = dark.profiles[static_cast<std::size_t>(i)].gain * 1000 * kappa(i) * kAmbientPerLux;
    EXPECT_GT(expected, 0.0);
    for (Eigen::Index s = 0; s < diff.cols(); ++s) EXPECT_NEAR(diff(i, s), expected, 1e-12);
  }
}

TEST(Propagate, SampleCountIsSlotsTimesRatio) {
  const ChannelConfig cfg = quiet_config();
  EXPECT_EQ(propagate(constant_waveform({1, 0, 0}, 7, 250), cfg).n_samples(), 56);
  EXPECT_EQ(propagate(constant_waveform({1, 0, 0}, 7, 2000), cfg, 2, 3).n_samples(), 12);
  EXPECT_THROW(propagate(constant_waveform({1, 0, 0}, 7, 300), cfg), Error);
}

TEST(Config, Validation) {
  ChannelConfig cfg = default_channel_config();
  cfg.adc_bits = 7;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = default_channel_config();
  cfg.distance_m = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = default_channel_config();
  cfg.profiles.clear();
  EXPECT_THROW(cfg.validate(), Error);
  cfg = default_channel_config();
  cfg.profiles[2].gain = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Separability, MultiMaterialBeatsSilicon) {
  ChannelConfig multi = default_channel_config();
  ChannelConfig si = multi;
  si.profiles = silicon_profiles();
  calibrate_gains(si.profiles, si.led_spectra, si.full_scale_v);
  EXPECT_GT(separation_ratio(multi), 5.0);
  EXPECT_LT(separation_ratio(si), 1.0);
}
