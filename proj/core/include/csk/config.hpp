#pragma once

// Key-value run configuration: "key = value" lines, '#' starts a comment.
// Unknown keys, duplicate keys and malformed values are Error(Config).
//
// Keys and defaults:
//   order = 4                 baud_hz = 500
//   efficiency = 1,0.45,0.75  miscalibration = 1,1,1
//   preamble_slots = 10       anchor_ids = 0,1,2,3
//   anchor_order = 4          slots_per_anchor = 2
//   etb_state_slots = 10
//   profiles = default        (default | silicon | path to a profile file)
//   cells =                   (comma list of cell indices; empty keeps all)
//   led_fwhm_nm = 20          ambient = flat
//   distance_m = 0.25         ambient_lux = 0
//   noise_sigma = 0.005       adc_bits = 12
//   fs_hz = 2000              full_scale_v = 3.3
//   channel_seed = 0
//   lr0 = 0.001               plateau_factor = 0.5
//   plateau_patience = 5      max_epochs = 100
//   batch_size = 32           early_stop_patience = 15
//   train_seed = 0            val_fraction = 0.2
//   layers = 2                hidden = 64
//   dropout = 0.2             target_val_loss = 0
//   trials = 100              train_packets = 200
//   seed = 0

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "csk/harness.hpp"
#include "csk/neural.hpp"

namespace csk {

struct RunConfig {
  int order = 4;
  double baud_hz = 500.0;
  EfficiencyTriple efficiency;
  Rgb miscalibration{1.0, 1.0, 1.0};
  FrameLayout layout;
  std::string profiles = "default";
  std::vector<std::size_t> cells;
  double led_fwhm_nm = kLedFwhmNm;
  std::string ambient = "flat";
  double distance_m = kReferenceDistanceM;
  double ambient_lux = 0.0;
  double noise_sigma = kReferenceNoiseSigma;
  int adc_bits = 12;
  double fs_hz = 2000.0;
  double full_scale_v = kDefaultFullScaleV;
  std::uint64_t channel_seed = 0;
  nn::TrainConfig train;
  std::size_t trials = 100;
  std::size_t train_packets = 200;
  std::uint64_t seed = 0;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Applies one "key=value" override on top of an existing configuration.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Canonical text: every key, fixed order, shortest round-trip numbers.
std::string to_config_text(const RunConfig& cfg);

/// FNV-1a over the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Resolves profiles, cells and spectra into a runnable scenario.
Scenario build_scenario(const RunConfig& cfg);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace csk
