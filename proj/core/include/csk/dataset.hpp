#pragma once

// On-disk packet datasets, one directory per channel condition:
//
//   DIR/config.txt    run configuration (see config.hpp)
//   DIR/manifest.txt  "config_hash <hex>", then one line per packet:
//                     "<id> <seed> <n_bits> <payload hex> <trace file>"
//   DIR/<id>.csv      header "sample,cell0,...", one row of ADC codes per sample

#include <filesystem>
#include <vector>

#include "csk/config.hpp"
#include "csk/harness.hpp"

namespace csk {

struct StoredDataset {
  RunConfig config;
  std::vector<PacketRecord> packets;
};

void save_dataset(const std::filesystem::path& dir, const RunConfig& config, const std::vector<PacketRecord>& packets);

/// Throws Io if the manifest hash no longer matches config.txt.
StoredDataset load_dataset(const std::filesystem::path& dir);

}  // namespace csk
