#include "csk/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "csk/error.hpp"

namespace csk {

namespace {

void write_trace(const std::filesystem::path& path, const AdcTrace& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string());
  out << "sample";
  for (Eigen::Index i = 0; i < t.n_cells(); ++i) out << ",cell" << i;
  out << '\n';
  for (Eigen::Index k = 0; k < t.n_samples(); ++k) {
    out << k;
    for (Eigen::Index i = 0; i < t.n_cells(); ++i) out << ',' << t.codes(i, k);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

AdcTrace read_trace(const std::filesystem::path& path, const ChannelConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const auto n_cells = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  if (n_cells != static_cast<Eigen::Index>(cfg.n_cells())) {
    throw Error(ErrorCode::Io, path.string() + ": cell count differs from the configuration");
  }
  std::vector<std::vector<int>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<int> row;
    std::stringstream ss(line);
    std::string item;
    std::getline(ss, item, ',');  // sample index
    while (std::getline(ss, item, ',')) {
      int v = 0;
      const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
      if (res.ec != std::errc()) throw Error(ErrorCode::Io, path.string() + ": bad code '" + item + "'");
      row.push_back(v);
    }
    if (static_cast<Eigen::Index>(row.size()) != n_cells) throw Error(ErrorCode::Io, path.string() + ": ragged row");
    rows.push_back(std::move(row));
  }
  AdcTrace t;
  t.fs_hz = cfg.fs_hz;
  t.adc_bits = cfg.adc_bits;
  t.full_scale_v = cfg.full_scale_v;
  const auto n = static_cast<Eigen::Index>(rows.size());
  t.codes.resize(n_cells, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n_cells; ++i) t.codes(i, k) = rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  t.volts = t.codes.cast<double>() * cfg.lsb_v();
  t.analog = t.volts;
  const int max_code = (1 << cfg.adc_bits) - 1;
  const auto clipped = (t.codes.array() >= max_code).count();
  t.saturated = n > 0 && static_cast<double>(clipped) > 0.01 * static_cast<double>(n_cells * n);
  return t;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const RunConfig& config, const std::vector<PacketRecord>& packets) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.txt", std::ios::binary);
    if (!cfg) throw Error(ErrorCode::Io, "cannot write " + (dir / "config.txt").string());
    cfg << to_config_text(config);
  }
  std::ofstream man(dir / "manifest.txt", std::ios::binary);
  if (!man) throw Error(ErrorCode::Io, "cannot write " + (dir / "manifest.txt").string());
  man << "config_hash " << config_hash(config) << '\n';
  for (const PacketRecord& p : packets) {
    const std::string file = p.id + ".csv";
    man << p.id << ' ' << p.seed << ' ' << p.bits.size() << ' ' << (p.bits.empty() ? "-" : bits_to_hex(p.bits)) << ' '
        << file << '\n';
    write_trace(dir / file, p.trace);
  }
  if (!man) throw Error(ErrorCode::Io, "failed writing manifest");
}

StoredDataset load_dataset(const std::filesystem::path& dir) {
  StoredDataset ds;
  ds.config = load_config(dir / "config.txt");
  const Scenario s = build_scenario(ds.config);

  std::ifstream man(dir / "manifest.txt");
  if (!man) throw Error(ErrorCode::Io, "cannot open " + (dir / "manifest.txt").string());
  std::string key, hash;
  man >> key >> hash;
  if (key != "config_hash") throw Error(ErrorCode::Io, "manifest lacks config_hash");
  if (hash != config_hash(ds.config)) throw Error(ErrorCode::Io, "config.txt does not match the manifest hash");

  std::string id, hex, file;
  std::uint64_t seed = 0;
  std::size_t n_bits = 0;
  while (man >> id >> seed >> n_bits >> hex >> file) {
    PacketRecord r;
    r.id = id;
    r.seed = seed;
    if (hex != "-") r.bits = bits_from_hex(hex);
    if (r.bits.size() < n_bits) throw Error(ErrorCode::Io, "payload of " + id + " is shorter than declared");
    r.bits.resize(n_bits);
    r.trace = read_trace(dir / file, s.channel);
    ds.packets.push_back(std::move(r));
  }
  return ds;
}

}  // namespace csk
