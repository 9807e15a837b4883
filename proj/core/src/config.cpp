#include "csk/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include "csk/error.hpp"

namespace csk {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const std::string t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw Error(ErrorCode::Config, "bad value '" + text + "' for " + key);
  }
  return v;
}

Rgb parse_triple(const std::string& key, const std::string& text) {
  const auto items = split_list(text);
  if (items.size() != 3) throw Error(ErrorCode::Config, key + " needs three comma-separated values");
  return {parse_number<double>(key, items[0]), parse_number<double>(key, items[1]),
          parse_number<double>(key, items[2])};
}

std::vector<std::size_t> parse_indices(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<std::size_t>(key, item));
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::string triple_text(const Rgb& t) {
  return format_double(t[0]) + "," + format_double(t[1]) + "," + format_double(t[2]);
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CSK_NUMBER_FIELD(name, member, type)                                                             \
  {                                                                                                      \
    name, Field {                                                                                        \
      [](RunConfig& c, const std::string& v) { c.member = parse_number<type>(name, v); },                \
          [](const RunConfig& c) {                                                                       \
            if constexpr (std::is_floating_point_v<type>) return format_double(c.member);                \
            else return std::to_string(c.member);                                                        \
          }                                                                                              \
    }                                                                                                    \
  }

// Ordered: to_config_text emits keys in this order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = {
      CSK_NUMBER_FIELD("order", order, int),
      CSK_NUMBER_FIELD("baud_hz", baud_hz, double),
      {"efficiency", Field{[](RunConfig& c, const std::string& v) {
                             const Rgb t = parse_triple("efficiency", v);
                             c.efficiency = {t[0], t[1], t[2]};
                           },
                           [](const RunConfig& c) { return triple_text(c.efficiency.as_rgb()); }}},
      {"miscalibration", Field{[](RunConfig& c, const std::string& v) { c.miscalibration = parse_triple("miscalibration", v); },
                               [](const RunConfig& c) { return triple_text(c.miscalibration); }}},
      CSK_NUMBER_FIELD("preamble_slots", layout.preamble_slots, int),
      {"anchor_ids", Field{[](RunConfig& c, const std::string& v) { c.layout.anchor_ids = parse_indices("anchor_ids", v); },
                           [](const RunConfig& c) { return join(c.layout.anchor_ids); }}},
      CSK_NUMBER_FIELD("anchor_order", layout.anchor_order, int),
      CSK_NUMBER_FIELD("slots_per_anchor", layout.slots_per_anchor, int),
      CSK_NUMBER_FIELD("etb_state_slots", layout.etb_state_slots, int),
      {"profiles", Field{[](RunConfig& c, const std::string& v) { c.profiles = trim(v); },
                         [](const RunConfig& c) { return c.profiles; }}},
      {"cells", Field{[](RunConfig& c, const std::string& v) { c.cells = parse_indices("cells", v); },
                      [](const RunConfig& c) { return join(c.cells); }}},
      CSK_NUMBER_FIELD("led_fwhm_nm", led_fwhm_nm, double),
      {"ambient", Field{[](RunConfig& c, const std::string& v) {
                          if (trim(v) != "flat") throw Error(ErrorCode::Config, "ambient must be 'flat'");
                          c.ambient = "flat";
                        },
                        [](const RunConfig& c) { return c.ambient; }}},
      CSK_NUMBER_FIELD("distance_m", distance_m, double),
      CSK_NUMBER_FIELD("ambient_lux", ambient_lux, double),
      CSK_NUMBER_FIELD("noise_sigma", noise_sigma, double),
      CSK_NUMBER_FIELD("adc_bits", adc_bits, int),
      CSK_NUMBER_FIELD("fs_hz", fs_hz, double),
      CSK_NUMBER_FIELD("full_scale_v", full_scale_v, double),
      CSK_NUMBER_FIELD("channel_seed", channel_seed, std::uint64_t),
      CSK_NUMBER_FIELD("lr0", train.lr0, double),
      CSK_NUMBER_FIELD("plateau_factor", train.plateau_factor, double),
      CSK_NUMBER_FIELD("plateau_patience", train.plateau_patience, int),
      CSK_NUMBER_FIELD("max_epochs", train.max_epochs, int),
      CSK_NUMBER_FIELD("batch_size", train.batch_size, int),
      CSK_NUMBER_FIELD("early_stop_patience", train.early_stop_patience, int),
      CSK_NUMBER_FIELD("train_seed", train.seed, std::uint64_t),
      CSK_NUMBER_FIELD("val_fraction", train.val_fraction, double),
      CSK_NUMBER_FIELD("layers", train.layers, int),
      CSK_NUMBER_FIELD("hidden", train.hidden, int),
      CSK_NUMBER_FIELD("dropout", train.dropout, double),
      CSK_NUMBER_FIELD("target_val_loss", train.target_val_loss, double),
      CSK_NUMBER_FIELD("trials", trials, std::size_t),
      CSK_NUMBER_FIELD("train_packets", train_packets, std::size_t),
      CSK_NUMBER_FIELD("seed", seed, std::uint64_t),
  };
  return f;
}

#undef CSK_NUMBER_FIELD

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields())
    if (name == key) return f;
  throw Error(ErrorCode::Config, "unknown key '" + key + "'");
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  field(trim(key)).set(cfg, value);
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw Error(ErrorCode::Config, "duplicate key '" + key + "'");
    set_config_value(cfg, key, line.substr(eq + 1));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_config(in);
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(cfg) + "\n";
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_config_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Scenario build_scenario(const RunConfig& cfg) {
  Scenario s;
  s.order = cfg.order;
  s.baud_hz = cfg.baud_hz;
  s.efficiency = cfg.efficiency;
  s.layout = cfg.layout;

  ChannelConfig ch = default_channel_config();
  const auto grid = default_grid();
  ch.led_spectra = default_led_spectra(grid, cfg.led_fwhm_nm);
  if (cfg.profiles == "default" || cfg.profiles == "silicon") {
    // Built-in sets are recalibrated for the configured LEDs and full scale;
    // a profile file keeps the gains it stores.
    ch.profiles = cfg.profiles == "default" ? default_profiles() : silicon_profiles();
    calibrate_gains(ch.profiles, ch.led_spectra, cfg.full_scale_v);
  } else {
    ch.profiles = load_profiles(std::filesystem::path(cfg.profiles));
  }
  ch.ambient_spectrum = flat_ambient(grid);
  ch.distance_m = cfg.distance_m;
  ch.ambient_lux = cfg.ambient_lux;
  ch.noise_sigma = cfg.noise_sigma;
  ch.adc_bits = cfg.adc_bits;
  ch.fs_hz = cfg.fs_hz;
  ch.full_scale_v = cfg.full_scale_v;
  ch.seed = cfg.channel_seed;
  ch.miscalibration = cfg.miscalibration;
  for (std::size_t i : cfg.cells) {
    if (i >= ch.profiles.size()) throw Error(ErrorCode::Config, "cell index " + std::to_string(i) + " out of range");
  }
  s.channel = cfg.cells.empty() ? ch : with_cells(ch, cfg.cells);
  s.validate();
  return s;
}

}  // namespace csk
