// csk-modem: command-line front end for the CSK modem and simulator.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "csk/channel.hpp"
#include "csk/colorspace.hpp"
#include "csk/config.hpp"
#include "csk/dataset.hpp"
#include "csk/error.hpp"
#include "csk/harness.hpp"
#include "csk/neural.hpp"
#include "csk/phy_tx.hpp"
#include "csk/report.hpp"

namespace fs = std::filesystem;
using namespace csk;

namespace {

constexpr std::size_t kCiTrials = 10;

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  bool ci = false;
};

RunConfig load_run_config(const Globals& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  // CI profile: fewer trials per point; explicit overrides still win.
  if (g.ci) cfg.trials = kCiTrials;
  for (const std::string& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Config, "--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed_set) cfg.seed = g.seed;
  return cfg;
}

// Frame layout keys only; anything else in the file is a configuration error.
void apply_layout_file(RunConfig& cfg, const fs::path& path) {
  static const std::set<std::string> keys{"preamble_slots", "anchor_ids", "anchor_order", "slots_per_anchor",
                                          "etb_state_slots"};
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    line = line.substr(0, line.find('#'));
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) throw Error(ErrorCode::Config, "layout line without '=': " + line);
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : v.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (!keys.contains(key)) throw Error(ErrorCode::Config, "not a layout key: " + key);
    set_config_value(cfg, key, trim(line.substr(eq + 1)));
  }
}

BitVector parse_payload(const std::string& spec) {
  if (spec == "hello") return hello_bits();
  if (spec.rfind("hex:", 0) == 0) return bits_from_hex(spec.substr(4));
  if (spec.rfind("bits:", 0) == 0) return bits_from_string(spec.substr(5));
  if (spec.rfind("text:", 0) == 0) return bits_from_bytes(spec.substr(5));
  throw Error(ErrorCode::Config, "payload must be hello, hex:..., bits:... or text:...");
}

// Writes to --out when given, otherwise stdout.
void emit(const Globals& g, const std::string& default_name, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  fs::path path(g.out);
  if (fs::is_directory(path)) path /= default_name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string());
  out << text;
  std::cerr << "wrote " << path.string() << '\n';
}

fs::path out_dir(const Globals& g) {
  if (g.out.empty()) throw Error(ErrorCode::Config, "--out DIR is required");
  fs::create_directories(g.out);
  return g.out;
}

std::vector<DecoderId> parse_decoders(const std::vector<std::string>& names) {
  std::vector<DecoderId> out;
  for (const auto& n : names) out.push_back(decoder_from_string(n));
  return out;
}

ExperimentOptions experiment_options(const RunConfig& cfg, const std::vector<std::string>& decoders, bool timed) {
  ExperimentOptions o;
  o.decoders = parse_decoders(decoders);
  o.trials = cfg.trials;
  o.seed = cfg.seed;
  o.train_packets = cfg.train_packets;
  o.train = cfg.train;
  o.timed = timed;
  return o;
}

void write_results(const Globals& g, const std::vector<TrialResult>& results, const std::string& title,
                   const std::string& x_label) {
  const fs::path dir = out_dir(g);
  write_results_csv(dir / "results.csv", results);
  const auto points = aggregate(results);
  std::ofstream svg(dir / "ber.svg", std::ios::binary);
  svg << render_svg(points, title, x_label);
  std::ofstream summary(dir / "summary.csv", std::ios::binary);
  write_summary_csv(summary, points);
  write_summary_csv(std::cout, points);
  std::cerr << "wrote " << (dir / "results.csv").string() << ", summary.csv, ber.svg\n";
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, "bad grid value '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Color-shift-keying modem, channel simulator and decoder harness"};
  // Global flags may also follow the subcommand.
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Key-value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Override one configuration key (key=value), repeatable");
  app.add_option_function<std::uint64_t>(
      "--seed",
      [&](const std::uint64_t& s) {
        g.seed = s;
        g.seed_set = true;
      },
      "Base seed");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_flag("--ci", g.ci, "CI profile: 10 trials per point instead of 100");

  // constellation
  int c_order = 4;
  auto* cmd_const = app.add_subcommand("constellation", "Print constellation points and drive powers as CSV");
  cmd_const->add_option("--order", c_order, "4, 8 or 16")->check(CLI::IsMember({4, 8, 16}));

  // tx
  std::string tx_payload = "hello";
  auto* cmd_tx = app.add_subcommand("tx", "Frame a payload and print the per-slot drive waveform");
  cmd_tx->add_option("--payload", tx_payload, "hello | hex:.. | bits:.. | text:..");
  int tx_order = 0;
  double tx_baud = 0.0;
  std::string tx_hex, tx_layout;
  cmd_tx->add_option("--order", tx_order, "4, 8 or 16 (default: from the configuration)")
      ->check(CLI::IsMember({4, 8, 16}));
  cmd_tx->add_option("--baud", tx_baud, "Symbol rate in Hz (default: from the configuration)");
  cmd_tx->add_option("--payload-hex", tx_hex, "Payload as hex digits; overrides --payload");
  cmd_tx->add_option("--layout", tx_layout, "Frame layout file (key = value)")->check(CLI::ExistingFile);

  // channel
  std::size_t ch_packets = 10;
  std::string ch_payload = "hello";
  auto* cmd_channel = app.add_subcommand("channel", "Simulate packets and store them as a dataset directory");
  cmd_channel->add_option("--packets", ch_packets, "Packet count");
  cmd_channel->add_option("--payload", ch_payload, "hello | random")->check(CLI::IsMember({"hello", "random"}));
  std::string ch_profiles_out;
  cmd_channel->add_option("--save-profiles", ch_profiles_out, "Also write the cell profiles to this file");

  // rx
  std::string rx_dataset, rx_decoder = "ls", rx_model;
  auto* cmd_rx = app.add_subcommand("rx", "Decode a stored dataset and report BER per packet");
  cmd_rx->add_option("--dataset", rx_dataset, "Dataset directory")->required();
  cmd_rx->add_option("--decoder", rx_decoder, "ls | ml_raw | ml_anchor");
  cmd_rx->add_option("--model", rx_model, "Model file for neural decoders");

  // train
  std::string tr_mode = "anchor";
  std::vector<std::string> tr_datasets;
  auto* cmd_train = app.add_subcommand("train", "Train a neural decoder on stored datasets");
  cmd_train->add_option("--mode", tr_mode, "raw | anchor")->check(CLI::IsMember({"raw", "anchor"}));
  cmd_train->add_option("--dataset", tr_datasets, "Dataset directory, repeatable")->required();

  // kfold
  std::string kf_dataset, kf_decoder = "ls";
  std::size_t kf_k = 5;
  auto* cmd_kfold = app.add_subcommand("kfold", "k-fold cross-validated BER on a stored dataset");
  cmd_kfold->add_option("--dataset", kf_dataset, "Dataset directory")->required();
  cmd_kfold->add_option("--decoder", kf_decoder, "ls | ml_raw | ml_anchor");
  cmd_kfold->add_option("--k", kf_k, "Fold count");

  // trial
  std::vector<std::string> trial_decoders{"ls"};
  bool timed = false;
  auto* cmd_trial = app.add_subcommand("trial", "Run repeated single-packet trials at the configured point");
  cmd_trial->add_option("--decoders", trial_decoders, "Decoders to run")->delimiter(',');
  cmd_trial->add_flag("--timed", timed, "Record wall time per trial (results are then not reproducible)");

  // sweep
  std::string sw_variable = "distance", sw_values;
  std::vector<std::string> sw_decoders{"ls"};
  auto* cmd_sweep = app.add_subcommand("sweep", "Sweep one variable and write results, summary and chart");
  cmd_sweep->add_option("--variable", sw_variable,
                        "baud | lux | distance | n_cells | n_anchors | anchor_strategy | order");
  cmd_sweep->add_option("--values", sw_values, "Comma-separated values (default: the standard grid)");
  cmd_sweep->add_option("--decoders", sw_decoders, "Decoders to run")->delimiter(',');
  cmd_sweep->add_flag("--timed", timed, "Record wall time per trial");

  // loo
  std::string loo_variable = "distance", loo_values;
  double loo_hold = 0.45;
  std::vector<std::string> loo_decoders{"ls", "ml_raw", "ml_anchor"};
  auto* cmd_loo = app.add_subcommand("loo", "Leave-one-out evaluation over distance or lux");
  cmd_loo->add_option("--variable", loo_variable, "distance | lux");
  cmd_loo->add_option("--values", loo_values, "Grid (default: the standard grid)");
  cmd_loo->add_option("--hold", loo_hold, "Held-out grid value")->required();
  cmd_loo->add_option("--decoders", loo_decoders, "Decoders to run")->delimiter(',');

  // report
  std::string rep_in, rep_title = "BER", rep_xlabel;
  auto* cmd_report = app.add_subcommand("report", "Aggregate a results CSV into summary.csv and ber.svg");
  cmd_report->add_option("--in", rep_in, "Results CSV")->required()->check(CLI::ExistingFile);
  cmd_report->add_option("--title", rep_title, "Chart title");
  cmd_report->add_option("--x-label", rep_xlabel, "Chart x-axis label");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load_run_config(g);

    if (*cmd_const) {
      const Constellation c = make_constellation(c_order, default_vertices());
      std::ostringstream o;
      o << "index,x,y,p_r,p_g,p_b,bits\n";
      for (std::size_t i = 0; i < c.size(); ++i) {
        std::string bits;
        for (int b = c.bits_per_symbol - 1; b >= 0; --b) bits += ((c.bit_map[i] >> b) & 1U) ? '1' : '0';
        o << i << ',' << format_double(c.points[i].x) << ',' << format_double(c.points[i].y) << ','
          << format_double(c.powers[i][0]) << ',' << format_double(c.powers[i][1]) << ','
          << format_double(c.powers[i][2]) << ',' << bits << '\n';
      }
      emit(g, "constellation_" + std::to_string(c_order) + ".csv", o.str());
    } else if (*cmd_tx) {
      RunConfig tx_cfg = cfg;
      if (!tx_layout.empty()) apply_layout_file(tx_cfg, tx_layout);
      if (tx_order != 0) tx_cfg.order = tx_order;
      if (tx_baud != 0.0) tx_cfg.baud_hz = tx_baud;
      const Scenario s = build_scenario(tx_cfg);
      const Constellation c = s.constellation();
      const BitVector payload = tx_hex.empty() ? parse_payload(tx_payload) : bits_from_hex(tx_hex);
      const SymbolStream stream = bits_to_symbols(payload, c);
      const Packet pkt = frame_packet(stream.symbols, s.layout, c);
      const PowerWaveform w = packet_to_waveform(pkt, s.baud_hz, s.efficiency);
      std::ostringstream o;
      o << "slot,kind,symbol,p_r,p_g,p_b\n";
      for (std::size_t i = 0; i < pkt.slots.size(); ++i) {
        o << i << ',' << to_string(pkt.slots[i].kind) << ',' << pkt.slots[i].symbol << ','
          << format_double(w.duty[i][0]) << ',' << format_double(w.duty[i][1]) << ','
          << format_double(w.duty[i][2]) << '\n';
      }
      emit(g, "waveform.csv", o.str());
    } else if (*cmd_channel) {
      const Scenario s = build_scenario(cfg);
      const auto kind = ch_payload == "hello" ? PayloadKind::Hello : PayloadKind::Random;
      const auto packets = generate_packets(s, ch_packets, cfg.seed, kind);
      save_dataset(out_dir(g), cfg, packets);
      if (!ch_profiles_out.empty()) save_profiles(fs::path(ch_profiles_out), s.channel.profiles);
      std::size_t saturated = 0;
      for (const auto& p : packets) saturated += p.trace.saturated ? 1 : 0;
      std::cerr << "wrote " << packets.size() << " packets to " << g.out << " (config " << config_hash(cfg) << ")\n";
      if (saturated > 0) std::cerr << "warning: " << saturated << " packets saturated the ADC\n";
    } else if (*cmd_rx) {
      const StoredDataset ds = load_dataset(rx_dataset);
      const Scenario s = build_scenario(ds.config);
      const DecoderId d = decoder_from_string(rx_decoder);
      TrainedDecoders models;
      if (d != DecoderId::Ls) {
        if (rx_model.empty()) throw Error(ErrorCode::Config, "--model is required for neural decoders");
        (d == DecoderId::MlRaw ? models.raw : models.anchor) = nn::load_model(fs::path(rx_model));
      }
      std::ostringstream o;
      o << "packet,sync_ok,bit_errors,total_bits,ber,error\n";
      std::size_t errors = 0, total = 0;
      for (const auto& p : ds.packets) {
        const PacketOutcome out = evaluate_packet(p.trace, s, p.bits, d, models);
        errors += out.bit_errors;
        total += out.total_bits;
        o << p.id << ',' << (out.sync_ok ? 1 : 0) << ',' << out.bit_errors << ',' << out.total_bits << ','
          << format_double(out.ber()) << ',' << out.error << '\n';
      }
      emit(g, "rx.csv", o.str());
      std::cerr << "overall BER " << format_double(total ? static_cast<double>(errors) / total : 0.0) << '\n';
    } else if (*cmd_train) {
      if (g.out.empty()) throw Error(ErrorCode::Config, "--out model file is required");
      const FeatureMode mode = feature_mode_from_string(tr_mode);
      nn::Dataset data;
      int classes = 0;
      for (const auto& dir : tr_datasets) {
        const StoredDataset ds = load_dataset(dir);
        const Scenario s = build_scenario(ds.config);
        if (classes != 0 && classes != s.order) throw Error(ErrorCode::Config, "datasets differ in CSK order");
        classes = s.order;
        const nn::Dataset part = training_set(s, ds.packets, mode);
        data.insert(data.end(), part.begin(), part.end());
      }
      nn::TrainConfig tc = cfg.train;
      if (g.seed_set) tc.seed = g.seed;
      const nn::TrainResult res = nn::train(data, classes, tc);
      for (const auto& e : res.log.epochs) {
        std::cerr << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss << " acc "
                  << e.val_accuracy << " lr " << e.lr << '\n';
      }
      if (res.log.no_improvement) std::cerr << "warning: validation loss never improved\n";
      nn::save_model(fs::path(g.out), res.model);
      std::cerr << "wrote " << g.out << " (" << res.model.parameter_count() << " parameters, best epoch "
                << res.log.best_epoch << ")\n";
    } else if (*cmd_kfold) {
      const StoredDataset ds = load_dataset(kf_dataset);
      const Scenario s = build_scenario(ds.config);
      const KFoldResult r =
          kfold_eval(s, ds.packets, kf_k, decoder_from_string(kf_decoder), ds.config.train, cfg.seed);
      for (std::size_t f = 0; f < r.fold_ber.size(); ++f) {
        std::cout << "fold " << f << " packets " << r.folds[f].size() << " ber " << format_double(r.fold_ber[f])
                  << '\n';
      }
      std::cout << "mean " << format_double(r.stats.mean) << " std " << format_double(r.stats.stddev) << '\n';
    } else if (*cmd_trial) {
      const Scenario s = build_scenario(cfg);
      SweepSpec spec;
      spec.variable = GridVariable::Distance;
      spec.values = {s.channel.distance_m};
      const auto results = sweep(s, spec, experiment_options(cfg, trial_decoders, timed));
      write_results(g, results, "BER at the configured point", "distance (m)");
    } else if (*cmd_sweep) {
      const Scenario s = build_scenario(cfg);
      SweepSpec spec;
      spec.variable = grid_variable_from_string(sw_variable);
      spec.values = sw_values.empty() ? default_grid(spec.variable) : parse_values(sw_values);
      const auto results = sweep(s, spec, experiment_options(cfg, sw_decoders, timed));
      write_results(g, results, "BER vs " + sw_variable, sw_variable);
    } else if (*cmd_loo) {
      const Scenario s = build_scenario(cfg);
      const GridVariable v = grid_variable_from_string(loo_variable);
      const auto grid = loo_values.empty() ? default_grid(v) : parse_values(loo_values);
      const auto results = leave_one_out(s, v, grid, loo_hold, experiment_options(cfg, loo_decoders, false));
      write_results(g, results, "Leave-one-out BER", loo_variable);
    } else if (*cmd_report) {
      const auto results = read_results_csv(fs::path(rep_in));
      const auto points = aggregate(results);
      const fs::path dir = out_dir(g);
      std::ofstream svg(dir / "ber.svg", std::ios::binary);
      svg << render_svg(points, rep_title, rep_xlabel);
      std::ofstream summary(dir / "summary.csv", std::ios::binary);
      write_summary_csv(summary, points);
      write_summary_csv(std::cout, points);
    }
  } catch (const Error& e) {
    std::cerr << "csk-modem: " << e.what() << '\n';
    return e.code() == ErrorCode::Config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "csk-modem: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
