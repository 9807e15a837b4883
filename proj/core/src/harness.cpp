#include "csk/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "csk/error.hpp"

namespace csk {

namespace {

struct DecoderName {
  DecoderId id;
  std::string_view name;
};
constexpr DecoderName kDecoderNames[] = {
    {DecoderId::Ls, "ls"}, {DecoderId::MlRaw, "ml_raw"}, {DecoderId::MlAnchor, "ml_anchor"}};

struct VariableName {
  GridVariable v;
  std::string_view name;
};
constexpr VariableName kVariableNames[] = {
    {GridVariable::Baud, "baud"},         {GridVariable::Lux, "lux"},
    {GridVariable::Distance, "distance"}, {GridVariable::NCells, "n_cells"},
    {GridVariable::NAnchors, "n_anchors"}, {GridVariable::AnchorStrategy, "anchor_strategy"},
    {GridVariable::Order, "order"}};

}  // namespace

std::string_view to_string(DecoderId d) {
  for (const auto& n : kDecoderNames)
    if (n.id == d) return n.name;
  return "?";
}

DecoderId decoder_from_string(std::string_view s) {
  for (const auto& n : kDecoderNames)
    if (n.name == s) return n.id;
  throw Error(ErrorCode::Config, "unknown decoder '" + std::string(s) + "'");
}

std::string_view to_string(FeatureMode m) { return m == FeatureMode::Raw ? "raw" : "anchor"; }

FeatureMode feature_mode_from_string(std::string_view s) {
  if (s == "raw") return FeatureMode::Raw;
  if (s == "anchor") return FeatureMode::Anchor;
  throw Error(ErrorCode::Config, "unknown feature mode '" + std::string(s) + "'");
}

std::string_view to_string(GridVariable v) {
  for (const auto& n : kVariableNames)
    if (n.v == v) return n.name;
  return "?";
}

GridVariable grid_variable_from_string(std::string_view s) {
  for (const auto& n : kVariableNames)
    if (n.name == s) return n.v;
  throw Error(ErrorCode::Config, "unknown grid variable '" + std::string(s) + "'");
}

Constellation Scenario::constellation() const { return make_constellation(order, default_vertices()); }

Constellation Scenario::anchor_constellation() const {
  return make_constellation(layout.anchor_order, default_vertices());
}

int Scenario::samples_per_slot() const { return csk::samples_per_slot(channel.fs_hz, baud_hz); }

void Scenario::validate() const {
  if (order != 4 && order != 8 && order != 16) throw Error(ErrorCode::Config, "order must be 4, 8 or 16");
  if (!(baud_hz > 0.0)) throw Error(ErrorCode::Config, "baud must be positive");
  layout.validate();
  if (layout.anchor_order != 4 && layout.anchor_order != 8 && layout.anchor_order != 16) {
    throw Error(ErrorCode::Config, "anchor_order must be 4, 8 or 16");
  }
  efficiency.validate();
  channel.validate();
  samples_per_slot();
}

Scenario reference_scenario() { return Scenario{}; }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(a ^ splitmix(b));
}

BitVector random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BitVector bits(n);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng() >> 63);
  return bits;
}

SimulatedPacket simulate_packet(const Scenario& s, const BitVector& bits, std::uint64_t seed) {
  s.validate();
  const Constellation c = s.constellation();
  SimulatedPacket out;
  out.bits = bits;
  out.stream = bits_to_symbols(bits, c);
  const Packet pkt = frame_packet(out.stream.symbols, s.layout, c);
  const PowerWaveform w = packet_to_waveform(pkt, s.baud_hz, s.efficiency);

  std::mt19937_64 rng(mix_seed(s.channel.seed, seed));
  const auto spb = static_cast<std::size_t>(s.samples_per_slot());
  std::uniform_int_distribution<std::size_t> lead(spb, 5 * spb - 1);
  out.start = lead(rng);
  ChannelConfig cfg = s.channel;
  cfg.seed = rng();
  out.trace = propagate(w, cfg, out.start, 2 * spb);
  return out;
}

RxFrame receive(const AdcTrace& trace, const Scenario& s, std::size_t payload_symbols) {
  Eigen::MatrixXd gk = coupling_matrix(s.channel.profiles, s.channel.led_spectra);
  for (Eigen::Index i = 0; i < gk.rows(); ++i) gk.row(i) *= s.channel.profiles[static_cast<std::size_t>(i)].gain;

  RxFrame f;
  f.start = detect_preamble(trace, s.baud_hz, s.layout, contrast_hint(gk));
  f.windows = segment(trace, f.start, s.layout.total_slots(payload_symbols), trace.fs_hz, s.baud_hz);
  f.anchors = extract_anchors(f.windows, s.layout, s.anchor_constellation(),
                              kAnchorEpsilonFraction * trace.full_scale_v);
  f.payload_offset = s.layout.payload_offset();
  f.payload_symbols = payload_symbols;
  return f;
}

Eigen::MatrixXd raw_sequence(const SymbolWindow& w, double full_scale_v) {
  return w.samples.transpose() / full_scale_v;
}

Eigen::MatrixXd anchor_sequence(const SymbolWindow& w, const AnchorSet& anchors) {
  const Eigen::Index t_len = w.samples.cols();
  Eigen::MatrixXd out(t_len, w.samples.rows() * anchors.vectors.rows());
  for (Eigen::Index t = 0; t < t_len; ++t) {
    out.row(t) = differential_features(w.samples.col(t), anchors).transpose();
  }
  return out;
}

std::vector<std::size_t> decode_ls(const RxFrame& f, const Scenario& s) {
  const ChannelMatrix h = calibrate_h(f.anchors);
  const Constellation c = s.constellation();
  std::vector<std::size_t> out;
  out.reserve(f.payload_symbols);
  for (const SymbolWindow& w : f.payload()) out.push_back(ls_decode(w, h, c));
  return out;
}

namespace {

Eigen::MatrixXd sequence_for(const SymbolWindow& w, const RxFrame& f, const Scenario& s, FeatureMode mode) {
  return mode == FeatureMode::Raw ? raw_sequence(w, s.channel.full_scale_v) : anchor_sequence(w, f.anchors);
}

}  // namespace

std::vector<std::size_t> decode_ml(const RxFrame& f, const Scenario& s, const nn::BiLstmModel& model,
                                   FeatureMode mode) {
  nn::Dataset seqs;
  seqs.reserve(f.payload_symbols);
  for (const SymbolWindow& w : f.payload()) seqs.push_back({sequence_for(w, f, s, mode), 0});
  if (seqs.empty()) return {};
  const nn::Prediction p = nn::predict(model, seqs);
  return {p.labels.begin(), p.labels.end()};
}

void append_sequences(nn::Dataset& out, const RxFrame& f, const Scenario& s, const std::vector<std::size_t>& symbols,
                      FeatureMode mode) {
  const auto payload = f.payload();
  if (symbols.size() != payload.size()) throw Error(ErrorCode::LengthMismatch, "label count differs from payload");
  for (std::size_t k = 0; k < payload.size(); ++k) {
    out.push_back({sequence_for(payload[k], f, s, mode), static_cast<int>(symbols[k])});
  }
}

nn::Dataset build_training_set(std::span<const Scenario> conditions, FeatureMode mode,
                               std::size_t packets_per_condition, std::uint64_t seed) {
  nn::Dataset data;
  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    const Scenario& s = conditions[ci];
    for (std::size_t p = 0; p < packets_per_condition; ++p) {
      const std::uint64_t ps = mix_seed(mix_seed(seed, ci), p);
      const SimulatedPacket pkt = simulate_packet(s, random_bits(kTrainingPayloadBits, ps), ps);
      try {
        const RxFrame f = receive(pkt.trace, s, pkt.stream.symbols.size());
        append_sequences(data, f, s, pkt.stream.symbols, mode);
      } catch (const Error&) {
        // Unusable packet: nothing to learn from.
      }
    }
  }
  return data;
}

nn::BiLstmModel train_decoder(std::span<const Scenario> conditions, FeatureMode mode,
                              std::size_t packets_per_condition, const nn::TrainConfig& cfg, std::uint64_t seed) {
  if (conditions.empty()) throw Error(ErrorCode::InvalidArgument, "no training conditions");
  const nn::Dataset data = build_training_set(conditions, mode, packets_per_condition, seed);
  if (data.size() < 2) throw Error(ErrorCode::InvalidArgument, "training set too small");
  return nn::train(data, conditions.front().order, cfg).model;
}

double ber(const BitVector& tx, const BitVector& rx) {
  if (tx.size() != rx.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(tx.size()) + " transmitted bits vs " + std::to_string(rx.size()) + " received");
  }
  if (tx.empty()) return 0.0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < tx.size(); ++i) diff += (tx[i] != 0) != (rx[i] != 0) ? 1 : 0;
  return static_cast<double>(diff) / static_cast<double>(tx.size());
}

PacketOutcome evaluate_packet(const AdcTrace& trace, const Scenario& s, const BitVector& tx_bits, DecoderId decoder,
                              const TrainedDecoders& models) {
  const Constellation c = s.constellation();
  const SymbolStream stream = bits_to_symbols(tx_bits, c);
  PacketOutcome out;
  out.total_bits = tx_bits.size();
  out.bit_errors = tx_bits.size();

  std::optional<RxFrame> frame;
  try {
    frame = receive(trace, s, stream.symbols.size());
    out.sync_ok = true;
  } catch (const Error& e) {
    out.sync_ok = e.code() != ErrorCode::SyncNotFound && e.code() != ErrorCode::OutOfBounds;
    out.error = e.what();
    return out;
  }

  std::vector<std::size_t> symbols;
  try {
    switch (decoder) {
      case DecoderId::Ls:
        symbols = decode_ls(*frame, s);
        break;
      case DecoderId::MlRaw:
        if (!models.raw) throw Error(ErrorCode::InvalidArgument, "ml_raw decoder has no model");
        symbols = decode_ml(*frame, s, *models.raw, FeatureMode::Raw);
        break;
      case DecoderId::MlAnchor:
        if (!models.anchor) throw Error(ErrorCode::InvalidArgument, "ml_anchor decoder has no model");
        symbols = decode_ml(*frame, s, *models.anchor, FeatureMode::Anchor);
        break;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::ShapeMismatch) throw;
    out.error = e.what();
    return out;
  }
  const BitVector rx = symbols_to_bits(symbols, c, stream.pad_count);
  out.bit_errors = static_cast<std::size_t>(std::llround(ber(tx_bits, rx) * static_cast<double>(tx_bits.size())));
  return out;
}

TrialResult run_trial(const Scenario& s, DecoderId decoder, std::uint64_t seed, const TrainedDecoders& models,
                      const BitVector& payload, std::string trial_id, bool timed) {
  const auto t0 = std::chrono::steady_clock::now();
  const SimulatedPacket pkt = simulate_packet(s, payload, seed);
  const PacketOutcome o = evaluate_packet(pkt.trace, s, payload, decoder, models);
  TrialResult r;
  r.trial_id = std::move(trial_id);
  r.decoder = decoder;
  r.order = s.order;
  r.baud_hz = s.baud_hz;
  r.distance_m = s.channel.distance_m;
  r.lux = s.channel.ambient_lux;
  r.n_cells = s.channel.n_cells();
  r.n_anchors = s.layout.anchor_ids.size();
  r.seed = seed;
  r.ber = o.ber();
  r.sync_ok = o.sync_ok;
  r.bit_errors = o.bit_errors;
  r.total_bits = o.total_bits;
  r.error = o.error;
  if (timed) {
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  return r;
}

SummaryStats summarize(std::span<const double> values) {
  SummaryStats st;
  st.count = values.size();
  if (values.empty()) return st;
  st.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean) * (v - st.mean);
    st.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return st;
}

std::vector<PacketRecord> generate_packets(const Scenario& s, std::size_t packets, std::uint64_t base_seed,
                                           PayloadKind payload) {
  std::vector<PacketRecord> out;
  out.reserve(packets);
  for (std::size_t i = 0; i < packets; ++i) {
    PacketRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "pkt-%04zu", i);
    r.id = id;
    r.seed = base_seed + i;
    r.bits = payload == PayloadKind::Hello ? hello_bits() : random_bits(kTrainingPayloadBits, mix_seed(r.seed, 1));
    r.trace = simulate_packet(s, r.bits, r.seed).trace;
    out.push_back(std::move(r));
  }
  return out;
}

nn::Dataset training_set(const Scenario& s, std::span<const PacketRecord> records, FeatureMode mode) {
  const Constellation c = s.constellation();
  nn::Dataset data;
  for (const PacketRecord& r : records) {
    const SymbolStream stream = bits_to_symbols(r.bits, c);
    try {
      const RxFrame f = receive(r.trace, s, stream.symbols.size());
      append_sequences(data, f, s, stream.symbols, mode);
    } catch (const Error&) {
    }
  }
  return data;
}

std::vector<std::vector<std::size_t>> kfold_assignment(const std::vector<std::string>& ids, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2 || ids.size() < k) throw Error(ErrorCode::InvalidArgument, "need k >= 2 and at least k packets");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * ids.size() / k;
    const std::size_t hi = (f + 1) * ids.size() / k;
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return folds;
}

KFoldResult kfold_eval(const Scenario& s, std::span<const PacketRecord> records, std::size_t k, DecoderId decoder,
                       const nn::TrainConfig& train_cfg, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.id);
  KFoldResult res;
  res.folds = kfold_assignment(ids, k, seed);

  for (std::size_t f = 0; f < k; ++f) {
    TrainedDecoders models;
    if (decoder != DecoderId::Ls) {
      std::vector<PacketRecord> train_recs;
      for (std::size_t g = 0; g < k; ++g) {
        if (g == f) continue;
        for (std::size_t i : res.folds[g]) train_recs.push_back(records[i]);
      }
      const FeatureMode mode = decoder == DecoderId::MlRaw ? FeatureMode::Raw : FeatureMode::Anchor;
      const nn::Dataset data = training_set(s, train_recs, mode);
      if (data.size() < 2) throw Error(ErrorCode::InvalidArgument, "fold training set too small");
      nn::TrainConfig cfg = train_cfg;
      cfg.seed = mix_seed(train_cfg.seed, f);
      auto model = nn::train(data, s.order, cfg).model;
      (mode == FeatureMode::Raw ? models.raw : models.anchor) = std::move(model);
    }
    std::size_t errors = 0;
    std::size_t total = 0;
    for (std::size_t i : res.folds[f]) {
      const PacketOutcome o = evaluate_packet(records[i].trace, s, records[i].bits, decoder, models);
      errors += o.bit_errors;
      total += o.total_bits;
    }
    res.fold_ber.push_back(total == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(total));
  }
  res.stats = summarize(res.fold_ber);
  return res;
}

std::vector<double> default_grid(GridVariable v) {
  switch (v) {
    case GridVariable::Baud:
      return {50, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
    case GridVariable::Lux:
      return {0, 147, 618, 1154};
    case GridVariable::Distance:
      return {0.25, 0.30, 0.35, 0.40, 0.45, 0.50};
    case GridVariable::NCells:
      return {1, 2, 3, 4, 5, 6, 7};
    case GridVariable::NAnchors:
      return {1, 2, 3, 4, 5, 6, 7, 8};
    case GridVariable::AnchorStrategy:
      return {1, 2, 3};
    case GridVariable::Order:
      return {4, 8, 16};
  }
  return {};
}

namespace {

std::size_t as_count(double value, const char* what) {
  if (!(value >= 1.0) || value != std::floor(value)) {
    throw Error(ErrorCode::Config, std::string(what) + " must be a positive integer");
  }
  return static_cast<std::size_t>(value);
}

}  // namespace

void apply_grid_value(Scenario& s, GridVariable v, double value) {
  switch (v) {
    case GridVariable::Baud:
      s.baud_hz = value;
      break;
    case GridVariable::Lux:
      s.channel.ambient_lux = value;
      break;
    case GridVariable::Distance:
      s.channel.distance_m = value;
      break;
    case GridVariable::NCells: {
      const std::size_t n = as_count(value, "n_cells");
      if (n > s.channel.n_cells()) throw Error(ErrorCode::Config, "n_cells exceeds the configured array");
      std::vector<std::size_t> keep(n);
      std::iota(keep.begin(), keep.end(), std::size_t{0});
      s.channel = with_cells(s.channel, keep);
      break;
    }
    case GridVariable::NAnchors: {
      const std::size_t n = as_count(value, "n_anchors");
      if (n > 8) throw Error(ErrorCode::Config, "at most 8 anchors");
      s.layout.anchor_order = n <= 4 ? 4 : 8;
      s.layout.anchor_ids.resize(n);
      std::iota(s.layout.anchor_ids.begin(), s.layout.anchor_ids.end(), std::size_t{0});
      break;
    }
    case GridVariable::Order:
      s.order = static_cast<int>(as_count(value, "order"));
      break;
    case GridVariable::AnchorStrategy:
      throw Error(ErrorCode::Config, "anchor strategies are evaluated by anchor_strategy_eval");
  }
  s.validate();
}

namespace {

std::string value_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string trial_label(std::string_view group, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%04zu", index);
  return std::string(group) + buf;
}

bool needs(const ExperimentOptions& o, DecoderId d) {
  return std::find(o.decoders.begin(), o.decoders.end(), d) != o.decoders.end();
}

TrainedDecoders train_requested(std::span<const Scenario> conditions, const ExperimentOptions& o,
                                std::uint64_t data_seed) {
  TrainedDecoders m;
  if (needs(o, DecoderId::MlRaw)) {
    m.raw = train_decoder(conditions, FeatureMode::Raw, o.train_packets, o.train, data_seed);
  }
  if (needs(o, DecoderId::MlAnchor)) {
    m.anchor = train_decoder(conditions, FeatureMode::Anchor, o.train_packets, o.train, data_seed);
  }
  return m;
}

void run_trials(std::vector<TrialResult>& out, const Scenario& s, const TrainedDecoders& models,
                const ExperimentOptions& o, std::string_view group) {
  const BitVector payload = hello_bits();
  for (DecoderId d : o.decoders) {
    for (std::size_t t = 0; t < o.trials; ++t) {
      out.push_back(run_trial(s, d, o.seed + t, models, payload, trial_label(group, t), o.timed));
    }
  }
}

// Seed for training data, kept apart from the trial seeds.
constexpr std::uint64_t kTrainStream = 0x747261696eULL;

}  // namespace

std::vector<TrialResult> sweep(const Scenario& base, const SweepSpec& spec, const ExperimentOptions& options) {
  if (spec.values.empty()) throw Error(ErrorCode::Config, "sweep needs at least one value");
  if (spec.variable == GridVariable::AnchorStrategy) {
    AnchorStrategyOptions ao;
    ao.experiment = options;
    std::vector<TrialResult> out;
    for (const StrategyResult& r : anchor_strategy_eval(base, ao)) {
      if (std::find(spec.values.begin(), spec.values.end(), static_cast<double>(r.strategy)) == spec.values.end()) {
        continue;
      }
      out.insert(out.end(), r.trials.begin(), r.trials.end());
    }
    return out;
  }
  std::vector<TrialResult> out;
  for (double v : spec.values) {
    Scenario s = base;
    apply_grid_value(s, spec.variable, v);
    const std::string group = std::string(to_string(spec.variable)) + "=" + value_label(v);
    const TrainedDecoders models =
        train_requested(std::span(&s, 1), options, mix_seed(options.seed, kTrainStream));
    run_trials(out, s, models, options, group);
  }
  return out;
}

std::vector<TrialResult> leave_one_out(const Scenario& base, GridVariable v, const std::vector<double>& grid,
                                       double held, const ExperimentOptions& options) {
  if (v != GridVariable::Distance && v != GridVariable::Lux) {
    throw Error(ErrorCode::Config, "leave-one-out runs over distance or lux");
  }
  if (grid.size() < 2) throw Error(ErrorCode::Config, "leave-one-out needs at least two grid values");
  if (std::find(grid.begin(), grid.end(), held) == grid.end()) {
    throw Error(ErrorCode::Config, "held value " + value_label(held) + " is not in the grid");
  }
  std::vector<Scenario> train_conditions;
  for (double g : grid) {
    if (g == held) continue;
    Scenario s = base;
    apply_grid_value(s, v, g);
    train_conditions.push_back(std::move(s));
  }
  Scenario test = base;
  apply_grid_value(test, v, held);
  const TrainedDecoders models = train_requested(train_conditions, options, mix_seed(options.seed, kTrainStream));
  std::vector<TrialResult> out;
  run_trials(out, test, models, options, "held_" + std::string(to_string(v)) + "=" + value_label(held));
  return out;
}

std::vector<int> anchor_groups(const Constellation& c, int k, std::uint64_t seed) {
  const std::size_t n = c.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) throw Error(ErrorCode::InvalidArgument, "k out of range");
  std::mt19937_64 rng(seed);
  auto d2 = [&](std::size_t i, const ChromaticityPoint& p) {
    const double dx = c.points[i].x - p.x;
    const double dy = c.points[i].y - p.y;
    return dx * dx + dy * dy;
  };

  // k-means++ seeding.
  std::vector<ChromaticityPoint> centers;
  centers.push_back(c.points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  while (centers.size() < static_cast<std::size_t>(k)) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& ctr : centers) best = std::min(best, d2(i, ctr));
      w[i] = best;
    }
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    centers.push_back(c.points[pick(rng)]);
  }

  std::vector<int> label(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      for (int j = 1; j < k; ++j) {
        if (d2(i, centers[static_cast<std::size_t>(j)]) < d2(i, centers[static_cast<std::size_t>(best)])) best = j;
      }
      if (label[i] != best) {
        label[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (int j = 0; j < k; ++j) {
      double sx = 0.0, sy = 0.0;
      int cnt = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != j) continue;
        sx += c.points[i].x;
        sy += c.points[i].y;
        ++cnt;
      }
      if (cnt > 0) centers[static_cast<std::size_t>(j)] = {sx / cnt, sy / cnt};
    }
  }
  return label;
}

std::vector<std::vector<std::size_t>> strategy_selections(const std::vector<int>& groups, AnchorStrategy strategy) {
  const std::size_t n = groups.size();
  std::set<std::vector<std::size_t>> out;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      for (std::size_t c = b + 1; c < n; ++c) {
        std::set<int> distinct{groups[a], groups[b], groups[c]};
        const bool keep = (strategy == AnchorStrategy::SingleGroup && distinct.size() == 1) ||
                          (strategy == AnchorStrategy::TwoGroups && distinct.size() == 2) ||
                          (strategy == AnchorStrategy::EachGroup && distinct.size() == 3);
        if (keep) out.insert({a, b, c});
      }
    }
  }
  return {out.begin(), out.end()};
}

double mean_pairwise_distance(const std::vector<std::size_t>& selection, const Constellation& c) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < selection.size(); ++i) {
    for (std::size_t j = i + 1; j < selection.size(); ++j) {
      sum += distance(c.points.at(selection[i]), c.points.at(selection[j]));
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

std::vector<StrategyResult> anchor_strategy_eval(const Scenario& base, const AnchorStrategyOptions& options) {
  const Constellation c8 = make_constellation(8, default_vertices());
  const std::vector<int> groups = anchor_groups(c8, 3, 0);
  ExperimentOptions exp = options.experiment;
  exp.decoders = {options.decoder};

  std::vector<StrategyResult> out;
  for (AnchorStrategy st : {AnchorStrategy::SingleGroup, AnchorStrategy::TwoGroups, AnchorStrategy::EachGroup}) {
    StrategyResult r;
    r.strategy = st;
    const auto selections = strategy_selections(groups, st);
    r.selection_count = selections.size();
    if (selections.empty()) {
      out.push_back(std::move(r));
      continue;
    }
    double dist = 0.0;
    for (const auto& sel : selections) dist += mean_pairwise_distance(sel, c8);
    r.mean_distance = dist / static_cast<double>(selections.size());

    std::vector<std::size_t> chosen(selections.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    if (options.max_selections > 0 && options.max_selections < selections.size()) {
      chosen.resize(options.max_selections);
      for (std::size_t i = 0; i < options.max_selections; ++i) chosen[i] = i * selections.size() / options.max_selections;
    }

    std::vector<double> bers;
    for (std::size_t idx : chosen) {
      Scenario train_s = base;
      train_s.layout.anchor_order = 8;
      train_s.layout.anchor_ids = selections[idx];
      train_s.validate();
      Scenario test_s = train_s;
      if (options.test_distance_m) test_s.channel.distance_m = *options.test_distance_m;
      const TrainedDecoders models =
          train_requested(std::span(&train_s, 1), exp, mix_seed(mix_seed(exp.seed, kTrainStream), idx));
      const std::string group = "S" + std::to_string(static_cast<int>(st)) + "/" + std::to_string(selections[idx][0]) +
                                "-" + std::to_string(selections[idx][1]) + "-" + std::to_string(selections[idx][2]);
      const std::size_t first = r.trials.size();
      run_trials(r.trials, test_s, models, exp, group);
      for (std::size_t t = first; t < r.trials.size(); ++t) bers.push_back(r.trials[t].ber);
    }
    r.ber = summarize(bers);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace csk
