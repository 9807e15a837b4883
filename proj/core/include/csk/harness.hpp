#pragma once

// Experiment orchestration: packet simulation, the three decoders, trials,
// cross-validation, leave-one-out and parameter sweeps.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csk/channel.hpp"
#include "csk/colorspace.hpp"
#include "csk/neural.hpp"
#include "csk/phy_rx.hpp"
#include "csk/phy_tx.hpp"

namespace csk {

enum class DecoderId { Ls, MlRaw, MlAnchor };

std::string_view to_string(DecoderId d);
DecoderId decoder_from_string(std::string_view s);

enum class FeatureMode { Raw, Anchor };

std::string_view to_string(FeatureMode m);
FeatureMode feature_mode_from_string(std::string_view s);

/// Everything needed to put one packet on the air and take it off again.
struct Scenario {
  int order = 4;
  double baud_hz = 500.0;
  FrameLayout layout;
  EfficiencyTriple efficiency;
  ChannelConfig channel = default_channel_config();

  Constellation constellation() const;
  Constellation anchor_constellation() const;
  int samples_per_slot() const;
  void validate() const;
};

/// 4-CSK, 500 baud, 2 kHz sampling, seven default cells at 25 cm, dark, reference noise.
Scenario reference_scenario();

/// splitmix64 of a combined with b; used to derive independent streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

BitVector random_bits(std::size_t n, std::uint64_t seed);

struct SimulatedPacket {
  BitVector bits;
  SymbolStream stream;
  AdcTrace trace;
  /// Sample index of the first preamble slot.
  std::size_t start = 0;
};

/// Frames `bits`, drives the channel, and embeds the packet after a random
/// run of idle samples (between 1 and 5 slots) followed by two idle slots.
/// Lead length and channel noise both derive from `seed`.
SimulatedPacket simulate_packet(const Scenario& s, const BitVector& bits, std::uint64_t seed);

/// Synchronised and segmented packet. The receiver knows the payload length.
struct RxFrame {
  std::size_t start = 0;
  std::vector<SymbolWindow> windows;
  AnchorSet anchors;
  std::size_t payload_offset = 0;
  std::size_t payload_symbols = 0;

  std::span<const SymbolWindow> payload() const {
    return std::span(windows).subspan(payload_offset, payload_symbols);
  }
};

/// Anchor magnitudes below this fraction of full scale are rejected.
inline constexpr double kAnchorEpsilonFraction = 1e-6;

/// Sync on the cell with the strongest red/blue contrast, segment, extract anchors.
RxFrame receive(const AdcTrace& trace, const Scenario& s, std::size_t payload_symbols);

/// T x n_cells, volts scaled to full scale.
Eigen::MatrixXd raw_sequence(const SymbolWindow& w, double full_scale_v);
/// T x (n_cells * n_anchors): f_abs of every sample against the slot-level anchors.
Eigen::MatrixXd anchor_sequence(const SymbolWindow& w, const AnchorSet& anchors);

std::vector<std::size_t> decode_ls(const RxFrame& f, const Scenario& s);
std::vector<std::size_t> decode_ml(const RxFrame& f, const Scenario& s, const nn::BiLstmModel& model,
                                   FeatureMode mode);

/// Labelled feature sequences for the payload slots of one received packet.
void append_sequences(nn::Dataset& out, const RxFrame& f, const Scenario& s,
                      const std::vector<std::size_t>& symbols, FeatureMode mode);

/// Payload bits per generated training packet.
inline constexpr std::size_t kTrainingPayloadBits = 40;

/// Random-payload packets under each condition, received and featurised.
/// Packets that fail to synchronise are skipped.
nn::Dataset build_training_set(std::span<const Scenario> conditions, FeatureMode mode,
                               std::size_t packets_per_condition, std::uint64_t seed);

nn::BiLstmModel train_decoder(std::span<const Scenario> conditions, FeatureMode mode,
                              std::size_t packets_per_condition, const nn::TrainConfig& cfg,
                              std::uint64_t seed);

struct TrainedDecoders {
  std::optional<nn::BiLstmModel> raw;
  std::optional<nn::BiLstmModel> anchor;
};

/// Hamming distance over length. Throws LengthMismatch.
double ber(const BitVector& tx, const BitVector& rx);

struct PacketOutcome {
  bool sync_ok = false;
  std::size_t bit_errors = 0;
  std::size_t total_bits = 0;
  std::string error;

  double ber() const { return total_bits == 0 ? 0.0 : static_cast<double>(bit_errors) / total_bits; }
};

/// Receives and decodes one trace. Library errors are recorded in the
/// outcome and charged as every payload bit wrong.
PacketOutcome evaluate_packet(const AdcTrace& trace, const Scenario& s, const BitVector& tx_bits, DecoderId decoder,
                              const TrainedDecoders& models);

struct TrialResult {
  std::string trial_id;
  DecoderId decoder = DecoderId::Ls;
  int order = 4;
  double baud_hz = 0.0;
  double distance_m = 0.0;
  double lux = 0.0;
  std::size_t n_cells = 0;
  std::size_t n_anchors = 0;
  std::uint64_t seed = 0;
  double ber = 0.0;
  bool sync_ok = false;
  double wall_ms = 0.0;
  std::size_t bit_errors = 0;
  std::size_t total_bits = 0;
  std::string error;
};

/// One packet of `payload` through the scenario. wall_ms stays 0 unless
/// `timed`, so result files are reproducible byte for byte.
TrialResult run_trial(const Scenario& s, DecoderId decoder, std::uint64_t seed, const TrainedDecoders& models,
                      const BitVector& payload, std::string trial_id, bool timed = false);

struct SummaryStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for fewer than two values
  std::size_t count = 0;
};

SummaryStats summarize(std::span<const double> values);

struct PacketRecord {
  std::string id;
  std::uint64_t seed = 0;
  BitVector bits;
  AdcTrace trace;
};

enum class PayloadKind { Hello, Random };

/// `packets` records named "pkt-0000", ... with seeds base_seed + i.
std::vector<PacketRecord> generate_packets(const Scenario& s, std::size_t packets, std::uint64_t base_seed,
                                           PayloadKind payload);

/// Sequences from recorded packets whose sync succeeds.
nn::Dataset training_set(const Scenario& s, std::span<const PacketRecord> records, FeatureMode mode);

/// Fold membership as indices into `ids`: ids are sorted first, then shuffled
/// under `seed`, then cut into k nearly equal contiguous folds.
std::vector<std::vector<std::size_t>> kfold_assignment(const std::vector<std::string>& ids, std::size_t k,
                                                       std::uint64_t seed);

struct KFoldResult {
  std::vector<std::vector<std::size_t>> folds;
  std::vector<double> fold_ber;
  SummaryStats stats;
};

KFoldResult kfold_eval(const Scenario& s, std::span<const PacketRecord> records, std::size_t k, DecoderId decoder,
                       const nn::TrainConfig& train_cfg, std::uint64_t seed);

enum class GridVariable { Baud, Lux, Distance, NCells, NAnchors, AnchorStrategy, Order };

std::string_view to_string(GridVariable v);
GridVariable grid_variable_from_string(std::string_view s);

/// Default grids: baud 50..1000, lux {0,147,618,1154}, distance 0.25..0.50 m, and so on.
std::vector<double> default_grid(GridVariable v);

/// NCells keeps the first n cells; NAnchors takes the first n 4-CSK points,
/// or the first n 8-CSK points when n > 4.
void apply_grid_value(Scenario& s, GridVariable v, double value);

struct ExperimentOptions {
  std::vector<DecoderId> decoders{DecoderId::Ls, DecoderId::MlRaw, DecoderId::MlAnchor};
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t train_packets = 200;
  nn::TrainConfig train;
  bool timed = false;
};

struct SweepSpec {
  GridVariable variable = GridVariable::Distance;
  std::vector<double> values;
};

/// Trial seeds are options.seed + trial index; trial ids are
/// "<variable>=<value>#<index>". Neural decoders are trained per grid value.
std::vector<TrialResult> sweep(const Scenario& base, const SweepSpec& spec, const ExperimentOptions& options);

/// Train on every grid value but `held`, test on `held`. Distance and lux only.
std::vector<TrialResult> leave_one_out(const Scenario& base, GridVariable v, const std::vector<double>& grid,
                                       double held, const ExperimentOptions& options);

/// Cluster label per point of `c` from seeded k-means++ on (x, y).
std::vector<int> anchor_groups(const Constellation& c, int k = 3, std::uint64_t seed = 0);

enum class AnchorStrategy { SingleGroup = 1, TwoGroups = 2, EachGroup = 3 };

/// Every distinct 3-point selection (sorted indices, lexicographic order).
std::vector<std::vector<std::size_t>> strategy_selections(const std::vector<int>& groups, AnchorStrategy strategy);

double mean_pairwise_distance(const std::vector<std::size_t>& selection, const Constellation& c);

struct AnchorStrategyOptions {
  DecoderId decoder = DecoderId::MlAnchor;
  /// 0 evaluates every selection; otherwise an evenly spaced subset.
  std::size_t max_selections = 0;
  /// Test at this distance instead of the training one.
  std::optional<double> test_distance_m;
  ExperimentOptions experiment;
};

struct StrategyResult {
  AnchorStrategy strategy = AnchorStrategy::SingleGroup;
  std::size_t selection_count = 0;
  double mean_distance = 0.0;
  SummaryStats ber;
  std::vector<TrialResult> trials;
};

/// Groups the 8-CSK points, enumerates selections for S1..S3, and measures BER
/// with each evaluated selection as the packet's anchor set.
std::vector<StrategyResult> anchor_strategy_eval(const Scenario& base, const AnchorStrategyOptions& options);

}  // namespace csk
