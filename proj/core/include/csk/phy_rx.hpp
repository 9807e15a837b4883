#pragma once

// Receiver front end and the least-squares channel-estimation decoder.

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "csk/channel.hpp"
#include "csk/colorspace.hpp"
#include "csk/phy_tx.hpp"

namespace csk {

struct SymbolWindow {
  std::size_t slot = 0;
  Eigen::MatrixXd samples;  // n_cells x samples_per_slot, volts
  Eigen::VectorXd feature;  // per-cell trimmed mean
};

struct AnchorSet {
  std::vector<std::size_t> anchor_ids;
  Eigen::MatrixXd vectors;  // n_anchors x n_cells
  std::vector<Rgb> powers;

  std::size_t size() const { return anchor_ids.size(); }
};

struct ChannelMatrix {
  /// n_cells x 3, or n_cells x 4 with the ambient offset in the last column.
  Eigen::MatrixXd entries;

  bool affine() const { return entries.cols() == 4; }
};

/// Which cell to correlate against the red/blue preamble. With a known
/// polarity (+1 when the cell sees red brighter than blue) the signed
/// correlation is maximised; otherwise its magnitude.
struct SyncHint {
  Eigen::Index cell = 0;
  int polarity = 0;
};

/// Cell with the largest |K_R - K_B| of a coupling matrix, with its sign.
SyncHint contrast_hint(const Eigen::MatrixXd& coupling);

inline constexpr double kSyncThreshold = 0.6;

/// Sample index where the packet preamble starts. Throws SyncNotFound when
/// the best normalised correlation is below kSyncThreshold.
std::size_t detect_preamble(const AdcTrace& trace, double baud_hz, const FrameLayout& layout,
                            std::optional<SyncHint> hint = std::nullopt);

/// Index range [first, first + count) of the samples averaged for a slot feature.
struct TrimRange {
  int first = 0;
  int count = 1;
};
TrimRange trimmed_range(int samples_per_slot);

std::vector<SymbolWindow> segment(const AdcTrace& trace, std::size_t start, std::size_t n_slots, double fs_hz,
                                  double baud_hz);

/// Anchors from the packet windows (which start at the first preamble slot).
/// Each anchor vector is the feature of the last slot of its block.
AnchorSet extract_anchors(const std::vector<SymbolWindow>& windows, const FrameLayout& layout,
                          const Constellation& anchor_constellation, double epsilon);

/// f_abs against every anchor: [|d - a_1| / a_1, ..., |d - a_m| / a_m].
Eigen::VectorXd differential_features(const Eigen::VectorXd& d, const AnchorSet& anchors);

enum class ChannelModel { Linear, Affine, Auto };

/// Least-squares fit of H . S = Y over the anchors. Auto picks affine only when
/// at least four anchors give a full-rank augmented power matrix; anchors of
/// constant total power never do, and the linear fit absorbs the offset.
ChannelMatrix calibrate_h(const AnchorSet& anchors, ChannelModel model = ChannelModel::Auto);

/// Least-squares power estimate for one observation (negatives clamped,
/// normalised to sum 1). Returns nullopt when nothing positive survives.
std::optional<Rgb> estimate_powers(const Eigen::VectorXd& d, const ChannelMatrix& h);

std::size_t ls_decode(const SymbolWindow& window, const ChannelMatrix& h, const Constellation& c);
std::size_t ls_decode(const Eigen::VectorXd& d, const ChannelMatrix& h, const Constellation& c);

}  // namespace csk
