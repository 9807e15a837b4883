#include "csk/phy_rx.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "csk/error.hpp"

namespace csk {

SyncHint contrast_hint(const Eigen::MatrixXd& coupling) {
  Eigen::Index best = 0;
  double best_abs = -1.0;
  for (Eigen::Index i = 0; i < coupling.rows(); ++i) {
    const double diff = coupling(i, 0) - coupling(i, 2);
    if (std::abs(diff) > best_abs) {
      best_abs = std::abs(diff);
      best = i;
    }
  }
  const double sign = coupling(best, 0) - coupling(best, 2);
  return {best, sign > 0 ? 1 : (sign < 0 ? -1 : 0)};
}

std::size_t detect_preamble(const AdcTrace& trace, double baud_hz, const FrameLayout& layout,
                            std::optional<SyncHint> hint) {
  const int spb = samples_per_slot(trace.fs_hz, baud_hz);
  const auto n = static_cast<Eigen::Index>(layout.preamble_slots) * spb;
  const Eigen::Index total = trace.n_samples();
  if (total < n || trace.n_cells() == 0) throw Error(ErrorCode::SyncNotFound, "trace shorter than the preamble");

  SyncHint h;
  if (hint) {
    h = *hint;
    if (h.cell < 0 || h.cell >= trace.n_cells()) throw Error(ErrorCode::OutOfBounds, "sync cell out of range");
  } else {
    // Fall back to the most active cell, polarity unknown.
    double best_var = -1.0;
    for (Eigen::Index i = 0; i < trace.n_cells(); ++i) {
      const Eigen::RowVectorXd row = trace.volts.row(i);
      const double var = (row.array() - row.mean()).square().mean();
      if (var > best_var) {
        best_var = var;
        h.cell = i;
      }
    }
    h.polarity = 0;
  }

  // +1 on red slots, -1 on blue; zero mean because preamble_slots is even.
  Eigen::VectorXd tmpl(n);
  for (Eigen::Index k = 0; k < n; ++k) tmpl(k) = (k / spb) % 2 == 0 ? 1.0 : -1.0;
  const double tmpl_norm = std::sqrt(static_cast<double>(n));

  const Eigen::RowVectorXd x = trace.volts.row(h.cell);
  double best_score = -std::numeric_limits<double>::infinity();
  double best_corr = 0.0;
  Eigen::Index best_lag = 0;
  for (Eigen::Index lag = 0; lag + n <= total; ++lag) {
    const auto seg = x.segment(lag, n);
    const double mean = seg.mean();
    const double ss = (seg.array() - mean).square().sum();
    if (ss <= 0.0) continue;
    const double corr = (seg.array() - mean).matrix().dot(tmpl) / (std::sqrt(ss) * tmpl_norm);
    const double score = h.polarity == 0 ? std::abs(corr) : h.polarity * corr;
    if (score > best_score) {
      best_score = score;
      best_corr = corr;
      best_lag = lag;
    }
  }
  if (!(best_score >= kSyncThreshold)) {
    throw Error(ErrorCode::SyncNotFound, "peak preamble correlation " + std::to_string(best_corr));
  }
  return static_cast<std::size_t>(best_lag);
}

TrimRange trimmed_range(int spb) {
  const int count = std::max(1, spb / 2);
  return {(spb - count + 1) / 2, count};
}

std::vector<SymbolWindow> segment(const AdcTrace& trace, std::size_t start, std::size_t n_slots, double fs_hz,
                                  double baud_hz) {
  const int spb = samples_per_slot(fs_hz, baud_hz);
  const std::size_t needed = start + n_slots * static_cast<std::size_t>(spb);
  if (needed > static_cast<std::size_t>(trace.n_samples())) {
    throw Error(ErrorCode::OutOfBounds, "segment runs past the end of the trace");
  }
  const TrimRange trim = trimmed_range(spb);
  std::vector<SymbolWindow> out;
  out.reserve(n_slots);
  for (std::size_t s = 0; s < n_slots; ++s) {
    const auto first = static_cast<Eigen::Index>(start + s * static_cast<std::size_t>(spb));
    SymbolWindow w;
    w.slot = s;
    w.samples = trace.volts.middleCols(first, spb);
    w.feature = w.samples.middleCols(trim.first, trim.count).rowwise().mean();
    out.push_back(std::move(w));
  }
  return out;
}

AnchorSet extract_anchors(const std::vector<SymbolWindow>& windows, const FrameLayout& layout,
                          const Constellation& anchor_constellation, double epsilon) {
  if (windows.size() < layout.payload_offset()) throw Error(ErrorCode::OutOfBounds, "windows do not cover the anchors");
  const auto n_cells = windows.front().feature.size();
  AnchorSet a;
  a.anchor_ids = layout.anchor_ids;
  a.vectors.resize(static_cast<Eigen::Index>(layout.anchor_ids.size()), n_cells);
  for (std::size_t j = 0; j < layout.anchor_ids.size(); ++j) {
    const std::size_t last = static_cast<std::size_t>(layout.preamble_slots) +
                             (j + 1) * static_cast<std::size_t>(layout.slots_per_anchor) - 1;
    const Eigen::VectorXd& f = windows[last].feature;
    if ((f.array().abs() < epsilon).any()) {
      throw Error(ErrorCode::AnchorUnderflow, "anchor " + std::to_string(j) + " is below the noise floor");
    }
    a.vectors.row(static_cast<Eigen::Index>(j)) = f.transpose();
    a.powers.push_back(anchor_constellation.powers.at(layout.anchor_ids[j]));
  }
  return a;
}

Eigen::VectorXd differential_features(const Eigen::VectorXd& d, const AnchorSet& anchors) {
  const Eigen::Index n = d.size();
  if (anchors.vectors.cols() != n) throw Error(ErrorCode::ShapeMismatch, "anchor width differs from observation");
  Eigen::VectorXd out(n * anchors.vectors.rows());
  for (Eigen::Index j = 0; j < anchors.vectors.rows(); ++j) {
    const Eigen::ArrayXd a = anchors.vectors.row(j).transpose().array();
    out.segment(j * n, n) = ((d.array() - a).abs() / a).matrix();
  }
  return out;
}

namespace {

// Sᵀ: one row per anchor, [P_R P_G P_B] plus a trailing 1 in affine mode.
Eigen::MatrixXd anchor_design(const AnchorSet& anchors, bool affine) {
  const auto m = static_cast<Eigen::Index>(anchors.size());
  Eigen::MatrixXd st(m, affine ? 4 : 3);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Rgb& p = anchors.powers[static_cast<std::size_t>(j)];
    st(j, 0) = p[0];
    st(j, 1) = p[1];
    st(j, 2) = p[2];
    if (affine) st(j, 3) = 1.0;
  }
  return st;
}

bool full_column_rank(const Eigen::MatrixXd& st) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(st);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1) >= 1e-10 * sv(0);
}

}  // namespace

ChannelMatrix calibrate_h(const AnchorSet& anchors, ChannelModel model) {
  const auto m = static_cast<Eigen::Index>(anchors.size());
  bool affine = model == ChannelModel::Affine;
  if (model == ChannelModel::Auto && m >= 4) {
    // Constant-power anchors make the offset column a combination of the
    // power columns; the linear fit then absorbs the offset exactly.
    affine = full_column_rank(anchor_design(anchors, true));
  }
  const Eigen::Index unknowns = affine ? 4 : 3;
  if (m < unknowns) {
    throw Error(ErrorCode::Underdetermined,
                std::to_string(m) + " anchors cannot determine a " + std::to_string(unknowns) + "-column channel");
  }
  const Eigen::MatrixXd st = anchor_design(anchors, affine);
  if (!full_column_rank(st)) throw Error(ErrorCode::RankDeficient, "anchor power matrix is rank deficient");

  const Eigen::MatrixXd ht = st.colPivHouseholderQr().solve(anchors.vectors);
  return {ht.transpose()};
}

std::optional<Rgb> estimate_powers(const Eigen::VectorXd& d, const ChannelMatrix& h) {
  if (h.entries.rows() != d.size()) throw Error(ErrorCode::ShapeMismatch, "H rows differ from observation size");
  const Eigen::MatrixXd h3 = h.entries.leftCols(3);
  Eigen::VectorXd rhs = d;
  if (h.affine()) rhs -= h.entries.col(3);
  const auto qr = h3.colPivHouseholderQr();
  if (qr.rank() < 3) throw Error(ErrorCode::RankDeficient, "channel matrix lacks full column rank");
  Eigen::Vector3d s = qr.solve(rhs);
  s = s.cwiseMax(0.0);
  const double sum = s.sum();
  if (!(sum > 1e-12)) return std::nullopt;
  s /= sum;
  return Rgb{s(0), s(1), s(2)};
}

std::size_t ls_decode(const Eigen::VectorXd& d, const ChannelMatrix& h, const Constellation& c) {
  const auto p = estimate_powers(d, h);
  if (!p) return nearest_symbol(mix_chromaticity({1.0 / 3, 1.0 / 3, 1.0 / 3}, c.vertices), c);
  return nearest_symbol(mix_chromaticity(*p, c.vertices), c);
}

std::size_t ls_decode(const SymbolWindow& window, const ChannelMatrix& h, const Constellation& c) {
  return ls_decode(window.feature, h, c);
}

}  // namespace csk
