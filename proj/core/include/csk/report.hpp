#pragma once

// Results CSV and SVG charts.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "csk/harness.hpp"

namespace csk {

inline constexpr const char* kResultsHeader =
    "trial_id,decoder,order,baud,distance_m,lux,n_cells,n_anchors,seed,ber,sync_ok,wall_ms";

/// One row per trial; doubles in shortest round-trip form.
void write_results_csv(std::ostream& out, const std::vector<TrialResult>& results);
void write_results_csv(const std::filesystem::path& path, const std::vector<TrialResult>& results);
std::vector<TrialResult> read_results_csv(std::istream& in);
std::vector<TrialResult> read_results_csv(const std::filesystem::path& path);

/// Trials sharing a group label (the trial id up to '#') and decoder.
struct AggregatePoint {
  std::string group;
  /// Numeric part after the last '=' in the group, or the group's ordinal.
  double x = 0.0;
  DecoderId decoder = DecoderId::Ls;
  SummaryStats stats;
};

/// Sorted by decoder, then x, then group. Throws EmptyResults.
std::vector<AggregatePoint> aggregate(const std::vector<TrialResult>& results);

/// Plotted BER values are clamped to this floor on the log axis.
inline constexpr double kBerFloor = 1e-5;

/// Line chart of mean BER per decoder against x on a log axis, with +-1 std
/// error bars. Throws EmptyResults.
std::string render_svg(const std::vector<AggregatePoint>& points, const std::string& title,
                       const std::string& x_label);

void write_summary_csv(std::ostream& out, const std::vector<AggregatePoint>& points);

}  // namespace csk
