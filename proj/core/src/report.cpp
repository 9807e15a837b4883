#include "csk/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "csk/config.hpp"
#include "csk/error.hpp"

namespace csk {

void write_results_csv(std::ostream& out, const std::vector<TrialResult>& results) {
  out << kResultsHeader << '\n';
  for (const TrialResult& r : results) {
    out << r.trial_id << ',' << to_string(r.decoder) << ',' << r.order << ',' << format_double(r.baud_hz) << ','
        << format_double(r.distance_m) << ',' << format_double(r.lux) << ',' << r.n_cells << ',' << r.n_anchors << ','
        << r.seed << ',' << format_double(r.ber) << ',' << (r.sync_ok ? 1 : 0) << ',' << format_double(r.wall_ms)
        << '\n';
  }
}

void write_results_csv(const std::filesystem::path& path, const std::vector<TrialResult>& results) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string());
  write_results_csv(out, results);
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

namespace {

template <typename T>
T field_as(const std::string& s, int line) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::Io, "results line " + std::to_string(line) + ": bad field '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<TrialResult> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Io, "empty results file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw Error(ErrorCode::Io, "unexpected results header");
  std::vector<TrialResult> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 12) throw Error(ErrorCode::Io, "results line " + std::to_string(line_no) + ": expected 12 fields");
    TrialResult r;
    r.trial_id = f[0];
    r.decoder = decoder_from_string(f[1]);
    r.order = field_as<int>(f[2], line_no);
    r.baud_hz = field_as<double>(f[3], line_no);
    r.distance_m = field_as<double>(f[4], line_no);
    r.lux = field_as<double>(f[5], line_no);
    r.n_cells = field_as<std::size_t>(f[6], line_no);
    r.n_anchors = field_as<std::size_t>(f[7], line_no);
    r.seed = field_as<std::uint64_t>(f[8], line_no);
    r.ber = field_as<double>(f[9], line_no);
    r.sync_ok = field_as<int>(f[10], line_no) != 0;
    r.wall_ms = field_as<double>(f[11], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TrialResult> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_results_csv(in);
}

std::vector<AggregatePoint> aggregate(const std::vector<TrialResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyResults, "no results to aggregate");
  // Group labels keep their first-seen ordinal for non-numeric x.
  std::map<std::string, std::size_t> ordinal;
  std::map<std::pair<std::string, DecoderId>, std::vector<double>> groups;
  for (const TrialResult& r : results) {
    const std::string group = r.trial_id.substr(0, r.trial_id.find('#'));
    ordinal.emplace(group, ordinal.size());
    groups[{group, r.decoder}].push_back(r.ber);
  }
  std::vector<AggregatePoint> out;
  for (const auto& [key, bers] : groups) {
    AggregatePoint p;
    p.group = key.first;
    p.decoder = key.second;
    p.stats = summarize(bers);
    p.x = static_cast<double>(ordinal[key.first]);
    if (const auto eq = p.group.rfind('='); eq != std::string::npos) {
      const std::string num = p.group.substr(eq + 1);
      double v = 0.0;
      const auto res = std::from_chars(num.data(), num.data() + num.size(), v);
      if (res.ec == std::errc() && res.ptr == num.data() + num.size()) p.x = v;
    }
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(), [](const AggregatePoint& a, const AggregatePoint& b) {
    if (a.decoder != b.decoder) return a.decoder < b.decoder;
    if (a.x != b.x) return a.x < b.x;
    return a.group < b.group;
  });
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<AggregatePoint>& points) {
  out << "group,x,decoder,mean_ber,std_ber,count\n";
  for (const auto& p : points) {
    out << p.group << ',' << format_double(p.x) << ',' << to_string(p.decoder) << ',' << format_double(p.stats.mean)
        << ',' << format_double(p.stats.stddev) << ',' << p.stats.count << '\n';
  }
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c"};

}  // namespace

std::string render_svg(const std::vector<AggregatePoint>& points, const std::string& title,
                       const std::string& x_label) {
  if (points.empty()) throw Error(ErrorCode::EmptyResults, "nothing to plot");
  constexpr double kW = 720, kH = 440, kLeft = 80, kRight = 150, kTop = 40, kBottom = 60;
  const double plot_w = kW - kLeft - kRight;
  const double plot_h = kH - kTop - kBottom;

  double x_min = points.front().x, x_max = points.front().x;
  double ber_max = kBerFloor;
  bool floored = false;
  for (const auto& p : points) {
    x_min = std::min(x_min, p.x);
    x_max = std::max(x_max, p.x);
    ber_max = std::max(ber_max, p.stats.mean + p.stats.stddev);
    if (p.stats.mean < kBerFloor) floored = true;
  }
  if (x_max == x_min) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  const double lo = std::log10(kBerFloor);
  const double hi = std::max(0.0, std::ceil(std::log10(ber_max)));
  auto sx = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double ber) {
    const double l = std::log10(std::max(ber, kBerFloor));
    return kTop + (hi - l) / (hi - lo) * plot_h;
  };

  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int d = static_cast<int>(lo); d <= static_cast<int>(hi); ++d) {
    const double y = sy(std::pow(10.0, d));
    o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + plot_w << "\" y1=\"" << y << "\" y2=\"" << y
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << d << "</text>\n";
  }
  std::vector<double> xs;
  for (const auto& p : points) xs.push_back(p.x);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  for (double x : xs) {
    o << "<text x=\"" << sx(x) << "\" y=\"" << kTop + plot_h + 18 << "\" text-anchor=\"middle\">"
      << format_double(x) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kH - 18 << "\" text-anchor=\"middle\">" << escape(x_label)
    << "</text>\n";
  o << "<text x=\"20\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
    << kTop + plot_h / 2 << ")\">BER</text>\n";

  int legend = 0;
  for (DecoderId d : {DecoderId::Ls, DecoderId::MlRaw, DecoderId::MlAnchor}) {
    std::vector<const AggregatePoint*> series;
    for (const auto& p : points)
      if (p.decoder == d) series.push_back(&p);
    if (series.empty()) continue;
    const char* color = kColors[static_cast<int>(d)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto* p : series) o << sx(p->x) << ',' << sy(p->stats.mean) << ' ';
    o << "\"/>\n";
    for (const auto* p : series) {
      const double x = sx(p->x);
      const double y_lo = sy(p->stats.mean - p->stats.stddev);
      const double y_hi = sy(p->stats.mean + p->stats.stddev);
      o << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << y_lo << "\" y2=\"" << y_hi << "\" stroke=\""
        << color << "\"/>\n";
      o << "<circle cx=\"" << x << "\" cy=\"" << sy(p->stats.mean) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 16 + 18 * legend++;
    o << "<line x1=\"" << kLeft + plot_w + 12 << "\" x2=\"" << kLeft + plot_w + 32 << "\" y1=\"" << ly << "\" y2=\""
      << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kLeft + plot_w + 38 << "\" y=\"" << ly + 4 << "\">" << to_string(d) << "</text>\n";
  }
  if (floored) {
    o << "<text x=\"" << kLeft + 6 << "\" y=\"" << kTop + plot_h - 6 << "\" font-size=\"11\" fill=\"#555\">"
      << "BER below 1e-5 (including 0) drawn at the 1e-5 floor</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace csk
