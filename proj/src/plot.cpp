#include "suplab/plot.hpp"

#include "suplab/errors.hpp"
#include "suplab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace suplab {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Point {
  double x, mean, low, high;
};

struct Series {
  std::string label;
  std::string metric;
  std::vector<Point> points;
};

struct Scale {
  double lo, hi;
  bool log;
  double p0, p1;  // pixel positions of lo and hi

  double operator()(double v) const {
    const double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo)) : (v - lo) / (hi - lo);
    return p0 + t * (p1 - p0);
  }
};

bool wants_log(const std::vector<double>& values, std::optional<bool> forced) {
  if (forced) return *forced;
  if (values.empty()) return false;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  return *mn > 0.0 && *mx / *mn >= 20.0;
}

std::pair<double, double> padded(double lo, double hi, bool log) {
  if (log) {
    if (lo == hi) return {lo / 2.0, hi * 2.0};
    const double pad = 0.05 * (std::log10(hi) - std::log10(lo));
    return {lo / std::pow(10.0, pad), hi * std::pow(10.0, pad)};
  }
  if (lo == hi) {
    const double d = lo == 0.0 ? 0.5 : 0.1 * std::abs(lo);
    return {lo - d, hi + d};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::vector<double> ticks(double lo, double hi, bool log) {
  std::vector<double> out;
  if (log) {
    for (double e = std::ceil(std::log10(lo)); e <= std::floor(std::log10(hi)); e += 1.0) out.push_back(std::pow(10.0, e));
    if (out.size() >= 2) return out;
    out.clear();
  }
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-12 * step; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::vector<Series> group(const ExperimentResult& result, const PlotOptions& options, std::optional<std::size_t> x_index) {
  std::vector<Series> series;
  std::map<std::string, std::size_t> index;
  for (const auto& row : result.rows) {
    if (!options.metric.empty() && row.metric != options.metric) continue;
    std::string label = row.metric;
    for (std::size_t a = 0; a < row.axes.size(); ++a) {
      if (x_index && a == *x_index) continue;
      label += " " + result.axis_names[a] + "=" + format_double(row.axes[a]);
    }
    auto [it, inserted] = index.emplace(label, series.size());
    if (inserted) series.push_back({label, row.metric, {}});
    const double x = x_index ? row.axes[*x_index] : static_cast<double>(series[it->second].points.size());
    series[it->second].points.push_back({x, row.mean, row.ci_low, row.ci_high});
  }
  for (auto& s : series) {
    std::stable_sort(s.points.begin(), s.points.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
  }
  return series;
}

}  // namespace

std::string to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::line: return "line";
    case PlotKind::band: return "band";
    case PlotKind::hist: return "hist";
  }
  return "line";
}

PlotKind parse_plot_kind(const std::string& text) {
  if (text == "line") return PlotKind::line;
  if (text == "band") return PlotKind::band;
  if (text == "hist") return PlotKind::hist;
  throw ConfigError("unknown plot kind '" + text + "' (line, band or hist)");
}

std::string render_svg(const ExperimentResult& result, PlotKind kind, const PlotOptions& options) {
  std::optional<std::size_t> x_index;
  if (!options.x_axis.empty()) {
    x_index = result.axis_index(options.x_axis);
  } else if (!result.axis_names.empty()) {
    x_index = 0;
  }
  const std::vector<Series> series = group(result, options, x_index);
  if (series.empty()) throw DataError("nothing to plot for '" + result.experiment + "'");

  std::vector<double> xs, ys;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      xs.push_back(p.x);
      ys.push_back(p.low);
      ys.push_back(p.high);
      ys.push_back(p.mean);
    }
  }
  if (kind == PlotKind::hist) ys.push_back(0.0);
  const bool log_x = wants_log(xs, options.log_x) && kind != PlotKind::hist;
  const bool log_y = wants_log(ys, options.log_y) && kind != PlotKind::hist;
  if ((log_x && *std::min_element(xs.begin(), xs.end()) <= 0.0) || (log_y && *std::min_element(ys.begin(), ys.end()) <= 0.0)) {
    throw ConfigError("log scale needs positive values");
  }

  const double left = 70.0, right = options.width - 180.0, top = 40.0, bottom = options.height - 50.0;
  const auto [xlo, xhi] = padded(*std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end()), log_x);
  const auto [ylo, yhi] = padded(*std::min_element(ys.begin(), ys.end()), *std::max_element(ys.begin(), ys.end()), log_y);
  const Scale sx{xlo, xhi, log_x, left, right};
  const Scale sy{ylo, yhi, log_y, bottom, top};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\"" << options.height
      << "\" viewBox=\"0 0 " << options.width << ' ' << options.height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::string title = options.title.empty() ? result.experiment : options.title;
  svg << "<text x=\"" << px((left + right) / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";

  svg << "<g class=\"axes\" stroke=\"#333\">\n";
  svg << "<line x1=\"" << px(left) << "\" y1=\"" << px(bottom) << "\" x2=\"" << px(right) << "\" y2=\"" << px(bottom) << "\"/>\n";
  svg << "<line x1=\"" << px(left) << "\" y1=\"" << px(top) << "\" x2=\"" << px(left) << "\" y2=\"" << px(bottom) << "\"/>\n";
  for (double t : ticks(xlo, xhi, log_x)) {
    const double x = sx(t);
    svg << "<line x1=\"" << px(x) << "\" y1=\"" << px(bottom) << "\" x2=\"" << px(x) << "\" y2=\"" << px(bottom + 5) << "\"/>";
    svg << "<text x=\"" << px(x) << "\" y=\"" << px(bottom + 18) << "\" text-anchor=\"middle\" stroke=\"none\">"
        << tick_label(t) << "</text>\n";
  }
  for (double t : ticks(ylo, yhi, log_y)) {
    const double y = sy(t);
    svg << "<line x1=\"" << px(left - 5) << "\" y1=\"" << px(y) << "\" x2=\"" << px(left) << "\" y2=\"" << px(y) << "\"/>";
    svg << "<text x=\"" << px(left - 8) << "\" y=\"" << px(y + 4) << "\" text-anchor=\"end\" stroke=\"none\">"
        << tick_label(t) << "</text>\n";
  }
  const std::string x_label = x_index ? result.axis_names[*x_index] : "index";
  svg << "<text x=\"" << px((left + right) / 2) << "\" y=\"" << px(bottom + 38) << "\" text-anchor=\"middle\" stroke=\"none\">"
      << escape(x_label) << (log_x ? " (log)" : "") << "</text>\n";
  svg << "</g>\n";

  svg << "<g class=\"plot\" data-kind=\"" << to_string(kind) << "\" data-xmin=\"" << format_double(xlo) << "\" data-xmax=\""
      << format_double(xhi) << "\" data-ymin=\"" << format_double(ylo) << "\" data-ymax=\"" << format_double(yhi)
      << "\" data-log-x=\"" << (log_x ? 1 : 0) << "\" data-log-y=\"" << (log_y ? 1 : 0) << "\" data-left=\"" << px(left)
      << "\" data-right=\"" << px(right) << "\" data-top=\"" << px(top) << "\" data-bottom=\"" << px(bottom) << "\">\n";
  const double bar_slots = static_cast<double>(std::max<std::size_t>(xs.size(), 1));
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % std::size(kPalette)];
    svg << "<g class=\"series\" data-metric=\"" << escape(s.metric) << "\" data-label=\"" << escape(s.label) << "\">\n";
    if (kind == PlotKind::band && s.points.size() >= 2) {
      svg << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.points.size(); ++i) svg << (i ? " " : "") << px(sx(s.points[i].x)) << ',' << px(sy(s.points[i].high));
      for (std::size_t i = s.points.size(); i-- > 0;) svg << ' ' << px(sx(s.points[i].x)) << ',' << px(sy(s.points[i].low));
      svg << "\"/>\n";
    }
    if (kind != PlotKind::hist && s.points.size() >= 2) {
      svg << "<polyline class=\"line\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.points.size(); ++i) svg << (i ? " " : "") << px(sx(s.points[i].x)) << ',' << px(sy(s.points[i].mean));
      svg << "\"/>\n";
    }
    for (const auto& p : s.points) {
      const double x = sx(p.x), y = sy(p.mean);
      if (kind == PlotKind::hist) {
        const double w = std::max(2.0, 0.8 * (right - left) / bar_slots);
        const double x0 = x - w / 2 + (static_cast<double>(si) - (series.size() - 1) / 2.0) * w / series.size();
        const double y0 = sy(0.0);
        svg << "<rect class=\"bar\" x=\"" << px(x0) << "\" y=\"" << px(std::min(y, y0)) << "\" width=\"" << px(w / series.size())
            << "\" height=\"" << px(std::abs(y0 - y)) << "\" fill=\"" << color << "\"/>\n";
      } else if (kind == PlotKind::line && p.high > p.low) {
        svg << "<line class=\"whisker\" x1=\"" << px(x) << "\" y1=\"" << px(sy(p.low)) << "\" x2=\"" << px(x) << "\" y2=\""
            << px(sy(p.high)) << "\" stroke=\"" << color << "\"/>\n";
      }
      svg << "<circle class=\"marker\" cx=\"" << px(x) << "\" cy=\"" << px(y) << "\" r=\"3\" fill=\"" << color
          << "\" data-x=\"" << format_double(p.x) << "\" data-mean=\"" << format_double(p.mean) << "\" data-ci-low=\""
          << format_double(p.low) << "\" data-ci-high=\"" << format_double(p.high) << "\"/>\n";
    }
    svg << "</g>\n";
  }
  svg << "</g>\n";

  svg << "<g class=\"legend\">\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double y = top + 14.0 * static_cast<double>(si);
    svg << "<rect x=\"" << px(right + 12) << "\" y=\"" << px(y - 8) << "\" width=\"10\" height=\"10\" fill=\""
        << kPalette[si % std::size(kPalette)] << "\"/><text x=\"" << px(right + 26) << "\" y=\"" << px(y + 1) << "\">"
        << escape(series[si].label) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

void emit_plot(const ExperimentResult& result, PlotKind kind, const std::filesystem::path& path,
               const PlotOptions& options) {
  if (result.rows.empty()) throw DataError("cannot plot an empty result");
  write_text(path, render_svg(result, kind, options));
}

}  // namespace suplab
