#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file plot.hpp
 * @brief Plain-text SVG charts built from a run's summary.csv.
 *
 * Every bar and point carries data-method / data-metric / data-value
 * attributes (and bars a data-scale in px per unit) so a chart can be checked
 * against the CSV it was drawn from.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddorm/experiment.hpp"
#include "ddorm/serialize.hpp"

namespace ddorm {

struct SummaryRow {
  std::string method;
  std::string seed;  // "mean" for aggregate rows
  double pair_accuracy = 0.0;
  double auc = 0.0;
  double mean_margin = 0.0;

  bool is_mean() const { return seed == "mean"; }
};

class PlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<SummaryRow> parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSummaryHeader)
    throw PlotError("summary.csv: unexpected header '" + line + "'");
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream cs(line);
    std::string cell;
    while (std::getline(cs, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw PlotError("summary.csv: malformed row '" + line + "'");
    try {
      rows.push_back({cells[0], cells[1], parse_double(cells[2]), parse_double(cells[3]), parse_double(cells[4])});
    } catch (const std::runtime_error& e) {
      throw PlotError("summary.csv: " + std::string(e.what()));
    }
  }
  return rows;
}

namespace detail {

inline const char* method_color(const std::string& method) { return method == "ddorm" ? "#1f77b4" : "#ff7f0e"; }

inline std::string px(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(3);
  s << v;
  return s.str();
}

inline std::vector<std::string> methods_in_order(const std::vector<SummaryRow>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows)
    if (std::find(out.begin(), out.end(), r.method) == out.end()) out.push_back(r.method);
  return out;
}

}  // namespace detail

/// Grouped bars of the mean rows: one panel per metric, one bar per method.
inline std::string mean_metrics_svg(const std::vector<SummaryRow>& rows) {
  std::vector<SummaryRow> means;
  for (const auto& r : rows)
    if (r.is_mean()) means.push_back(r);
  if (means.empty()) throw PlotError("no mean rows in artifact");

  struct Panel {
    const char* metric;
    double SummaryRow::*field;
  };
  const Panel panels[] = {{"pair_accuracy", &SummaryRow::pair_accuracy},
                          {"auc", &SummaryRow::auc},
                          {"mean_margin", &SummaryRow::mean_margin}};
  const double panel_w = 220.0, plot_h = 200.0, top = 50.0, left = 30.0, bar_w = 40.0, gap = 20.0;
  const double width = left + 3 * panel_w + 20.0, height = top + plot_h + 70.0;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::px(width) << "\" height=\""
      << detail::px(height) << "\" viewBox=\"0 0 " << detail::px(width) << ' ' << detail::px(height) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << detail::px(width) << "\" height=\"" << detail::px(height)
      << "\" fill=\"white\"/>\n"
      << "<text x=\"" << detail::px(width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"16\">Mean metrics across seeds</text>\n";

  for (std::size_t pi = 0; pi < 3; ++pi) {
    const Panel& panel = panels[pi];
    double max_abs = 0.0;
    bool any_negative = false;
    for (const auto& m : means) {
      max_abs = std::max(max_abs, std::abs(m.*panel.field));
      any_negative = any_negative || m.*panel.field < 0.0;
    }
    // Probability-valued panels share a fixed [0, 1] axis.
    const bool unit_axis = panel.field != &SummaryRow::mean_margin;
    const double extent = unit_axis ? 1.0 : (max_abs > 0.0 ? max_abs : 1.0);
    const double usable = any_negative ? plot_h / 2.0 : plot_h;
    const double scale = usable / extent;
    const double x0 = left + static_cast<double>(pi) * panel_w;
    const double baseline = any_negative ? top + plot_h / 2.0 : top + plot_h;

    svg << "<g class=\"panel\" data-metric=\"" << panel.metric << "\">\n"
        << "<line x1=\"" << detail::px(x0) << "\" y1=\"" << detail::px(baseline) << "\" x2=\""
        << detail::px(x0 + panel_w - gap) << "\" y2=\"" << detail::px(baseline) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << detail::px(x0 + (panel_w - gap) / 2) << "\" y=\"" << detail::px(top + plot_h + 40)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << panel.metric << "</text>\n";
    for (std::size_t mi = 0; mi < means.size(); ++mi) {
      const double v = means[mi].*panel.field;
      const double h = std::abs(v) * scale;
      const double x = x0 + gap + static_cast<double>(mi) * (bar_w + gap);
      const double y = v >= 0.0 ? baseline - h : baseline;
      svg << "<rect class=\"bar\" data-method=\"" << means[mi].method << "\" data-metric=\"" << panel.metric
          << "\" data-value=\"" << format_double(v) << "\" data-scale=\"" << format_double(scale) << "\" x=\""
          << detail::px(x) << "\" y=\"" << detail::px(y) << "\" width=\"" << detail::px(bar_w) << "\" height=\""
          << format_double(h) << "\" fill=\"" << detail::method_color(means[mi].method) << "\"/>\n"
          << "<text x=\"" << detail::px(x + bar_w / 2) << "\" y=\"" << detail::px(top + plot_h + 20)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << means[mi].method
          << "</text>\n";
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

/// Pair accuracy per seed, one polyline per method.
inline std::string per_seed_svg(const std::vector<SummaryRow>& rows) {
  std::vector<std::string> seeds;
  for (const auto& r : rows)
    if (!r.is_mean() && std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
  if (seeds.empty()) throw PlotError("no seeds in artifact");

  const double left = 60.0, top = 50.0, plot_w = 420.0, plot_h = 240.0;
  const double width = left + plot_w + 140.0, height = top + plot_h + 60.0;
  const double step = seeds.size() > 1 ? plot_w / static_cast<double>(seeds.size() - 1) : 0.0;
  auto x_of = [&](std::size_t i) { return seeds.size() > 1 ? left + step * static_cast<double>(i) : left + plot_w / 2; };
  auto y_of = [&](double v) { return top + plot_h - v * plot_h; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::px(width) << "\" height=\""
      << detail::px(height) << "\" viewBox=\"0 0 " << detail::px(width) << ' ' << detail::px(height) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << detail::px(width) << "\" height=\"" << detail::px(height)
      << "\" fill=\"white\"/>\n"
      << "<text x=\"" << detail::px(left + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">Per-seed pair accuracy</text>\n"
      << "<line x1=\"" << detail::px(left) << "\" y1=\"" << detail::px(top + plot_h) << "\" x2=\""
      << detail::px(left + plot_w) << "\" y2=\"" << detail::px(top + plot_h) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << detail::px(left) << "\" y1=\"" << detail::px(top) << "\" x2=\"" << detail::px(left)
      << "\" y2=\"" << detail::px(top + plot_h) << "\" stroke=\"black\"/>\n";
  for (double tick : {0.0, 0.25, 0.5, 0.75, 1.0})
    svg << "<text x=\"" << detail::px(left - 8) << "\" y=\"" << detail::px(y_of(tick) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(tick) << "</text>\n";
  for (std::size_t i = 0; i < seeds.size(); ++i)
    svg << "<text x=\"" << detail::px(x_of(i)) << "\" y=\"" << detail::px(top + plot_h + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">seed " << seeds[i] << "</text>\n";

  const auto methods = detail::methods_in_order(rows);
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const std::string& method = methods[mi];
    std::ostringstream points;
    std::ostringstream markers;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      for (const auto& r : rows) {
        if (r.method != method || r.seed != seeds[i]) continue;
        points << detail::px(x_of(i)) << ',' << detail::px(y_of(r.pair_accuracy)) << ' ';
        markers << "<circle class=\"point\" data-method=\"" << method << "\" data-seed=\"" << r.seed
                << "\" data-metric=\"pair_accuracy\" data-value=\"" << format_double(r.pair_accuracy) << "\" cx=\""
                << detail::px(x_of(i)) << "\" cy=\"" << detail::px(y_of(r.pair_accuracy)) << "\" r=\"4\" fill=\""
                << detail::method_color(method) << "\"/>\n";
      }
    }
    svg << "<polyline fill=\"none\" stroke=\"" << detail::method_color(method) << "\" stroke-width=\"2\" points=\""
        << points.str() << "\"/>\n"
        << markers.str() << "<text x=\"" << detail::px(left + plot_w + 20) << "\" y=\""
        << detail::px(top + 20 + 18 * static_cast<double>(mi)) << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
        << detail::method_color(method) << "\">" << method << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

/// Writes figures/mean_metrics.svg and figures/pair_accuracy_per_seed.svg under run_dir.
inline std::vector<std::filesystem::path> plot_run(const std::filesystem::path& run_dir) {
  const auto summary = run_dir / "summary.csv";
  if (!std::filesystem::exists(summary)) throw PlotError("missing artifact file: " + summary.string());
  const auto rows = parse_summary_csv(read_text_file(summary));
  bool any_seed = false;
  for (const auto& r : rows) any_seed = any_seed || !r.is_mean();
  if (!any_seed) throw PlotError("no seeds in artifact");

  const std::vector<std::filesystem::path> paths{run_dir / "figures" / "mean_metrics.svg",
                                                 run_dir / "figures" / "pair_accuracy_per_seed.svg"};
  write_text_file(paths[0], mean_metrics_svg(rows));
  write_text_file(paths[1], per_seed_svg(rows));
  return paths;
}

}  // namespace ddorm
