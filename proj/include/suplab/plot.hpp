#pragma once

#include "suplab/experiment.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace suplab {

enum class PlotKind { line, band, hist };

std::string to_string(PlotKind kind);
PlotKind parse_plot_kind(const std::string& text);

struct PlotOptions {
  std::string metric;  // empty: every metric becomes its own series
  std::string x_axis;  // empty: the first axis
  /// Unset picks log scale when every value is positive and max/min >= 20.
  std::optional<bool> log_x;
  std::optional<bool> log_y;
  std::string title;  // empty: the experiment name
  int width = 640;
  int height = 400;
};

/// Standalone SVG. Series are the rows grouped by metric and by the values of
/// every axis other than x. Each point is a <circle class="marker"> carrying
/// data-x, data-mean, data-ci-low and data-ci-high; `band` adds a
/// <polygon class="band"> (upper edge left to right, then lower edge back) for
/// series with two or more points. The <g class="plot"> element records the
/// data and pixel extents so coordinates can be mapped back.
std::string render_svg(const ExperimentResult& result, PlotKind kind, const PlotOptions& options = {});

/// Writes render_svg to `path`; throws DataError when `result` has no rows.
void emit_plot(const ExperimentResult& result, PlotKind kind, const std::filesystem::path& path,
               const PlotOptions& options = {});

}  // namespace suplab
