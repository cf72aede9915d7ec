#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace clinbench::bench {

/// A polyline in data coordinates; nullopt renders as an "n/a" legend entry.
struct Series {
  std::string label;
  std::optional<std::vector<std::pair<double, double>>> points;
  bool dashed = false;
};

struct PlotFrame {
  double left = 60, top = 30, width = 320, height = 320;
  double x_max = 1.0;
};

std::string xml_escape(const std::string& text);
/// Data coordinates to SVG coordinates (y grows downward).
std::pair<double, double> to_svg(const PlotFrame& f, double x, double y);

/// ROC curves on the unit square with the chance diagonal.
std::string roc_svg(const std::string& title, const std::vector<Series>& series);
/// Kaplan-Meier step functions; `points` are the (time, survival) corners of
/// each curve starting at (0, 1).
std::string km_svg(const std::string& title, const std::vector<Series>& series);

/// KM corners for the step function: (0,1), then a horizontal and a vertical
/// segment per event time.
std::vector<std::pair<double, double>> km_steps(const nlohmann::json& curve);

/// Writes SVG plots and matching curve CSVs (columns group, series, x, y,
/// at_risk) for every curve in a report: ROC per model with one line per
/// subgroup, and KM predicted-group pairs with observed-label overlays per
/// model, group and endpoint. Everything is rendered before the first file is
/// written. Returns the written paths.
std::vector<std::string> emit_plots(const nlohmann::json& report, const std::string& dir);

}  // namespace clinbench::bench
