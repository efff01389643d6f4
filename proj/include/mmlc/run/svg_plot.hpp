#pragma once

#include <string>
#include <vector>

#include "mmlc/run/result.hpp"

namespace mmlc::run {

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
  double band = 0.0;  // half-height of the shaded region (std dev)
};

struct PlotSeries {
  std::string label;
  std::string color;
  std::string dash;  // svg dasharray, empty = solid
  bool band = false;
  std::vector<PlotPoint> pts;
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  std::vector<double> vlines;  // dotted vertical markers (data coords)
  std::vector<PlotSeries> series;
};

// Data-to-pixel mapping for the fixed canvas; shared by the writer and by
// tests that cross-check plotted points against CSV aggregates.
struct PlotGeometry {
  static constexpr int kW = 640, kH = 420, kL = 62, kR = 16, kT = 34, kB = 46;
  double x_min, x_max, y_min, y_max;

  double px(double x) const {
    return kL + (x - x_min) / (x_max - x_min) * (kW - kL - kR);
  }
  double py(double y) const {
    return kH - kB - (y - y_min) / (y_max - y_min) * (kH - kT - kB);
  }
};

std::string format_coord(double v);
std::string polyline_points(const std::vector<PlotPoint>& pts, const PlotGeometry& g);

std::string render_svg(const PlotSpec& spec);
void write_plot(const std::string& path, const PlotSpec& spec);

// Panel builders over aggregated sweep results.
PlotSpec synthetic_plot(const SweepResult& r, int d_min);
PlotSpec robot_readout_plot(const SweepResult& r);
PlotSpec robot_vision_plot(const SweepResult& r);

}  // namespace mmlc::run
