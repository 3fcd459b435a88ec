#pragma once

#include <string>
#include <vector>

namespace eoslab {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
  int width = 760;
  int height = 500;
};

// Static self-contained SVG line plot: frame, ticks, grid, one polyline per
// series, legend. Byte-deterministic for fixed inputs. Non-finite points
// (and non-positive ones on log axes) break the polyline.
std::string render_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace eoslab
