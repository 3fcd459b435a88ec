#include "eoslab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace eoslab {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string num(double v, const char* fmt = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo = 0.0, hi = 1.0;  // in plot space (log10 when logarithmic)
  bool log = false;

  double place(double v) const { return ((log ? std::log10(v) : v) - lo) / (hi - lo); }
  bool valid(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
};

Axis fit_axis(const std::vector<PlotSeries>& series, bool take_x, bool log) {
  Axis ax;
  ax.log = log;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const PlotSeries& s : series) {
    const std::vector<double>& vals = take_x ? s.x : s.y;
    for (double v : vals) {
      if (!ax.valid(v)) continue;
      const double p = log ? std::log10(v) : v;
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  }
  if (!(lo <= hi)) {  // nothing plottable; pick an arbitrary unit window
    lo = log ? 0.0 : 0.0;
    hi = log ? 1.0 : 1.0;
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  ax.lo = lo - pad;
  ax.hi = hi + pad;
  return ax;
}

// Tick positions in plot space, with labels in data space.
std::vector<std::pair<double, std::string>> ticks_for(const Axis& ax) {
  std::vector<std::pair<double, std::string>> out;
  if (ax.log) {
    const int d0 = static_cast<int>(std::ceil(ax.lo - 1e-9));
    const int d1 = static_cast<int>(std::floor(ax.hi + 1e-9));
    if (d1 - d0 >= 1) {
      for (int d = d0; d <= d1; ++d)
        out.emplace_back(static_cast<double>(d), num(std::pow(10.0, d), "%g"));
      return out;
    }
    // Less than one decade: fall through to linear ticks on the log scale,
    // labeled with the data-space values.
    const double span = ax.hi - ax.lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double mult : {1.0, 2.0, 5.0, 10.0}) {
      if (mag * mult >= raw) {
        step = mag * mult;
        break;
      }
    }
    for (double t = std::ceil(ax.lo / step) * step; t <= ax.hi + 1e-12; t += step)
      out.emplace_back(t, num(std::pow(10.0, t), "%.3g"));
    return out;
  }
  const double span = ax.hi - ax.lo;
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * mult >= raw) {
      step = mag * mult;
      break;
    }
  }
  for (double t = std::ceil(ax.lo / step) * step; t <= ax.hi + 1e-12; t += step) {
    const double snapped = std::abs(t) < step * 1e-9 ? 0.0 : t;
    out.emplace_back(snapped, num(snapped, "%.6g"));
  }
  return out;
}

}  // namespace

std::string render_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  if (spec.width < 200 || spec.height < 150)
    throw std::invalid_argument("render_plot: canvas too small");
  const double ml = 72, mr = 20, mt = 40, mb = 52;
  const double pw = spec.width - ml - mr;
  const double ph = spec.height - mt - mb;

  const Axis xa = fit_axis(series, true, spec.logx);
  const Axis ya = fit_axis(series, false, spec.logy);
  auto X = [&](double v) { return ml + xa.place(v) * pw; };
  auto Y = [&](double v) { return mt + (1.0 - ya.place(v)) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) +
         "\" height=\"" + std::to_string(spec.height) + "\" viewBox=\"0 0 " +
         std::to_string(spec.width) + " " + std::to_string(spec.height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg += "<g font-family=\"Helvetica,Arial,sans-serif\" font-size=\"12\" fill=\"#202020\">\n";

  // grid + ticks
  for (const auto& [t, label] : ticks_for(xa)) {
    const double px = ml + (t - xa.lo) / (xa.hi - xa.lo) * pw;
    svg += "<line x1=\"" + num(px) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(px) + "\" y2=\"" +
           num(mt + ph) + "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + num(px) + "\" y=\"" + num(mt + ph + 18) +
           "\" text-anchor=\"middle\">" + esc(label) + "</text>\n";
  }
  for (const auto& [t, label] : ticks_for(ya)) {
    const double py = mt + (1.0 - (t - ya.lo) / (ya.hi - ya.lo)) * ph;
    svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(py) + "\" x2=\"" + num(ml + pw) +
           "\" y2=\"" + num(py) + "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + num(ml - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" +
           esc(label) + "</text>\n";
  }

  // series
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    std::string points;
    auto flush = [&]() {
      if (points.empty()) return;
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.8\" points=\"" + points + "\"/>\n";
      points.clear();
    };
    const std::size_t len = std::min(series[s].x.size(), series[s].y.size());
    for (std::size_t i = 0; i < len; ++i) {
      const double vx = series[s].x[i], vy = series[s].y[i];
      if (!xa.valid(vx) || !ya.valid(vy)) {
        flush();
        continue;
      }
      if (!points.empty()) points += " ";
      points += num(X(vx)) + "," + num(Y(vy));
    }
    flush();
    // point markers help when a series has few samples
    for (std::size_t i = 0; i < len; ++i) {
      const double vx = series[s].x[i], vy = series[s].y[i];
      if (!xa.valid(vx) || !ya.valid(vy)) continue;
      svg += "<circle cx=\"" + num(X(vx)) + "\" cy=\"" + num(Y(vy)) + "\" r=\"2.4\" fill=\"" +
             std::string(color) + "\"/>\n";
    }
  }

  // frame
  svg += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(pw) +
         "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#404040\" stroke-width=\"1\"/>\n";

  // labels
  svg += "<text x=\"" + num(ml + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         esc(spec.title) + "</text>\n";
  svg += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(spec.height - 12.0) +
         "\" text-anchor=\"middle\">" + esc(spec.xlabel) + "</text>\n";
  svg += "<text x=\"18\" y=\"" + num(mt + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         num(mt + ph / 2) + ")\">" + esc(spec.ylabel) + "</text>\n";

  // legend, top-right inside the frame
  if (!series.empty()) {
    double maxlen = 0;
    for (const PlotSeries& s : series) maxlen = std::max(maxlen, static_cast<double>(s.label.size()));
    const double lw = 40 + maxlen * 7.2;
    const double lh = 8.0 + 16.0 * series.size();
    const double lx = ml + pw - lw - 8, ly = mt + 8;
    svg += "<rect x=\"" + num(lx) + "\" y=\"" + num(ly) + "\" width=\"" + num(lw) +
           "\" height=\"" + num(lh) +
           "\" fill=\"#ffffff\" fill-opacity=\"0.85\" stroke=\"#b0b0b0\"/>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double ry = ly + 16.0 * (s + 1) - 4;
      svg += "<line x1=\"" + num(lx + 6) + "\" y1=\"" + num(ry - 4) + "\" x2=\"" + num(lx + 26) +
             "\" y2=\"" + num(ry - 4) + "\" stroke=\"" + std::string(kPalette[s % kPaletteSize]) +
             "\" stroke-width=\"2.5\"/>\n";
      svg += "<text x=\"" + num(lx + 32) + "\" y=\"" + num(ry) + "\">" + esc(series[s].label) +
             "</text>\n";
    }
  }

  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace eoslab
