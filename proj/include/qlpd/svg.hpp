#ifndef QLPD_SVG_HPP
#define QLPD_SVG_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "qlpd/io.hpp"

namespace qlpd::svg {

namespace detail {

// Compact viridis-style ramp; linear interpolation between anchors.
inline std::string ramp_color(double t) {
  static constexpr double anchors[5][3] = {{68, 1, 84},      // deep violet
                                           {59, 82, 139},    // blue
                                           {33, 145, 140},   // teal
                                           {94, 201, 98},    // green
                                           {253, 231, 37}};  // yellow
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * 4.0;
  const int lo = std::min(3, static_cast<int>(pos));
  const double f = pos - lo;
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                static_cast<int>(std::lround(anchors[lo][0] + f * (anchors[lo + 1][0] - anchors[lo][0]))),
                static_cast<int>(std::lround(anchors[lo][1] + f * (anchors[lo + 1][1] - anchors[lo][1]))),
                static_cast<int>(std::lround(anchors[lo][2] + f * (anchors[lo + 1][2] - anchors[lo][2]))));
  return std::string(buf);
}

inline std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out.push_back(c);
  }
  return out;
}

}  // namespace detail

// Self-contained heatmap. values[row][col]; row 0 is drawn at the bottom.
// The color scale endpoints are the data min and max.
inline std::string heatmap(const std::vector<std::vector<double>>& values,
                           const std::string& x_label, const std::string& y_label,
                           const std::string& title, double x_lo = 0.0, double x_hi = 1.0,
                           double y_lo = 0.0, double y_hi = 1.0) {
  const int ny = static_cast<int>(values.size());
  const int nx = ny > 0 ? static_cast<int>(values[0].size()) : 0;
  double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
  for (const auto& row : values)
    for (double v : row) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  if (!(vmax > vmin)) vmax = vmin + 1.0;
  const int cell = 24, mleft = 70, mbottom = 50, mtop = 40, mright = 90;
  const int w = mleft + nx * cell + mright, h = mtop + ny * cell + mbottom;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"monospace\" font-size=\"12\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << mleft << "\" y=\"20\">" << detail::esc(title) << "</text>\n";
  for (int r = 0; r < ny; ++r) {
    for (int c = 0; c < nx; ++c) {
      const double t = (values[r][c] - vmin) / (vmax - vmin);
      const int x = mleft + c * cell;
      const int y = mtop + (ny - 1 - r) * cell;
      out << "<rect class=\"cell\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << detail::ramp_color(t) << "\"/>\n";
    }
  }
  // color-scale legend with data endpoints
  const int lx = mleft + nx * cell + 20;
  for (int i = 0; i < 64; ++i) {
    const double t = 1.0 - static_cast<double>(i) / 63.0;
    out << "<rect x=\"" << lx << "\" y=\"" << (mtop + i * (ny * cell) / 64) << "\" width=\"14\" height=\""
        << (ny * cell) / 64 + 1 << "\" fill=\"" << detail::ramp_color(t) << "\"/>\n";
  }
  out << "<text x=\"" << lx + 18 << "\" y=\"" << mtop + 10 << "\">" << io::fmt(vmax) << "</text>\n";
  out << "<text x=\"" << lx + 18 << "\" y=\"" << mtop + ny * cell << "\">" << io::fmt(vmin)
      << "</text>\n";
  // axes
  out << "<text x=\"" << mleft + nx * cell / 2 << "\" y=\"" << h - 12 << "\">"
      << detail::esc(x_label) << "</text>\n";
  out << "<text x=\"12\" y=\"" << mtop + ny * cell / 2
      << "\" transform=\"rotate(-90 12 " << mtop + ny * cell / 2 << ")\">" << detail::esc(y_label)
      << "</text>\n";
  out << "<text x=\"" << mleft << "\" y=\"" << h - 30 << "\">" << io::fmt(x_lo) << "</text>\n";
  out << "<text x=\"" << mleft + nx * cell - 30 << "\" y=\"" << h - 30 << "\">" << io::fmt(x_hi)
      << "</text>\n";
  out << "<text x=\"" << mleft - 55 << "\" y=\"" << mtop + ny * cell << "\">" << io::fmt(y_lo)
      << "</text>\n";
  out << "<text x=\"" << mleft - 55 << "\" y=\"" << mtop + 12 << "\">" << io::fmt(y_hi)
      << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

// Simple polyline plot of one or more series over a shared x axis.
inline std::string curve(const std::vector<double>& xs,
                         const std::vector<std::vector<double>>& series,
                         const std::vector<std::string>& names, const std::string& title) {
  static constexpr const char* palette[4] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  const int w = 640, h = 420, ml = 60, mr = 20, mt = 40, mb = 40;
  double xmin = xs.empty() ? 0 : xs.front(), xmax = xs.empty() ? 1 : xs.back();
  if (!(xmax > xmin)) xmax = xmin + 1;
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& s : series)
    for (double v : s) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (!(ymax > ymin)) ymax = ymin + 1;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"monospace\" font-size=\"12\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << ml << "\" y=\"20\">" << detail::esc(title) << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    out << "<polyline fill=\"none\" stroke=\"" << palette[s % 4] << "\" points=\"";
    for (std::size_t i = 0; i < xs.size() && i < series[s].size(); ++i)
      out << io::fmt(px(xs[i])) << ',' << io::fmt(py(series[s][i])) << ' ';
    out << "\"/>\n";
    if (s < names.size())
      out << "<text x=\"" << w - mr - 120 << "\" y=\"" << mt + 16 * (s + 1) << "\" fill=\""
          << palette[s % 4] << "\">" << detail::esc(names[s]) << "</text>\n";
  }
  out << "<text x=\"" << ml - 50 << "\" y=\"" << h - mb << "\">" << io::fmt(ymin) << "</text>\n";
  out << "<text x=\"" << ml - 50 << "\" y=\"" << mt + 10 << "\">" << io::fmt(ymax) << "</text>\n";
  out << "<text x=\"" << ml << "\" y=\"" << h - mb + 16 << "\">" << io::fmt(xmin) << "</text>\n";
  out << "<text x=\"" << w - mr - 40 << "\" y=\"" << h - mb + 16 << "\">" << io::fmt(xmax)
      << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace qlpd::svg

#endif  // QLPD_SVG_HPP
