#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

enum class Style { Scatter, Line };

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  Style style = Style::Line;
  std::vector<Series> series;
};

inline std::string escape(const std::string &s) {
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

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// Roughly five round tick positions covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t == 0.0 ? 0.0 : t);
  return out;
}

inline const char *color(std::size_t i) {
  static const char *palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return palette[i % 8];
}

inline std::string render(const Chart &chart) {
  const double width = 640, height = 440, left = 70, right = 160, top = 40, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto &s : chart.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  if (!(xlo <= xhi)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  if (xhi - xlo < 1e-12) xlo -= 0.5, xhi += 0.5;
  if (yhi - ylo < 1e-12) ylo -= 0.5, yhi += 0.5;
  const double xpad = 0.04 * (xhi - xlo), ypad = 0.04 * (yhi - ylo);
  xlo -= xpad, xhi += xpad, ylo -= ypad, yhi += ypad;
  auto sx = [&](double v) { return left + (v - xlo) / (xhi - xlo) * pw; };
  auto sy = [&](double v) { return top + ph - (v - ylo) / (yhi - ylo) * ph; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(chart.title) + "</text>\n";
  out += "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) + "\"/>\n";
  out += "</g>\n<g class=\"ticks\">\n";
  for (double t : ticks(xlo, xhi)) {
    out += "<line x1=\"" + num(sx(t)) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(sx(t)) + "\" y2=\"" +
           num(top + ph + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(sx(t)) + "\" y=\"" + num(top + ph + 18) + "\" text-anchor=\"middle\">" +
           tick_label(t) + "</text>\n";
  }
  for (double t : ticks(ylo, yhi)) {
    out += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(sy(t)) + "\" x2=\"" + num(left) + "\" y2=\"" +
           num(sy(t)) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(left - 8) + "\" y=\"" + num(sy(t) + 4) + "\" text-anchor=\"end\">" + tick_label(t) +
           "</text>\n";
  }
  out += "</g>\n";
  out += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(height - 18) + "\" text-anchor=\"middle\">" +
         escape(chart.x_label) + "</text>\n";
  out += "<text x=\"18\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         num(top + ph / 2) + ")\">" + escape(chart.y_label) + "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto &s = chart.series[k];
    out += "<g class=\"series\" fill=\"" + std::string(color(k)) + "\" stroke=\"" + color(k) + "\">\n";
    if (chart.style == Style::Line) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) pts += num(sx(s.x[i])) + "," + num(sy(s.y[i])) + " ";
      out += "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    }
    const double r = chart.style == Style::Scatter ? 2.0 : 2.5;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
        out += "<circle cx=\"" + num(sx(s.x[i])) + "\" cy=\"" + num(sy(s.y[i])) + "\" r=\"" + num(r) +
               "\" stroke=\"none\"/>\n";
    out += "</g>\n";
  }

  out += "<g class=\"legend\">\n";
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const double y = top + 10 + 18.0 * static_cast<double>(k);
    out += "<rect x=\"" + num(left + pw + 15) + "\" y=\"" + num(y - 9) + "\" width=\"12\" height=\"12\" fill=\"" +
           color(k) + "\"/>\n";
    out += "<text x=\"" + num(left + pw + 32) + "\" y=\"" + num(y + 1) + "\">" + escape(chart.series[k].name) +
           "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

} // namespace svg
