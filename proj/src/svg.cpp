#include "slicetrack/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace slicetrack {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

}  // namespace

SvgPlot::SvgPlot(int width, int height, std::string title, std::string xlabel,
                 std::string ylabel)
    : width_(width), height_(height), title_(std::move(title)), xlabel_(std::move(xlabel)),
      ylabel_(std::move(ylabel)) {}

void SvgPlot::add_line(const std::vector<double>& x, const std::vector<double>& y,
                       const std::string& color, const std::string& label, bool dashed) {
  lines_.push_back(Line{x, y, color, label, dashed});
}

void SvgPlot::add_box(double x, double lo, double q1, double median, double q3, double hi,
                      const std::string& color, const std::string& label) {
  boxes_.push_back(Box{x, lo, q1, median, q3, hi, color, label});
}

std::string SvgPlot::render() const {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const Line& l : lines_)
    for (std::size_t i = 0; i < l.x.size(); ++i) {
      xmin = std::min(xmin, l.x[i]);
      xmax = std::max(xmax, l.x[i]);
      ymin = std::min(ymin, l.y[i]);
      ymax = std::max(ymax, l.y[i]);
    }
  for (const Box& b : boxes_) {
    xmin = std::min(xmin, b.x - 1.0);
    xmax = std::max(xmax, b.x + 1.0);
    ymin = std::min(ymin, b.lo);
    ymax = std::max(ymax, b.hi);
  }
  if (!std::isfinite(xmin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;

  const double ml = 60, mr = 20, mt = 34, mb = 44;
  const double pw = width_ - ml - mr, ph = height_ - mt - mb;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width_) +
         "\" height=\"" + std::to_string(height_) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(width_ / 2.0) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title_) + "</text>\n";
  // Axes.
  svg += "<path stroke=\"black\" fill=\"none\" d=\"M " + num(ml) + " " + num(mt) + " L " +
         num(ml) + " " + num(mt + ph) + " L " + num(ml + pw) + " " + num(mt + ph) + "\"/>\n";
  svg += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(height_ - 8.0) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + escape(xlabel_) + "</text>\n";
  svg += "<text x=\"14\" y=\"" + num(mt + ph / 2) +
         "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 14 " +
         num(mt + ph / 2) + ")\">" + escape(ylabel_) + "</text>\n";
  // Range labels.
  svg += "<text x=\"" + num(ml - 4) + "\" y=\"" + num(mt + ph) +
         "\" text-anchor=\"end\" font-size=\"10\">" + num(ymin) + "</text>\n";
  svg += "<text x=\"" + num(ml - 4) + "\" y=\"" + num(mt + 10.0) +
         "\" text-anchor=\"end\" font-size=\"10\">" + num(ymax) + "</text>\n";
  svg += "<text x=\"" + num(ml) + "\" y=\"" + num(mt + ph + 14) +
         "\" text-anchor=\"middle\" font-size=\"10\">" + num(xmin) + "</text>\n";
  svg += "<text x=\"" + num(ml + pw) + "\" y=\"" + num(mt + ph + 14) +
         "\" text-anchor=\"middle\" font-size=\"10\">" + num(xmax) + "</text>\n";

  int legend_row = 0;
  auto legend = [&](const std::string& color, const std::string& label, bool dashed) {
    if (label.empty()) return;
    const double lx = ml + pw - 150, ly = mt + 12 + 14 * legend_row++;
    svg += "<path stroke=\"" + color + "\" fill=\"none\"" +
           (dashed ? std::string(" stroke-dasharray=\"5,3\"") : std::string()) + " d=\"M " +
           num(lx) + " " + num(ly - 4) + " L " + num(lx + 24) + " " + num(ly - 4) + "\"/>\n";
    svg += "<text x=\"" + num(lx + 30) + "\" y=\"" + num(ly) + "\" font-size=\"10\">" +
           escape(label) + "</text>\n";
  };

  for (const Line& l : lines_) {
    if (l.x.empty()) continue;
    std::string d = "M " + num(sx(l.x[0])) + " " + num(sy(l.y[0]));
    for (std::size_t i = 1; i < l.x.size(); ++i)
      d += " L " + num(sx(l.x[i])) + " " + num(sy(l.y[i]));
    svg += "<path stroke=\"" + l.color + "\" fill=\"none\"" +
           (l.dashed ? std::string(" stroke-dasharray=\"5,3\"") : std::string()) + " d=\"" + d +
           "\"/>\n";
    legend(l.color, l.label, l.dashed);
  }

  for (const Box& b : boxes_) {
    const double half = 0.3;
    const double x0 = sx(b.x - half), x1 = sx(b.x + half), xc = sx(b.x);
    svg += "<rect x=\"" + num(x0) + "\" y=\"" + num(sy(b.q3)) + "\" width=\"" + num(x1 - x0) +
           "\" height=\"" + num(sy(b.q1) - sy(b.q3)) + "\" stroke=\"" + b.color +
           "\" fill=\"none\"/>\n";
    svg += "<path stroke=\"" + b.color + "\" fill=\"none\" d=\"M " + num(x0) + " " +
           num(sy(b.median)) + " L " + num(x1) + " " + num(sy(b.median)) + "\"/>\n";
    svg += "<path stroke=\"" + b.color + "\" fill=\"none\" d=\"M " + num(xc) + " " +
           num(sy(b.q1)) + " L " + num(xc) + " " + num(sy(b.lo)) + " M " + num(xc) + " " +
           num(sy(b.q3)) + " L " + num(xc) + " " + num(sy(b.hi)) + "\"/>\n";
    svg += "<text x=\"" + num(xc) + "\" y=\"" + num(mt + ph + 28) +
           "\" text-anchor=\"middle\" font-size=\"10\">" + escape(b.label) + "</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace slicetrack
