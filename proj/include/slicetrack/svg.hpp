#pragma once

#include <string>
#include <vector>

namespace slicetrack {

// Minimal SVG line/box plotting, text-assertable output (plain <path> data).
class SvgPlot {
 public:
  SvgPlot(int width, int height, std::string title, std::string xlabel, std::string ylabel);

  void add_line(const std::vector<double>& x, const std::vector<double>& y,
                const std::string& color, const std::string& label, bool dashed = false);
  // Box glyph at slot x: [lo, q1, median, q3, hi].
  void add_box(double x, double lo, double q1, double median, double q3, double hi,
               const std::string& color, const std::string& label);

  std::string render() const;

 private:
  struct Line {
    std::vector<double> x, y;
    std::string color, label;
    bool dashed;
  };
  struct Box {
    double x, lo, q1, median, q3, hi;
    std::string color, label;
  };
  int width_, height_;
  std::string title_, xlabel_, ylabel_;
  std::vector<Line> lines_;
  std::vector<Box> boxes_;
};

}  // namespace slicetrack
