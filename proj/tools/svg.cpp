#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmtrack/io.hpp"

namespace mmtrack::cli {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 64, kRight = 150, kTop = 40, kBottom = 56;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return fmt(v, 2); }

struct Range {
  double lo, hi;
  double span() const { return hi - lo; }
};

// Pads a degenerate or tight range so every point stays inside the plot.
Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi};
}

class Canvas {
 public:
  explicit Canvas(const std::string& title, double bottom = kBottom) : bottom_(bottom) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    text(kWidth / 2, 22, title, "middle", 14);
  }

  void text(double x, double y, const std::string& s, const char* anchor = "start", int size = 12, int angle = 0) {
    os_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor << "\" font-size=\"" << size
        << "\"";
    if (angle != 0) os_ << " transform=\"rotate(" << angle << " " << num(x) << " " << num(y) << ")\"";
    os_ << ">" << escape(s) << "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke, double w = 1, bool dashed = false) {
    os_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
        << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(w) << "\"";
    if (dashed) os_ << " stroke-dasharray=\"6 4\"";
    os_ << "/>\n";
  }
  void rect(double x, double y, double w, double h, const char* fill) {
    os_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" fill=\"" << fill << "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const char* stroke) {
    os_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os_ << (i ? " " : "") << num(pts[i].first) << "," << num(pts[i].second);
    os_ << "\"/>\n";
  }
  void legend(std::size_t i, const std::string& label, const char* color, bool dashed = false) {
    const double y = kTop + 10 + 18 * static_cast<double>(i);
    line(kWidth - kRight + 12, y, kWidth - kRight + 36, y, color, 2, dashed);
    text(kWidth - kRight + 42, y + 4, label);
  }

  // Axes box with ticks; maps data coordinates into the plot area.
  void axes(Range xr, Range yr, const std::string& x_label, const std::string& y_label, bool x_ticks = true) {
    xr_ = xr;
    yr_ = yr;
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - bottom_, y1 = kTop;
    line(x0, y0, x1, y0, "black");
    line(x0, y0, x0, y1, "black");
    for (int k = 0; k <= 5; ++k) {
      const double fy = yr.lo + yr.span() * k / 5.0;
      line(x0 - 4, py(fy), x0, py(fy), "black");
      text(x0 - 6, py(fy) + 4, fmt(fy, 2), "end");
      if (!x_ticks) continue;
      const double fx = xr.lo + xr.span() * k / 5.0;
      line(px(fx), y0, px(fx), y0 + 4, "black");
      text(px(fx), y0 + 16, fmt(fx, 1), "middle");
    }
    text((x0 + x1) / 2, kHeight - 14, x_label, "middle");
    os_ << "<text x=\"16\" y=\"" << num((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << num((y0 + y1) / 2) << ")\">" << escape(y_label) << "</text>\n";
  }
  double px(double x) const { return kLeft + (x - xr_.lo) / xr_.span() * (kWidth - kRight - kLeft); }
  double py(double y) const { return kHeight - bottom_ - (y - yr_.lo) / yr_.span() * (kHeight - bottom_ - kTop); }

  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  std::ostringstream os_;
  Range xr_{0, 1}, yr_{0, 1};
  double bottom_;
};

}  // namespace

std::string render_line_chart(const LineChart& chart) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : chart.series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series '" + s.label + "' has mismatched x/y lengths");
    for (double v : s.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
    for (double v : s.y) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
  }
  if (chart.reference_y) ylo = std::min(ylo, *chart.reference_y), yhi = std::max(yhi, *chart.reference_y);
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  ylo = std::min(ylo, 0.0);

  Canvas c(chart.title);
  c.axes(padded(xlo, xhi), padded(ylo, yhi * 1.05), chart.x_label, chart.y_label);
  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < s.x.size(); ++k) pts.emplace_back(c.px(s.x[k]), c.py(s.y[k]));
    c.polyline(pts, color);
    c.legend(i, s.label, color);
  }
  if (chart.reference_y) {
    c.line(c.px(xlo), c.py(*chart.reference_y), c.px(xhi), c.py(*chart.reference_y), "red", 1.5, true);
    c.legend(chart.series.size(), chart.reference_label, "red", true);
  }
  return c.finish();
}

std::string render_bar_chart(const BarChart& chart) {
  double yhi = 0, ylo = 0;
  for (const auto& g : chart.groups) {
    if (g.values.size() != chart.series.size()) throw std::invalid_argument("bar group '" + g.label + "' has wrong value count");
    for (double v : g.values) yhi = std::max(yhi, v), ylo = std::min(ylo, v);
  }
  Canvas c(chart.title, 110);
  const double n = static_cast<double>(std::max<std::size_t>(chart.groups.size(), 1));
  c.axes(padded(0, n), padded(ylo, std::max(yhi, 1.0)), "", chart.y_label, false);
  const double slot = c.px(1) - c.px(0);
  const double bar = 0.8 * slot / static_cast<double>(std::max<std::size_t>(chart.series.size(), 1));
  for (std::size_t g = 0; g < chart.groups.size(); ++g) {
    const double left = c.px(static_cast<double>(g)) + 0.1 * slot;
    for (std::size_t s = 0; s < chart.series.size(); ++s) {
      const double v = chart.groups[g].values[s];
      const double top = c.py(std::max(v, 0.0)), bottom = c.py(std::min(v, 0.0));
      c.rect(left + bar * static_cast<double>(s), top, bar * 0.95, bottom - top, kPalette[s % std::size(kPalette)]);
    }
    c.text(left + 0.4 * slot, kHeight - 110 + 14, chart.groups[g].label, "end", 10, -40);
  }
  for (std::size_t s = 0; s < chart.series.size(); ++s) c.legend(s, chart.series[s], kPalette[s % std::size(kPalette)]);
  return c.finish();
}

}  // namespace mmtrack::cli
