#include "hda/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace hda::svg {

namespace {

constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
  double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2f", v);
  return b;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

void widen(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

std::string header(const std::string& title, const Frame& f, const std::string& xl, const std::string& yl) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title) << "</text>\n";
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kW - kLeft - kRight << "\" height=\""
     << kH - kTop - kBottom << "\" fill=\"none\" stroke=\"#444\"/>\n";
  os << "<text x=\"" << kLeft << "\" y=\"" << kH - kBottom + 15 << "\">" << num(f.x0) << "</text>\n";
  os << "<text x=\"" << kW - kRight << "\" y=\"" << kH - kBottom + 15 << "\" text-anchor=\"end\">" << num(f.x1) << "</text>\n";
  os << "<text x=\"" << kLeft - 4 << "\" y=\"" << kH - kBottom << "\" text-anchor=\"end\">" << num(f.y0) << "</text>\n";
  os << "<text x=\"" << kLeft - 4 << "\" y=\"" << kTop + 8 << "\" text-anchor=\"end\">" << num(f.y1) << "</text>\n";
  os << "<text x=\"" << (kW - kRight + kLeft) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << escape(xl) << "</text>\n";
  if (!yl.empty())
    os << "<text x=\"14\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 14 " << kH / 2 << ")\" text-anchor=\"middle\">"
       << escape(yl) << "</text>\n";
  return os.str();
}

std::string legend(const std::vector<Series>& series) {
  std::ostringstream os;
  double y = kTop + 10;
  for (const auto& s : series) {
    os << "<rect x=\"" << kW - kRight + 10 << "\" y=\"" << y - 8 << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>";
    os << "<text x=\"" << kW - kRight + 25 << "\" y=\"" << y << "\">" << escape(s.name) << "</text>\n";
    y += 16;
  }
  return os.str();
}

}  // namespace

std::string line_plot(const std::string& title, const std::vector<Series>& series, const std::string& x_label) {
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  std::size_t n = 1;
  for (const auto& s : series) {
    n = std::max(n, s.y.size());
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  widen(y0, y1);
  const Frame f{0.0, static_cast<double>(std::max<std::size_t>(n - 1, 1)), y0, y1};
  std::ostringstream os;
  os << header(title, f, x_label, "");
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
    if (s.dashed) os << " stroke-dasharray=\"5,3\"";
    os << " points=\"";
    for (std::size_t i = 0; i < s.y.size(); ++i) os << num(f.px(static_cast<double>(i))) << ',' << num(f.py(s.y[i])) << ' ';
    os << "\"/>\n";
  }
  os << legend(series) << "</svg>\n";
  return os.str();
}

std::string scatter_plot(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                         const std::string& y_label) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.y.size() && i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]), y1 = std::max(y1, s.y[i]);
    }
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1};
  std::ostringstream os;
  os << header(title, f, x_label, y_label);
  for (const auto& s : series) {
    os << "<g fill=\"" << s.color << "\" fill-opacity=\"0.6\">";
    for (std::size_t i = 0; i < s.y.size() && i < s.x.size(); ++i)
      os << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(s.y[i])) << "\" r=\"2.5\"/>";
    os << "</g>\n";
  }
  os << legend(series) << "</svg>\n";
  return os.str();
}

}  // namespace hda::svg
