#include "coag/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace coag {

namespace {

constexpr double kWidth = 640.0, kHeight = 440.0;
constexpr double kLeft = 72.0, kRight = 24.0, kTop = 24.0, kBottom = 56.0;

const char* kPalette[] = {"#1f6fb4", "#c23b22", "#2c8a4b", "#7b4fa6", "#b8860b", "#3a3a3a"};

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(int decade) {
  char buf[32];
  if (decade >= -3 && decade <= 3)
    std::snprintf(buf, sizeof buf, "%g", std::pow(10.0, decade));
  else
    std::snprintf(buf, sizeof buf, "1e%d", decade);
  return buf;
}

}  // namespace

std::string svg_loglog(const std::vector<PlotSeries>& series, const std::string& x_label,
                       const std::string& y_label) {
  double lx0 = std::numeric_limits<double>::infinity(), lx1 = -lx0;
  double ly0 = lx0, ly1 = -lx0;
  for (const PlotSeries& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
      lx0 = std::min(lx0, std::log10(s.x[i]));
      lx1 = std::max(lx1, std::log10(s.x[i]));
      ly0 = std::min(ly0, std::log10(s.y[i]));
      ly1 = std::max(ly1, std::log10(s.y[i]));
    }
  }

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (!(lx0 <= lx1) || !(ly0 <= ly1)) {
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\">no positive data</text>\n"
        << "</svg>\n";
    return svg.str();
  }

  // breathe a little; degenerate ranges become one decade
  if (lx1 - lx0 < 1e-9) {
    lx0 -= 0.5;
    lx1 += 0.5;
  }
  if (ly1 - ly0 < 1e-9) {
    ly0 -= 0.5;
    ly1 += 0.5;
  }
  const double padx = 0.04 * (lx1 - lx0), pady = 0.06 * (ly1 - ly0);
  lx0 -= padx;
  lx1 += padx;
  ly0 -= pady;
  ly1 += pady;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto px = [&](double lx) { return kLeft + (lx - lx0) / (lx1 - lx0) * pw; };
  const auto py = [&](double ly) { return kTop + (ly1 - ly) / (ly1 - ly0) * ph; };

  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\""
      << ph << "\" fill=\"none\" stroke=\"#444\"/>\n";

  for (int d = static_cast<int>(std::ceil(lx0)); d <= static_cast<int>(std::floor(lx1)); ++d) {
    const double x = px(d);
    svg << "<line x1=\"" << num(x) << "\" y1=\"" << kTop << "\" x2=\"" << num(x) << "\" y2=\""
        << kTop + ph << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << num(x) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << tick_label(d) << "</text>\n";
  }
  for (int d = static_cast<int>(std::ceil(ly0)); d <= static_cast<int>(std::floor(ly1)); ++d) {
    const double y = py(d);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << num(y) << "\" x2=\"" << kLeft + pw
        << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
        << tick_label(d) << "</text>\n";
  }

  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << escape(x_label) << "</text>\n"
      << "<text x=\"16\" y=\"" << kTop + ph / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 16 "
      << kTop + ph / 2 << ")\">" << escape(y_label) << "</text>\n";

  std::size_t color = 0;
  double legend_y = kTop + 16;
  for (const PlotSeries& s : series) {
    const char* c = kPalette[color % (sizeof kPalette / sizeof *kPalette)];
    ++color;
    if (s.line) {
      std::ostringstream pts;
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
        pts << num(px(std::log10(s.x[i]))) << "," << num(py(std::log10(s.y[i]))) << " ";
      }
      svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << c
          << "\" stroke-width=\"1.5\"/>\n";
    }
    if (s.marks) {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
        svg << "<circle cx=\"" << num(px(std::log10(s.x[i]))) << "\" cy=\""
            << num(py(std::log10(s.y[i]))) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
      }
    }
    if (!s.label.empty()) {
      svg << "<line x1=\"" << kLeft + pw - 150 << "\" y1=\"" << num(legend_y - 4)
          << "\" x2=\"" << kLeft + pw - 130 << "\" y2=\"" << num(legend_y - 4)
          << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n"
          << "<text x=\"" << kLeft + pw - 124 << "\" y=\"" << num(legend_y)
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s.label)
          << "</text>\n";
      legend_y += 16;
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace coag
