#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace mdsam {

// Minimal SVG line-chart writer for the PR and F-measure curve figures.
// One polyline per method, fixed palette, legend labeled by method name.

struct CurveSeries {
  std::string label;
  std::vector<double> x, y;
};

inline void write_svg_chart(const std::string& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            double x_min, double x_max, const std::vector<CurveSeries>& series) {
  static const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  constexpr int W = 640, H = 480;
  constexpr int ML = 70, MR = 20, MT = 40, MB = 55;
  const double plot_w = W - ML - MR, plot_h = H - MT - MB;
  const double y_min = 0.0, y_max = 1.0;
  auto sx = [&](double x) { return ML + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) { return MT + (y_max - y) / (y_max - y_min) * plot_h; };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write plot: " + path);
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
      << "</text>\n";
  // axes + ticks
  out << "<g stroke=\"#333\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << ML << "\" y1=\"" << MT + plot_h << "\" x2=\"" << ML + plot_w << "\" y2=\""
      << MT + plot_h << "\"/>\n";
  out << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << MT + plot_h
      << "\"/>\n";
  out << "</g>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = x_min + (x_max - x_min) * i / 5.0;
    const double fy = y_min + (y_max - y_min) * i / 5.0;
    out << "<text x=\"" << sx(fx) << "\" y=\"" << MT + plot_h + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fx << "</text>\n";
    out << "<text x=\"" << ML - 8 << "\" y=\"" << sy(fy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fy << "</text>\n";
    out << "<line x1=\"" << ML << "\" y1=\"" << sy(fy) << "\" x2=\"" << ML + plot_w << "\" y2=\""
        << sy(fy) << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
  }
  out << "<text x=\"" << ML + plot_w / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << MT + plot_h / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << MT + plot_h / 2 << ")\">" << y_label << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    out << std::setprecision(2);
    for (size_t i = 0; i < s.x.size(); ++i) {
      out << sx(s.x[i]) << "," << sy(std::min(1.0, std::max(0.0, s.y[i]))) << " ";
    }
    out << "\"/>\n";
    const double ly = MT + 16 + 16 * static_cast<double>(si);
    out << "<line x1=\"" << ML + plot_w - 150 << "\" y1=\"" << ly << "\" x2=\""
        << ML + plot_w - 126 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ML + plot_w - 120 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
        << s.label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace mdsam
