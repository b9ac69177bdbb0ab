#include "temple/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "temple/error.hpp"
#include "temple/subprocess.hpp"

namespace temple {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 420;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 40;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

void write_line_chart(const std::filesystem::path& path, const std::string& title,
                      const std::vector<PlotSeries>& series) {
  if (series.empty()) throw InputError("line chart needs at least one series");
  std::size_t max_len = 0;
  double ymin = 0.0, ymax = 0.0;
  bool first = true;
  for (const PlotSeries& s : series) {
    max_len = std::max(max_len, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) throw InputError("line chart values must be finite");
      if (first) {
        ymin = ymax = v;
        first = false;
      } else {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
    }
  }
  if (max_len == 0) throw InputError("line chart series are empty");
  if (ymax == ymin) {
    ymax += 1.0;
    ymin -= 1.0;
  }

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto x_of = [&](std::size_t i, std::size_t n) {
    return kMarginLeft + (n <= 1 ? 0.0 : plot_w * static_cast<double>(i) / static_cast<double>(n - 1));
  };
  auto y_of = [&](double v) { return kMarginTop + plot_h * (1.0 - (v - ymin) / (ymax - ymin)); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">"
      << svg_escape(title) << "</text>\n";

  // axes
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
      << "\" y2=\"" << (kMarginTop + static_cast<int>(plot_h)) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << (kMarginTop + static_cast<int>(plot_h))
      << "\" x2=\"" << (kWidth - kMarginRight) << "\" y2=\"" << (kMarginTop + static_cast<int>(plot_h))
      << "\" stroke=\"black\"/>\n";

  // horizontal gridlines + y labels
  for (int g = 0; g <= 4; ++g) {
    const double v = ymin + (ymax - ymin) * g / 4.0;
    const double y = y_of(v);
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << y << "\" x2=\"" << (kWidth - kMarginRight)
        << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << (kMarginLeft - 6) << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(v)
        << "</text>\n";
  }
  out << "<text x=\"" << (kWidth - kMarginRight) << "\" y=\"" << (kHeight - 10)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">step</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    if (s.values.empty()) continue;
    const char* color = kColors[si % (sizeof(kColors) / sizeof(kColors[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (i) out << ' ';
      out << format_double(x_of(i, s.values.size())) << ',' << format_double(y_of(s.values[i]));
    }
    out << "\"/>\n";
    const int ly = kMarginTop + 14 * static_cast<int>(si);
    out << "<line x1=\"" << (kWidth - kMarginRight - 120) << "\" y1=\"" << ly << "\" x2=\""
        << (kWidth - kMarginRight - 100) << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << (kWidth - kMarginRight - 94) << "\" y=\"" << (ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << svg_escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";

  std::ofstream file(path, std::ios::binary);
  if (!file) throw InputError("cannot open chart file for writing: " + path.string());
  file << out.str();
  if (!file) throw InputError("failed writing chart file: " + path.string());
}

}  // namespace temple
