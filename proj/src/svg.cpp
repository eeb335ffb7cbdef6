#include "sacr2/svg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sacr2 {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(Scalar v) {
  std::ostringstream o;
  o.precision(2);
  o << std::fixed << v;
  return o.str();
}

std::string escape_xml(const std::string& s) {
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

}  // namespace

void write_svg_plot(const std::vector<PlotCurve>& curves, const std::string& x_label,
                    const std::string& y_label, const std::string& path) {
  if (curves.empty()) throw ContractViolation("write_svg_plot: empty curve list");
  size_t n = curves.front().mean.size();
  for (const PlotCurve& c : curves) n = std::min(n, c.mean.size());
  if (n == 0) throw ContractViolation("write_svg_plot: curves have no points");

  const Scalar width = 760, height = 480;
  const Scalar ml = 70, mr = 20, mt = 20, mb = 55;  // margins
  const Scalar pw = width - ml - mr, ph = height - mt - mb;

  Scalar y_min = 0, y_max = 0;
  for (const PlotCurve& c : curves)
    for (size_t i = 0; i < n; ++i) {
      const Scalar band = i < c.band.size() ? c.band[i] : 0;
      y_min = std::min(y_min, c.mean[i] - band);
      y_max = std::max(y_max, c.mean[i] + band);
    }
  if (y_max - y_min < 1e-9) y_max = y_min + 1;
  const Scalar x_max = Scalar(n - 1 == 0 ? 1 : n - 1);

  auto px = [&](Scalar x) { return ml + pw * (x / x_max); };
  auto py = [&](Scalar y) { return mt + ph * (1 - (y - y_min) / (y_max - y_min)); };

  std::ofstream out(path);
  if (!out) throw IoError("write_svg_plot: cannot open " + path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
      << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  // axes with 5 ticks each
  out << "<g stroke=\"#333\" stroke-width=\"1\">\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << mt + ph << "\"/>\n</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">\n";
  for (int t = 0; t <= 5; ++t) {
    const Scalar fx = x_max * t / 5, fy = y_min + (y_max - y_min) * t / 5;
    out << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\">" << fmt(fx) << "</text>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\">" << fmt(fy) << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">" << escape_xml(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\">" << escape_xml(y_label) << "</text>\n</g>\n";

  for (size_t c = 0; c < curves.size(); ++c) {
    const PlotCurve& curve = curves[c];
    const char* color = kPalette[c % (sizeof(kPalette) / sizeof(kPalette[0]))];
    if (!curve.band.empty()) {
      std::ostringstream band;
      for (size_t i = 0; i < n; ++i)
        band << (i ? " " : "") << fmt(px(Scalar(i))) << ","
             << fmt(py(curve.mean[i] + curve.band[i]));
      for (size_t i = n; i-- > 0;)
        band << " " << fmt(px(Scalar(i))) << ","
             << fmt(py(curve.mean[i] - curve.band[i]));
      out << "<polygon points=\"" << band.str() << "\" fill=\"" << color
          << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    std::ostringstream lineout;
    for (size_t i = 0; i < n; ++i)
      lineout << (i ? " " : "") << fmt(px(Scalar(i))) << "," << fmt(py(curve.mean[i]));
    out << "<polyline points=\"" << lineout.str() << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"1.8\"/>\n";
  }

  // legend, top-left corner of the plot area
  out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (size_t c = 0; c < curves.size(); ++c) {
    const char* color = kPalette[c % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const Scalar ly = mt + 16 + Scalar(c) * 18;
    out << "<line x1=\"" << ml + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + 34
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + 40 << "\" y=\"" << ly << "\" fill=\"#333\">"
        << escape_xml(curves[c].label) << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  if (!out) throw IoError("write_svg_plot: write failed for " + path);
}

}  // namespace sacr2
