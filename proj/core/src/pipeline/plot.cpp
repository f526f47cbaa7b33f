#include "harmony/pipeline/plot.hpp"

#include <algorithm>

#include "../file_util.hpp"
#include "harmony/error.hpp"

namespace harmony {

namespace {

using detail::format_double;

std::string escape_xml(const std::string& s) {
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

std::string num(double v) { return format_double("%.2f", v); }

// Panel contents in a width×height box at the origin.
std::string panel_body(const Histogram& h, const std::string& title, int width, int height) {
  if (h.bins() < 1) throw ParameterError("cannot plot an empty histogram");
  const double left = 30, right = 8, top = 22, bottom = 22;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const std::size_t peak = std::max<std::size_t>(1, *std::max_element(h.counts.begin(), h.counts.end()));
  const double bar_w = plot_w / h.bins();

  std::string s;
  s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
       "\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(width / 2.0) + "\" y=\"15\" font-size=\"12\" text-anchor=\"middle\">" +
       escape_xml(title) + "</text>\n";
  for (int i = 0; i < h.bins(); ++i) {
    const std::size_t count = h.counts[static_cast<std::size_t>(i)];
    const double bh = plot_h * static_cast<double>(count) / static_cast<double>(peak);
    s += "<rect class=\"bar\" data-bin=\"" + std::to_string(i) + "\" data-count=\"" + std::to_string(count) +
         "\" x=\"" + num(left + i * bar_w + 0.5) + "\" y=\"" + num(top + plot_h - bh) + "\" width=\"" +
         num(std::max(0.0, bar_w - 1.0)) + "\" height=\"" + num(bh) + "\" fill=\"#4a78b0\"/>\n";
  }
  s += "<line x1=\"" + num(left) + "\" y1=\"" + num(top + plot_h) + "\" x2=\"" + num(left + plot_w) +
       "\" y2=\"" + num(top + plot_h) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" +
       num(top + plot_h) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + num(left) + "\" y=\"" + num(height - 6.0) + "\" font-size=\"10\">0</text>\n";
  s += "<text x=\"" + num(left + plot_w) + "\" y=\"" + num(height - 6.0) +
       "\" font-size=\"10\" text-anchor=\"end\">1</text>\n";
  s += "<text x=\"" + num(left - 4) + "\" y=\"" + num(top + 8) + "\" font-size=\"10\" text-anchor=\"end\">" +
       std::to_string(peak) + "</text>\n";
  return s;
}

std::string svg_open(int width, int height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
         "\">\n";
}

}  // namespace

std::string histogram_svg(const Histogram& histogram, const std::string& title, int width, int height) {
  return svg_open(width, height) + panel_body(histogram, title, width, height) + "</svg>\n";
}

std::string histogram_grid_svg(const std::vector<PanelSpec>& panels, int columns) {
  if (panels.empty()) throw ParameterError("no panels to lay out");
  if (columns < 1) throw ParameterError("grid needs at least one column");
  const int w = 240, h = 180;
  const int rows = (static_cast<int>(panels.size()) + columns - 1) / columns;
  const int cols = std::min<int>(columns, static_cast<int>(panels.size()));
  std::string s = svg_open(cols * w, rows * h);
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const int r = static_cast<int>(i) / columns, c = static_cast<int>(i) % columns;
    s += "<g transform=\"translate(" + std::to_string(c * w) + "," + std::to_string(r * h) + ")\">\n";
    s += panel_body(panels[i].histogram, panels[i].title, w, h);
    s += "</g>\n";
  }
  return s + "</svg>\n";
}

ImageTensor triptych(const ImageTensor& input, const std::vector<float>& map, const ImageTensor& features,
                     int scale) {
  if (!input.same_shape(features) || map.size() != input.plane_size()) {
    throw ParameterError("triptych parts differ in shape");
  }
  if (scale < 1) throw ParameterError("triptych scale must be positive");
  const int h = input.height(), w = input.width(), gap = 2;
  const int out_h = h * scale, out_w = 3 * w * scale + 2 * gap;
  ImageTensor out(3, out_h, out_w, 1.0);
  auto pixel = [&](int part, int c, int y, int x) -> double {
    if (part == 1) return map[static_cast<std::size_t>(y) * w + x];
    const ImageTensor& src = part == 0 ? input : features;
    return src.at(src.channels() == 1 ? 0 : c, y, x);
  };
  for (int part = 0; part < 3; ++part) {
    const int x0 = part * (w * scale + gap);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < w * scale; ++x) out.at(c, y, x0 + x) = pixel(part, c, y / scale, x / scale);
      }
    }
  }
  return out;
}

}  // namespace harmony
