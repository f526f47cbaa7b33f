#pragma once

#include <string>
#include <vector>

#include "harmony/data/image.hpp"
#include "harmony/transfer/evaluate.hpp"

namespace harmony {

// Bar chart of a probability histogram as a standalone SVG document. Each
// bar carries data-count="<count>".
std::string histogram_svg(const Histogram& histogram, const std::string& title, int width = 240,
                          int height = 180);

struct PanelSpec {
  std::string title;
  Histogram histogram;
};

// Panels laid out in rows of `columns` inside one SVG.
std::string histogram_grid_svg(const std::vector<PanelSpec>& panels, int columns);

// Input, map (grey) and features side by side, each upscaled by `scale`.
ImageTensor triptych(const ImageTensor& input, const std::vector<float>& map, const ImageTensor& features,
                     int scale = 8);

}  // namespace harmony
