#include "harmony/data/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "harmony/error.hpp"
#include "harmony/hashing.hpp"

namespace harmony {
namespace {

constexpr int kSupersample = 4;

// Point-in-shape test in shape-local coordinates (dx, dy) for shape radius r.
// Image y grows downwards.
bool inside(int shape, double dx, double dy, double r) {
  const double ax = std::abs(dx);
  const double ay = std::abs(dy);
  switch (shape) {
    case 0:  // disk
      return dx * dx + dy * dy <= r * r;
    case 1:  // square
      return ax <= 0.8 * r && ay <= 0.8 * r;
    case 2: {  // triangle, apex up
      const double top = -r;
      const double bottom = 0.75 * r;
      if (dy < top || dy > bottom) return false;
      const double half = (dy - top) / (bottom - top) * r;
      return ax <= half;
    }
    case 3:  // plus
      return (ax <= 0.3 * r && ay <= r) || (ay <= 0.3 * r && ax <= r);
    case 4: {  // ring
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.3 * r * r;
    }
    case 5:  // diamond
      return ax + ay <= r;
    case 6:  // x
      return ax <= 0.8 * r && ay <= 0.8 * r &&
             (std::abs(dx - dy) <= 0.35 * r || std::abs(dx + dy) <= 0.35 * r);
    case 7: {  // frame
      const double m = std::max(ax, ay);
      return m <= 0.85 * r && m >= 0.5 * r;
    }
    case 8:  // horizontal bar
      return ax <= r && ay <= 0.35 * r;
    case 9:  // vertical bar
      return ax <= 0.35 * r && ay <= r;
    default:
      return false;
  }
}

}  // namespace

const std::vector<std::string>& shape_class_names() {
  static const std::vector<std::string> names = {"disk",    "square", "triangle", "plus",
                                                 "ring",    "diamond", "x",       "frame",
                                                 "hbar",    "vbar"};
  return names;
}

std::string shapes_dataset_tag(int num_classes, int side) {
  return "shapes-c" + std::to_string(num_classes) + "-s" + std::to_string(side);
}

Dataset generate_shapes_dataset(const ShapesParams& params) {
  if (params.num_classes < 2 || params.num_classes > 10) {
    throw ParameterError("num_classes must lie in [2,10]");
  }
  if (params.n < params.num_classes) throw ParameterError("n must be at least num_classes");
  if (params.side < 16) throw ParameterError("side must be at least 16 pixels");

  const int side = params.side;
  const char* prefix = params.split == Split::kAll ? "shape" : to_string(params.split);
  std::vector<LabeledExample> examples;
  examples.reserve(static_cast<std::size_t>(params.n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int i = 0; i < params.n; ++i) {
    std::mt19937_64 rng(derive_seed(params.seed, "shapes/" + std::to_string(i)));
    const int label = i % params.num_classes;

    ImageTensor img(3, side, side);
    for (double& v : img.values()) v = 0.3 * unit(rng);

    const double r = side * (0.22 + 0.14 * unit(rng));
    const double lo = r + 1.0;
    const double hi = side - r - 1.0;
    const double cx = lo + (hi - lo) * unit(rng);
    const double cy = lo + (hi - lo) * unit(rng);
    double color[3];
    for (double& c : color) c = 0.55 + 0.45 * unit(rng);

    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        int hits = 0;
        for (int sy = 0; sy < kSupersample; ++sy) {
          for (int sx = 0; sx < kSupersample; ++sx) {
            const double px = x + (sx + 0.5) / kSupersample;
            const double py = y + (sy + 0.5) / kSupersample;
            hits += inside(label, px - cx, py - cy, r) ? 1 : 0;
          }
        }
        if (hits == 0) continue;
        const double cov = static_cast<double>(hits) / (kSupersample * kSupersample);
        for (int c = 0; c < 3; ++c) {
          double& v = img.at(c, y, x);
          v = std::clamp(v * (1.0 - cov) + color[c] * cov, 0.0, 1.0);
        }
      }
    }

    char id[32];
    std::snprintf(id, sizeof(id), "%s-%05d", prefix, i);
    examples.push_back({std::move(img), label, id});
  }

  std::vector<std::string> names(shape_class_names().begin(),
                                 shape_class_names().begin() + params.num_classes);
  return Dataset(std::move(examples), std::move(names), params.split,
                 shapes_dataset_tag(params.num_classes, side));
}

Dataset generate_shapes_dataset(int n, int num_classes, int side, std::uint64_t seed) {
  return generate_shapes_dataset(ShapesParams{n, num_classes, side, seed, Split::kAll});
}

}  // namespace harmony
