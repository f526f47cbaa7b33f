#include "harmony/attribution/grad_cam.hpp"

#include <algorithm>

#include "harmony/error.hpp"
#include "harmony/hashing.hpp"

namespace harmony {

AttributionMap grad_cam(ClassifierAdapter& adapter, const LabeledExample& example,
                        const std::string& layer) {
  if (example.label < 0 || example.label >= adapter.num_classes()) {
    throw ParameterError("label of '" + example.id + "' is outside the model's classes");
  }
  const ImageTensor x = adapter.prepare(example.image);
  const Tensor batch = stack_images(std::vector<const ImageTensor*>{&x});
  const GradientResult g =
      adapter.gradient_of_scalar(batch, ScalarSelector::class_score(example.label), layer);

  const Tensor& act = g.activation;
  if (act.rank() != 4) {
    throw ModelError("layer '" + layer + "' is not a spatial activation (shape " + act.shape_string() + ")");
  }
  const int channels = act.dim(1), h = act.dim(2), w = act.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  std::vector<double> raw(plane, 0.0);
  for (int c = 0; c < channels; ++c) {
    const double* a = act.data() + c * plane;
    const double* d = g.gradient.data() + c * plane;
    double weight = 0.0;
    for (std::size_t i = 0; i < plane; ++i) weight += d[i];
    weight /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) raw[i] += weight * a[i];
  }
  for (double& v : raw) v = std::max(v, 0.0);

  const int out_h = x.height(), out_w = x.width();
  std::vector<double> up = resize_plane(raw, h, w, out_h, out_w);

  AttributionMap map;
  map.height = out_h;
  map.width = out_w;
  map.values.assign(up.size(), 0.0f);
  const auto [lo, hi] = std::minmax_element(up.begin(), up.end());
  const double vmin = *lo, vmax = *hi;
  if (vmax > 0.0) {
    const double span = vmax - vmin;
    for (std::size_t i = 0; i < up.size(); ++i) {
      // A constant positive map has every pixel at the maximum.
      const double v = span > 1e-12 * vmax ? (up[i] - vmin) / span : 1.0;
      map.values[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  map.image_id = example.id;
  map.source_model_id = adapter.model_id();
  map.method = AttributionMethod::kGC;
  map.config_hash = grad_cam_config_hash(layer);
  return map;
}

AttributionMap grad_cam(ClassifierAdapter& adapter, const LabeledExample& example,
                        const ActivationHandle& layer) {
  return grad_cam(adapter, example, layer.layer_name);
}

std::string grad_cam_config_hash(const std::string& layer) {
  return hex64(fnv1a64("GC/layer=" + layer));
}

}  // namespace harmony
