#pragma once

#include <string>

#include "harmony/attribution/attribution_map.hpp"
#include "harmony/data/dataset.hpp"
#include "harmony/model/adapter.hpp"

namespace harmony {

// Grad-CAM for the example's label at `layer`: channel weights are the
// spatial means of d(class logit)/dA, the raw map is ReLU(Σ_c w_c A_c),
// bilinearly upsampled to the input size and min-max normalised. An
// identically zero raw map yields the all-zero map.
AttributionMap grad_cam(ClassifierAdapter& adapter, const LabeledExample& example,
                        const std::string& layer);
AttributionMap grad_cam(ClassifierAdapter& adapter, const LabeledExample& example,
                        const ActivationHandle& layer);

// Cache key component for Grad-CAM maps at a layer.
std::string grad_cam_config_hash(const std::string& layer);

}  // namespace harmony
