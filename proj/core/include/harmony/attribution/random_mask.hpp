#pragma once

#include <cstdint>
#include <string>

#include "harmony/attribution/attribution_map.hpp"

namespace harmony {

// I.i.d. uniform map rescaled (and clipped to [0,1]) so its mean matches
// mean(like); the control condition for attribution maps. Deterministic in
// `seed`. Tagged RANDOM.
AttributionMap random_mask_like(const AttributionMap& like, std::uint64_t seed);

// Cache key component for random maps derived from maps with `base_hash`.
std::string random_config_hash(const std::string& base_hash, std::uint64_t seed);

}  // namespace harmony
