#include "harmony/attribution/random_mask.hpp"

#include <algorithm>
#include <random>

#include "harmony/hashing.hpp"

namespace harmony {

namespace {

double clipped_mean(const std::vector<double>& u, double scale) {
  double s = 0.0;
  for (double v : u) s += std::min(1.0, v * scale);
  return s / static_cast<double>(u.size());
}

}  // namespace

AttributionMap random_mask_like(const AttributionMap& like, std::uint64_t seed) {
  like.validate();
  AttributionMap out = AttributionMap::filled(like.height, like.width, 0.0f);
  out.image_id = like.image_id;
  out.source_model_id = like.source_model_id;
  out.method = AttributionMethod::kRandom;
  out.config_hash = random_config_hash(like.config_hash, seed);

  const double target = like.mean();
  if (target <= 0.0) return out;
  if (target >= 1.0) {
    std::fill(out.values.begin(), out.values.end(), 1.0f);
    return out;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> u(out.values.size());
  for (double& v : u) v = unif(rng);

  // mean(min(1, s·u)) is continuous and non-decreasing in s; bisect for s.
  double lo = 0.0, hi = 1.0;
  while (clipped_mean(u, hi) < target && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (clipped_mean(u, mid) < target ? lo : hi) = mid;
  }
  const double scale = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < u.size(); ++i) {
    out.values[i] = static_cast<float>(std::min(1.0, u[i] * scale));
  }
  return out;
}

std::string random_config_hash(const std::string& base_hash, std::uint64_t seed) {
  return hex64(fnv1a64("RANDOM/base=" + base_hash + "/seed=" + std::to_string(seed)));
}

}  // namespace harmony
