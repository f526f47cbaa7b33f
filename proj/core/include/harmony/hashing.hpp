#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace harmony {

// 64-bit FNV-1a. Stable across platforms; used for split assignment, config
// hashes and seed derivation.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Child seed for a named component of a root seed, e.g. derive_seed(root, "data").
std::uint64_t derive_seed(std::uint64_t root, std::string_view component);

std::string hex64(std::uint64_t value);

}  // namespace harmony
