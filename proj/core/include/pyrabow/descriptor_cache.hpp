#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pyrabow/features.hpp"

namespace pyrabow {

// Binary descriptor cache, all integers and floats little-endian:
//   "BVWD" | version u32 | image count u32 |
//   per image: record index u32 | keypoint count u32 | dim u32 (= 128) |
//              keypoints as (x, y, scale) f32 triples | descriptors as f32
inline constexpr std::uint32_t kDescriptorCacheVersion = 1;

struct CachedImage {
  std::uint32_t record_index = 0;
  DenseFeatures features;
};

void write_descriptor_cache(const std::filesystem::path& path,
                            std::span<const CachedImage> images);

/// Throws Error on bad magic, unknown version, dim != 128 or truncation.
std::vector<CachedImage> read_descriptor_cache(const std::filesystem::path& path);

}  // namespace pyrabow
