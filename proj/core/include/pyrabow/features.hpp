#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "pyrabow/image.hpp"

namespace pyrabow {

inline constexpr std::size_t kDescriptorDim = 128;  // 4x4 cells x 8 orientations
inline constexpr int kSpatialCells = 4;
inline constexpr int kOrientationBins = 8;

/// Layout: values[(row * 4 + col) * 8 + orientation_bin].
using Descriptor = std::array<float, kDescriptorDim>;

/// Dense keypoint grid. `patch` is the descriptor support side in pixels at
/// scale 1; each entry of `scales` multiplies it.
struct DenseGridSpec {
  int step = 8;
  int patch = 16;
  std::vector<double> scales{1.0};

  /// Throws Error when step < 1, patch < 8 or a scale is not positive.
  void validate() const;
};

/// Patch centre in continuous pixel coordinates: pixel i spans [i, i + 1).
struct Keypoint {
  float x = 0;
  float y = 0;
  float scale = 1;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<float> magnitude;
  std::vector<float> orientation;  // radians in [0, 2*pi)
};

/// Keypoints for each scale in turn (scale-major), each grid row-major. The
/// first centre sits at ceil(patch * scale / 2) and the grid continues in
/// `step` increments while the scaled patch still fits in the image.
std::vector<Keypoint> dense_keypoints(int width, int height, const DenseGridSpec& spec);

/// Central differences inside, one-sided differences on the border.
/// Throws Error for images narrower or shorter than 2 pixels.
GradientField image_gradients(const GrayImage& img);

/// Upright SIFT-style descriptor on a (patch * kp.scale)-sided square centred
/// at kp: Gaussian weighting with sigma = half the side, trilinear voting into
/// 4x4 cells x 8 orientations, then L2 normalise, clip at 0.2 and renormalise.
/// A patch without any gradient gives the all-zero descriptor.
Descriptor sift_descriptor(const GradientField& grads, const Keypoint& kp, int patch);

struct DenseFeatures {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;

  std::size_t size() const { return keypoints.size(); }
};

DenseFeatures extract_dense(const GrayImage& img, const DenseGridSpec& spec);

}  // namespace pyrabow
