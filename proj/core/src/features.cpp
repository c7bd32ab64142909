#include "pyrabow/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pyrabow/error.hpp"

namespace pyrabow {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kClip = 0.2;

// Tolerance for "patch fits" checks on float keypoint coordinates.
constexpr double kFitSlack = 1e-4;

}  // namespace

void DenseGridSpec::validate() const {
  if (step < 1) throw Error("dense grid step must be >= 1");
  if (patch < 8) throw Error("dense grid patch must be >= 8");
  if (scales.empty()) throw Error("dense grid needs at least one scale");
  for (double s : scales)
    if (!(s > 0.0)) throw Error("dense grid scales must be positive");
}

std::vector<Keypoint> dense_keypoints(int width, int height, const DenseGridSpec& spec) {
  spec.validate();
  std::vector<Keypoint> kps;
  for (double s : spec.scales) {
    const double half = spec.patch * s / 2.0;
    const double margin = std::ceil(half);
    for (double y = margin; y + half <= height; y += spec.step) {
      for (double x = margin; x + half <= width; x += spec.step) {
        kps.push_back({static_cast<float>(x), static_cast<float>(y),
                       static_cast<float>(s)});
      }
    }
  }
  return kps;
}

GradientField image_gradients(const GrayImage& img) {
  if (img.width < 2 || img.height < 2)
    throw Error("gradients need an image of at least 2x2 pixels, got " +
                std::to_string(img.width) + "x" + std::to_string(img.height));
  const int w = img.width, h = img.height;
  GradientField g;
  g.width = w;
  g.height = h;
  g.magnitude.resize(img.pixels.size());
  g.orientation.resize(img.pixels.size());

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double dx, dy;
      if (x == 0) {
        dx = static_cast<double>(img.at(1, y)) - img.at(0, y);
      } else if (x == w - 1) {
        dx = static_cast<double>(img.at(w - 1, y)) - img.at(w - 2, y);
      } else {
        dx = (static_cast<double>(img.at(x + 1, y)) - img.at(x - 1, y)) / 2.0;
      }
      if (y == 0) {
        dy = static_cast<double>(img.at(x, 1)) - img.at(x, 0);
      } else if (y == h - 1) {
        dy = static_cast<double>(img.at(x, h - 1)) - img.at(x, h - 2);
      } else {
        dy = (static_cast<double>(img.at(x, y + 1)) - img.at(x, y - 1)) / 2.0;
      }
      double theta = std::atan2(dy, dx);
      if (theta < 0.0) theta += kTwoPi;
      if (theta >= kTwoPi) theta = 0.0;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      g.magnitude[i] = static_cast<float>(std::hypot(dx, dy));
      g.orientation[i] = static_cast<float>(theta);
    }
  }
  return g;
}

Descriptor sift_descriptor(const GradientField& grads, const Keypoint& kp, int patch) {
  const double side = static_cast<double>(patch) * kp.scale;
  const double x0 = kp.x - side / 2.0;
  const double y0 = kp.y - side / 2.0;
  if (x0 < -kFitSlack || y0 < -kFitSlack || x0 + side > grads.width + kFitSlack ||
      y0 + side > grads.height + kFitSlack) {
    throw Error("descriptor patch at (" + std::to_string(kp.x) + ", " +
                std::to_string(kp.y) + ") does not fit inside the image");
  }

  const double cell = side / kSpatialCells;
  const double sigma = side / 2.0;
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);

  // Pixels whose centre lies in [x0, x0 + side).
  const int px_begin = std::max(0, static_cast<int>(std::ceil(x0 - 0.5)));
  const int px_end = std::min(grads.width, static_cast<int>(std::ceil(x0 + side - 0.5)));
  const int py_begin = std::max(0, static_cast<int>(std::ceil(y0 - 0.5)));
  const int py_end = std::min(grads.height, static_cast<int>(std::ceil(y0 + side - 0.5)));

  std::array<double, kDescriptorDim> hist{};
  for (int py = py_begin; py < py_end; ++py) {
    const double cy = py + 0.5;
    const double v = (cy - y0) / cell - 0.5;  // cell-centre coordinates
    const double iv = std::floor(v);
    const double fv = v - iv;
    for (int px = px_begin; px < px_end; ++px) {
      const std::size_t idx = static_cast<std::size_t>(py) * grads.width + px;
      const double mag = grads.magnitude[idx];
      if (mag == 0.0) continue;
      const double cx = px + 0.5;
      const double dxk = cx - kp.x, dyk = cy - kp.y;
      const double weighted =
          mag * std::exp(-(dxk * dxk + dyk * dyk) * inv_two_sigma2);

      const double u = (cx - x0) / cell - 0.5;
      const double iu = std::floor(u);
      const double fu = u - iu;
      const double o = grads.orientation[idx] * (kOrientationBins / kTwoPi);
      const double io = std::floor(o);
      const double fo = o - io;

      for (int dr = 0; dr < 2; ++dr) {
        const int row = static_cast<int>(iv) + dr;
        if (row < 0 || row >= kSpatialCells) continue;
        const double wr = dr ? fv : 1.0 - fv;
        for (int dc = 0; dc < 2; ++dc) {
          const int col = static_cast<int>(iu) + dc;
          if (col < 0 || col >= kSpatialCells) continue;
          const double wc = dc ? fu : 1.0 - fu;
          const std::size_t base =
              static_cast<std::size_t>(row * kSpatialCells + col) * kOrientationBins;
          for (int dk = 0; dk < 2; ++dk) {
            const int bin = (static_cast<int>(io) + dk) % kOrientationBins;
            const double wo = dk ? fo : 1.0 - fo;
            hist[base + static_cast<std::size_t>(bin)] += weighted * wr * wc * wo;
          }
        }
      }
    }
  }

  Descriptor out{};
  double norm = 0.0;
  for (double h : hist) norm += h * h;
  norm = std::sqrt(norm);
  if (norm <= 1e-12) return out;
  double renorm = 0.0;
  for (auto& h : hist) {
    h = std::min(h / norm, kClip);
    renorm += h * h;
  }
  renorm = std::sqrt(renorm);
  for (std::size_t i = 0; i < kDescriptorDim; ++i)
    out[i] = static_cast<float>(hist[i] / renorm);
  return out;
}

DenseFeatures extract_dense(const GrayImage& img, const DenseGridSpec& spec) {
  DenseFeatures f;
  f.keypoints = dense_keypoints(img.width, img.height, spec);
  if (f.keypoints.empty()) return f;
  const GradientField grads = image_gradients(img);
  f.descriptors.reserve(f.keypoints.size());
  for (const auto& kp : f.keypoints)
    f.descriptors.push_back(sift_descriptor(grads, kp, spec.patch));
  return f;
}

}  // namespace pyrabow
