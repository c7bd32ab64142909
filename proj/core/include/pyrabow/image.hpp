#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pyrabow {

/// Row-major luminance image with values in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

/// ITU-R BT.601 luma of an 8-bit RGB triple, scaled to [0, 1].
constexpr float luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<float>((0.299 * r + 0.587 * g + 0.114 * b) / 255.0);
}

/// Decodes PGM (P2/P5, 8 or 16 bit), PNG or JPEG by file signature.
/// Throws DecodeError naming the path on unsupported or truncated input.
GrayImage load_grayscale(const std::filesystem::path& path);

GrayImage decode_pgm(std::span<const std::uint8_t> bytes);

/// Writes an 8-bit binary PGM, rounding each pixel to the nearest level.
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

}  // namespace pyrabow
