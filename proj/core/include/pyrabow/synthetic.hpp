#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pyrabow/image.hpp"

namespace pyrabow {

/// Corpus of noisy sinusoidal gratings, one class per orientation.
struct GratingSpec {
  std::vector<double> orientations_deg{0.0, 45.0, 90.0};
  int per_class = 60;
  int size = 64;
  double min_period = 6.0;   // pixels per cycle, drawn uniformly per image
  double max_period = 12.0;
  double amplitude = 80.0;   // grey levels around a mid level of 128
  double noise_sigma = 20.0;
  std::uint64_t seed = 0;
};

/// One grating image with its own random period and phase. Parameters are in
/// grey levels (0-255); pixels come back scaled to [0, 1].
GrayImage make_grating(double orientation_deg, double period, double phase, int size,
                       double amplitude, double noise_sigma, std::uint64_t noise_seed);

/// Writes `<root>/<class>/img_NNN.pgm` with classes named `orient_DDD`.
/// Deterministic in `spec.seed`. Returns the class directory names.
std::vector<std::string> write_grating_corpus(const std::filesystem::path& root,
                                              const GratingSpec& spec);

}  // namespace pyrabow
