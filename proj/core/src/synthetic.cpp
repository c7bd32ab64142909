#include "pyrabow/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "pyrabow/error.hpp"

namespace pyrabow {

GrayImage make_grating(double orientation_deg, double period, double phase, int size,
                       double amplitude, double noise_sigma, std::uint64_t noise_seed) {
  if (size < 1 || period <= 0.0) throw Error("invalid grating parameters");
  const double theta = orientation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  GrayImage img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      // Phase advances along the grating normal, so stripes run perpendicular to it.
      const double u = x * c + y * s;
      double v = 128.0 + amplitude * std::sin(2.0 * std::numbers::pi * u / period + phase);
      if (noise_sigma > 0.0) v += noise(rng);
      img.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 255.0) / 255.0);
    }
  return img;
}

std::vector<std::string> write_grating_corpus(const std::filesystem::path& root,
                                              const GratingSpec& spec) {
  if (spec.orientations_deg.empty() || spec.per_class < 1)
    throw Error("grating corpus needs at least one class and one image per class");
  if (spec.min_period <= 0.0 || spec.max_period < spec.min_period)
    throw Error("invalid grating period range");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> period(spec.min_period, spec.max_period);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  std::vector<std::string> classes;
  for (double deg : spec.orientations_deg) {
    char name[32];
    std::snprintf(name, sizeof name, "orient_%03d", static_cast<int>(std::lround(deg)));
    classes.emplace_back(name);
    const auto dir = root / name;
    std::filesystem::create_directories(dir);
    for (int i = 0; i < spec.per_class; ++i) {
      const double p = period(rng);
      const double ph = phase(rng);
      const std::uint64_t noise_seed = rng();
      char file[32];
      std::snprintf(file, sizeof file, "img_%03d.pgm", i);
      write_pgm(dir / file, make_grating(deg, p, ph, spec.size, spec.amplitude,
                                         spec.noise_sigma, noise_seed));
    }
  }
  return classes;
}

}  // namespace pyrabow
