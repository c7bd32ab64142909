#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pyrabow/image.hpp"
#include "pyrabow/matrix.hpp"

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pyrabow_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline pyrabow::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                     double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  pyrabow::Matrix m(rows, cols);
  for (double& x : m.data()) x = u(rng);
  return m;
}

inline std::vector<std::vector<double>> to_rows(const pyrabow::Matrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).begin(), m.row(i).end());
  return out;
}

inline pyrabow::GrayImage random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  pyrabow::GrayImage img(w, h);
  for (float& p : img.pixels) p = u(rng);
  return img;
}

/// Writes a tiny grating corpus: `per_class` images per orientation.
void write_small_corpus(const std::filesystem::path& root, int per_class, std::uint64_t seed);

/// Config JSON for the small-corpus fixture (k = 32 codebook, RBF SVM).
std::string small_config_json(const std::filesystem::path& root);

}  // namespace testing_support
