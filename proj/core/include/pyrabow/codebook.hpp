#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "pyrabow/features.hpp"
#include "pyrabow/matrix.hpp"

namespace pyrabow {

enum class KMeansInit { kmeanspp, random_points };

struct KMeansConfig {
  int k = 512;
  int max_iter = 100;
  double tol = 1e-4;  // relative objective improvement
  std::uint64_t seed = 0;
  KMeansInit init = KMeansInit::kmeanspp;

  void validate() const;
};

/// k visual words. `objective_history[t]` is the within-cluster sum of squared
/// distances after the t-th assignment step; the last entry is `objective`.
struct Codebook {
  Matrix centroids;
  double objective = 0.0;
  std::vector<double> objective_history;
  int iterations = 0;
  bool converged = false;
  KMeansConfig config;

  std::size_t k() const { return centroids.rows(); }
  std::size_t dim() const { return centroids.cols(); }
};

/// Lloyd's algorithm. Clusters that lose all their points are re-seeded with
/// the point farthest from its own centroid. Throws std::logic_error if the
/// objective ever increases between iterations.
Codebook train_codebook(const Matrix& points, const KMeansConfig& cfg,
                        unsigned threads = 1);

/// Nearest centroid by Euclidean distance; ties go to the lowest index.
std::size_t assign(const Codebook& cb, std::span<const double> v);
std::size_t assign(const Codebook& cb, std::span<const float> v);

std::vector<int> quantize_image(const Codebook& cb, std::span<const Descriptor> descs);

Matrix to_matrix(std::span<const Descriptor> descs);

/// Stacks the descriptors of `images` (in order). When there are more than
/// `budget` rows, a seeded uniform sample of exactly `budget` rows is kept,
/// preserving their original order.
Matrix pool_descriptors(std::span<const DenseFeatures* const> images,
                        std::size_t budget, std::uint64_t seed);

inline constexpr int kCodebookSchemaVersion = 1;
nlohmann::json to_json(const Codebook& cb);
Codebook codebook_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const KMeansConfig& cfg);

}  // namespace pyrabow
