#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pyrabow/features.hpp"
#include "pyrabow/matrix.hpp"

namespace pyrabow {

enum class PyramidShape { square, horizontal };

/// Levels 0..level are concatenated. Square level l is a 2^l x 2^l grid;
/// horizontal level 0 is the whole image and level l >= 1 is 3*l full-width
/// strips of (near) equal height.
struct PyramidSpec {
  PyramidShape shape = PyramidShape::horizontal;
  int level = 1;
};

struct Region {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  long long area() const { return static_cast<long long>(x1 - x0) * (y1 - y0); }
  friend bool operator==(const Region&, const Region&) = default;
};

/// Regions ordered level-major, then row-major within a level.
struct RegionLayout {
  struct Level {
    int cols = 1;
    int rows = 1;
    std::size_t first = 0;  // index of the level's first region
  };

  int width = 0;
  int height = 0;
  std::vector<Region> regions;
  std::vector<Level> levels;

  std::size_t size() const { return regions.size(); }
};

std::size_t region_count(const PyramidSpec& spec);

/// Region i of n along an axis of length L spans [floor(i*L/n), floor((i+1)*L/n)).
/// Throws Error if some region would be empty.
RegionLayout pyramid_regions(const PyramidSpec& spec, int width, int height);

enum class EncodingTag { bovw, bovw_pca, fisher };

std::string to_string(EncodingTag tag);

struct FeatureVector {
  std::vector<double> values;
  EncodingTag tag = EncodingTag::bovw;
  /// Width of the independently normalised blocks (k for pyramid histograms);
  /// 0 means the whole vector is one block.
  std::size_t block_size = 0;

  std::size_t size() const { return values.size(); }
};

/// One k-bin word histogram per region, concatenated in layout order. A
/// keypoint belongs to the region with x0 <= x < x1 and y0 <= y < y1, except
/// that the last region on each axis also takes x == width (y == height).
FeatureVector encode_bovw(std::span<const Keypoint> kps, std::span<const int> words,
                          const RegionLayout& layout, int k);

enum class NormKind { none, l2, sum, standard };

std::string to_string(NormKind kind);
NormKind norm_kind_from_string(const std::string& s);

/// Population mean and standard deviation per dimension.
struct ScalerStats {
  std::vector<double> mean;
  std::vector<double> std;
};

/// l2 and sum act on each block separately; standard uses `stats` across the
/// whole vector. Zero blocks and zero-deviation dimensions map to 0.
FeatureVector normalize(const FeatureVector& v, NormKind kind,
                        const ScalerStats* stats = nullptr);

/// Rows of `train` are feature vectors. Needs at least 2 rows.
ScalerStats fit_scaler(const Matrix& train);

struct PcaModel {
  std::vector<double> mean;
  Matrix components;  // one orthonormal basis vector per row
  std::vector<double> explained_variance;  // covariance eigenvalues, n - 1 normalisation

  std::size_t num_components() const { return components.rows(); }
  std::size_t dim() const { return mean.size(); }
};

/// Keeps the num_components leading eigenvectors of the sample covariance.
/// Each basis vector is signed so that its largest-magnitude entry is positive.
/// Requires num_components <= min(dim, rows - 1).
PcaModel fit_pca(const Matrix& train, int num_components);

FeatureVector project_pca(const PcaModel& model, const FeatureVector& v);

/// Inverse projection back to the input space.
std::vector<double> reconstruct_pca(const PcaModel& model, std::span<const double> coords);

inline constexpr int kScalerSchemaVersion = 1;
inline constexpr int kPcaSchemaVersion = 1;
nlohmann::json to_json(const ScalerStats& stats);
ScalerStats scaler_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PcaModel& model);
PcaModel pca_from_json(const nlohmann::json& doc);

}  // namespace pyrabow
