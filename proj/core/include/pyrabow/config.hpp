#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "pyrabow/classify.hpp"
#include "pyrabow/codebook.hpp"
#include "pyrabow/encoding.hpp"
#include "pyrabow/features.hpp"
#include "pyrabow/fisher.hpp"

namespace pyrabow {

enum class Protocol { holdout, cv };

std::string to_string(Protocol p);

struct DatasetConfig {
  std::filesystem::path root;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.7;
};

struct CodebookConfig {
  KMeansConfig kmeans;
  std::size_t subsample = 200000;  // descriptor budget for k-means training
};

struct EncodingConfig {
  PyramidSpec pyramid;
  int max_level = 2;
  NormKind normalization = NormKind::standard;
};

struct PcaConfig {
  bool enabled = false;
  int num_components = 64;
};

struct FisherConfig {
  bool enabled = false;
  GmmConfig gmm;
  bool include_weight_block = false;
  std::size_t subsample = 200000;
};

struct EvalConfig {
  Protocol protocol = Protocol::holdout;
  int folds = 8;
  std::uint64_t seed = 0;
};

/// Every knob of the pipeline. Defaults: dense SIFT, k = 512, horizontal
/// level-1 pyramid, standard scaling, RBF SVM.
struct PipelineConfig {
  DatasetConfig dataset;
  DenseGridSpec features;
  CodebookConfig codebook;
  EncodingConfig encoding;
  PcaConfig pca;
  FisherConfig fisher;
  ClassifierConfig classifier;
  EvalConfig eval;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  /// Length of the encoded vector before PCA.
  std::size_t encoded_dim() const;
  /// Length of the vector that reaches the classifier.
  std::size_t classifier_dim() const;
  std::size_t num_regions() const;
};

/// Strict parse: unknown keys and wrong types raise ConfigError. Missing
/// sections and keys take defaults. Validates before returning.
PipelineConfig config_from_json(const nlohmann::json& doc);

/// Parses a config file. A relative dataset.root is resolved against the
/// file's directory. A run manifest is accepted too (its "config" is used).
PipelineConfig load_config_file(const std::filesystem::path& path);

nlohmann::json to_json(const PipelineConfig& cfg);

/// Hash of the canonical JSON form.
std::string fingerprint(const PipelineConfig& cfg);

}  // namespace pyrabow
