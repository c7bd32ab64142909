#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pyrabow/classify.hpp"
#include "pyrabow/codebook.hpp"
#include "pyrabow/config.hpp"
#include "pyrabow/dataset.hpp"
#include "pyrabow/encoding.hpp"
#include "pyrabow/features.hpp"
#include "pyrabow/fisher.hpp"

namespace pyrabow {

/// A scanned dataset together with the dense features of every record.
struct Corpus {
  DatasetIndex index;
  std::vector<DenseFeatures> features;     // per record
  std::vector<std::array<int, 2>> sizes;   // (width, height) per record
  std::string key;                         // identifies index + grid spec
  bool loaded_from_cache = false;

  std::size_t size() const { return features.size(); }
  std::vector<int> labels() const { return index.labels(); }
};

struct CorpusOptions {
  std::optional<std::filesystem::path> cache_dir;  // no disk cache when unset
  unsigned threads = 1;
};

/// Cache key over the grid spec and each record's path, size and mtime.
std::string corpus_key(const DatasetIndex& index, const DenseGridSpec& grid);

/// Extracts dense features for every record (decoding in parallel, results
/// in record order). With a cache dir, reuses `<key>.bvwd` when present and
/// writes it otherwise, plus `<key>.sizes.json` holding image dimensions.
Corpus build_corpus(DatasetIndex index, const DenseGridSpec& grid, const CorpusOptions& opts);

/// In-memory memo for the expensive fitted artifacts (codebooks, GMMs),
/// keyed by a content hash of everything that produced them. Thread-safe.
class ArtifactCache {
 public:
  std::shared_ptr<const Codebook> codebook(const std::string& key,
                                           const std::function<Codebook()>& make);
  std::shared_ptr<const GmmModel> gmm(const std::string& key,
                                      const std::function<GmmModel()>& make);
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Codebook>> codebooks_;
  std::map<std::string, std::shared_ptr<const GmmModel>> gmms_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Everything needed to turn dense features into a class prediction.
struct FittedPipeline {
  PipelineConfig config;
  std::vector<std::string> classes;
  std::shared_ptr<const Codebook> codebook;  // BoVW path
  std::shared_ptr<const GmmModel> gmm;       // Fisher path
  std::optional<ScalerStats> scaler;
  std::optional<PcaModel> pca;
  ClassifierModel classifier;
};

/// Fits codebook or GMM, scaler, PCA and classifier on the `train` records
/// of `corpus` only.
FittedPipeline fit_pipeline(const PipelineConfig& cfg, const Corpus& corpus,
                            std::span<const std::size_t> train, ArtifactCache* cache,
                            unsigned threads);

/// BoVW pyramid histogram or Fisher vector, before normalisation.
FeatureVector encode_image(const FittedPipeline& p, const DenseFeatures& f, int width,
                           int height);

/// Encoded, normalised and (optionally) PCA-projected vector.
std::vector<double> transform_image(const FittedPipeline& p, const DenseFeatures& f,
                                    int width, int height);

Prediction predict_image(const FittedPipeline& p, const DenseFeatures& f, int width,
                         int height);

/// Reads, extracts and predicts one image file.
Prediction predict_file(const FittedPipeline& p, const std::filesystem::path& image);

inline constexpr int kPipelineSchemaVersion = 1;

/// Writes pipeline.json plus one JSON file per fitted component.
void save_pipeline(const FittedPipeline& p, const std::filesystem::path& models_dir);

/// Throws Error when a file is missing or components disagree on dimensions.
FittedPipeline load_pipeline(const std::filesystem::path& models_dir);

}  // namespace pyrabow
