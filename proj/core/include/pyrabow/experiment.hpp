#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pyrabow/config.hpp"
#include "pyrabow/eval.hpp"
#include "pyrabow/pipeline.hpp"

namespace pyrabow {

/// Held-out predictions of one fitted pipeline.
struct SplitResult {
  std::vector<std::size_t> test_indices;
  std::vector<int> truth;
  std::vector<int> predicted;
  Matrix scores;  // test samples × classes
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

/// Fits on `train`, predicts every record of `test`.
SplitResult evaluate_split(const PipelineConfig& cfg, const Corpus& corpus,
                           std::span<const std::size_t> train,
                           std::span<const std::size_t> test, ArtifactCache* cache,
                           unsigned threads, FittedPipeline* fitted = nullptr);

/// Stratified train/test split with the config's fraction and seed.
SplitResult evaluate_holdout(const PipelineConfig& cfg, const Corpus& corpus,
                             ArtifactCache* cache, unsigned threads,
                             FittedPipeline* fitted = nullptr);

/// Stratified k-fold CV; every fitted artifact sees the fold-train part only.
CvReport cross_validate(const PipelineConfig& cfg, const Corpus& corpus, int k,
                        std::uint64_t seed, ArtifactCache* cache, unsigned threads);

/// One named axis: a dotted config path and the values it takes.
struct SweepAxis {
  std::string path;  // e.g. "codebook.k"
  std::vector<nlohmann::json> values;
};

/// Cartesian product of axes; the last axis varies fastest.
struct SweepGrid {
  std::vector<SweepAxis> axes;

  /// Throws ConfigError on an empty grid or an axis without values.
  void validate() const;
  std::size_t size() const;
  /// (path, value) pairs of grid point `i`.
  std::vector<std::pair<std::string, nlohmann::json>> point(std::size_t i) const;
};

/// Expects {"axes": [{"path": "...", "values": [...]}, ...]}.
SweepGrid sweep_grid_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SweepGrid& grid);

/// Sets a dotted path inside a config document, creating sections as needed.
nlohmann::json apply_override(nlohmann::json doc, const std::string& path,
                              const nlohmann::json& value);

struct SweepRow {
  std::size_t grid_index = 0;
  std::vector<std::pair<std::string, nlohmann::json>> overrides;
  std::string protocol;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> fold_accuracies;  // one entry under holdout
  std::string fingerprint;
  std::optional<std::string> error;
};

struct SweepOptions {
  Protocol protocol = Protocol::cv;
  unsigned threads = 1;
  CorpusOptions corpus;  // threads inside are overridden by `threads`
};

/// Evaluates every grid point derived from `base`. Descriptors are shared by
/// points with the same dataset and feature settings, and fitted codebooks
/// and GMMs by points (and folds) with the same artifact config. A failing
/// point yields an error row. Rows come back sorted by mean, descending, ties
/// and error rows in grid order (errors last).
std::vector<SweepRow> sweep(const PipelineConfig& base, const SweepGrid& grid,
                            const SweepOptions& opts);

nlohmann::json to_json(const SweepRow& row);
/// Header: grid_index, one column per axis path, protocol, mean, std, error.
std::string sweep_csv(const SweepGrid& grid, std::span<const SweepRow> rows);

}  // namespace pyrabow
