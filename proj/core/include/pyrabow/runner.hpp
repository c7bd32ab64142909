#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "pyrabow/config.hpp"
#include "pyrabow/dataset.hpp"
#include "pyrabow/eval.hpp"
#include "pyrabow/experiment.hpp"

namespace pyrabow {

inline constexpr int kManifestVersion = 1;

struct RunOptions {
  unsigned threads = 1;
  /// Descriptor cache location. Falls back to $PYRABOW_CACHE_DIR, then to
  /// `<out>/cache`.
  std::optional<std::filesystem::path> cache_dir;
  std::string command = "run";
};

struct RunSummary {
  std::string protocol;
  double accuracy = 0.0;  // holdout accuracy or CV mean
  double std = 0.0;       // CV only
  std::filesystem::path manifest;
};

std::filesystem::path resolve_cache_dir(const std::filesystem::path& out_dir,
                                        const std::optional<std::filesystem::path>& flag);

/// Scans, extracts, fits and evaluates under the configured protocol, then
/// fits the final model. Writes into `out_dir`:
///   manifest.json              config echo, dataset summary, artifact hashes, timings
///   models/*.json              the fitted pipeline
///   metrics/class_balance.csv  images per class
///   metrics/metrics.csv|json   holdout accuracy and per-class AUC, or CV summary
///   metrics/confusion.csv      holdout only
///   metrics/roc.csv            holdout only
///   metrics/cv.csv             CV only, one row per fold
/// CSVs carry no timings, so identical inputs give identical bytes.
RunSummary run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir,
                        const RunOptions& opts);

std::string class_balance_csv(const DatasetIndex& index);
std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& classes);
/// Rows: class, threshold, fpr, tpr. Classes absent from the test truth are skipped.
std::string roc_csv(const SplitResult& r, const std::vector<std::string>& classes);
std::string cv_csv(const CvReport& report);

/// Per-class AUC for classes with both positives and negatives in `r`.
nlohmann::json holdout_metrics_json(const SplitResult& r,
                                    const std::vector<std::string>& classes,
                                    const std::string& fingerprint);

}  // namespace pyrabow
