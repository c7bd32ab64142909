#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pyrabow/dataset.hpp"
#include "pyrabow/matrix.hpp"

namespace pyrabow {

/// Fraction of exact matches. Throws on empty input or length mismatch.
double accuracy(std::span<const int> pred, std::span<const int> truth);

/// counts[t][p]: rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  std::size_t trace() const;
};

ConfusionMatrix confusion(std::span<const int> pred, std::span<const int> truth,
                          int num_classes);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // score at which this point is reached
};

struct RocCurve {
  std::vector<RocPoint> points;  // starts at (0, 0), ends at (1, 1)
  double auc = 0.0;
};

/// Threshold sweep over distinct scores (equal scores form one step) with
/// trapezoid-rule area. Needs at least one positive and one negative.
RocCurve roc_curve(std::span<const double> scores, std::span<const bool> positive);

/// One-vs-rest ROC of `class_id` using column class_id of `scores`
/// (one row per sample).
RocCurve roc_auc(const Matrix& scores, std::span<const int> truth, int class_id);

struct CvReport {
  std::vector<double> fold_accuracies;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::string fingerprint;
  std::string protocol = "cv";
};

/// Mean and population std of `values`.
void summarize(std::span<const double> values, double& mean, double& std);

/// Evaluates one fold: gets the training and held-out record indices,
/// returns held-out accuracy.
using FoldEvaluator = std::function<double(std::span<const std::size_t> train,
                                           std::span<const std::size_t> test)>;

/// Runs `evaluate` once per fold of `folds`, in fold order.
CvReport cross_validate(const FoldAssignment& folds, const FoldEvaluator& evaluate);

nlohmann::json to_json(const CvReport& report);
nlohmann::json to_json(const ConfusionMatrix& cm);

}  // namespace pyrabow
