#include "pyrabow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "pyrabow/error.hpp"

namespace pyrabow {

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw Error("prediction and truth lengths differ");
  if (pred.empty()) throw Error("accuracy of an empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return t;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

ConfusionMatrix confusion(std::span<const int> pred, std::span<const int> truth,
                          int num_classes) {
  if (pred.size() != truth.size()) throw Error("prediction and truth lengths differ");
  if (num_classes < 1) throw Error("confusion matrix needs at least one class");
  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.counts.assign(static_cast<std::size_t>(num_classes),
                   std::vector<std::size_t>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes)
      throw Error("label out of range for confusion matrix");
    ++cm.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  }
  return cm;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw Error("score and label lengths differ");
  const auto pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t neg = positive.size() - pos;
  if (pos == 0 || neg == 0) throw Error("ROC needs at least one positive and one negative");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (positive[order[i]]) ++tp; else ++fp;
      ++i;
    }
    RocPoint p{static_cast<double>(fp) / static_cast<double>(neg),
               static_cast<double>(tp) / static_cast<double>(pos), s};
    const auto& prev = roc.points.back();
    roc.auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
    roc.points.push_back(p);
  }
  return roc;
}

RocCurve roc_auc(const Matrix& scores, std::span<const int> truth, int class_id) {
  if (scores.rows() != truth.size()) throw Error("score rows and truth lengths differ");
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= scores.cols())
    throw Error("class id out of range for score matrix");
  std::vector<double> s(truth.size());
  auto pos = std::make_unique<bool[]>(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    s[i] = scores(i, static_cast<std::size_t>(class_id));
    pos[i] = truth[i] == class_id;
  }
  return roc_curve(s, std::span<const bool>(pos.get(), truth.size()));
}

void summarize(std::span<const double> values, double& mean, double& std) {
  if (values.empty()) throw Error("cannot summarize an empty list");
  mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  std = std::sqrt(ss / static_cast<double>(values.size()));
}

CvReport cross_validate(const FoldAssignment& folds, const FoldEvaluator& evaluate) {
  if (folds.k < 2) throw Error("cross-validation needs at least 2 folds");
  CvReport report;
  for (int f = 0; f < folds.k; ++f) {
    const auto train = folds.train_indices(f);
    const auto test = folds.test_indices(f);
    if (test.empty()) throw Error("fold " + std::to_string(f) + " is empty");
    report.fold_accuracies.push_back(evaluate(train, test));
  }
  summarize(report.fold_accuracies, report.mean, report.std);
  return report;
}

nlohmann::json to_json(const CvReport& report) {
  return {{"protocol", report.protocol},
          {"fold_accuracies", report.fold_accuracies},
          {"mean", report.mean},
          {"std", report.std},
          {"std_kind", "population"},
          {"fingerprint", report.fingerprint}};
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  return {{"num_classes", cm.num_classes}, {"counts", cm.counts}};
}

}  // namespace pyrabow
