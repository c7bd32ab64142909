#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pyrabow/matrix.hpp"

namespace pyrabow {

enum class KernelKind { linear, poly, rbf, sigmoid, hist_intersection };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& s);

/// gamma unset means "scale": 1 / (dim * var(X_train)), resolved at training.
struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  int degree = 3;
  std::optional<double> gamma;
  double coef0 = 0.0;

  void validate() const;
};

/// Exact kernel value. Throws on dimension mismatch, on an unresolved gamma
/// for kernels that use it, and on negative inputs to hist_intersection.
double kernel_eval(const KernelSpec& spec, std::span<const double> a,
                   std::span<const double> b);

/// Fills in gamma = 1 / (dim * var) over every entry of X (1 if var is 0).
KernelSpec resolve_gamma(KernelSpec spec, const Matrix& X);

Matrix gram_matrix(const KernelSpec& spec, const Matrix& X, const Matrix& Y,
                   unsigned threads = 1);

/// Result of one binary dual problem; decision(x) = sum_i alpha_i y_i K(x_i, x) - rho.
struct BinarySvmSolution {
  std::vector<double> alpha;
  double rho = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Sequential pairwise (SMO) solver with second-order working-set selection.
/// Stops when the maximal KKT violation drops below `tol` or after
/// `max_iter` updates. `y` holds +1 / -1.
BinarySvmSolution solve_binary_svm(const Matrix& gram, std::span<const int> y, double C,
                                   double tol, std::size_t max_iter);

struct SvmConfig {
  double C = 1.0;
  double tol = 1e-3;
  std::size_t max_iter = 0;  // 0 means 10 * number of samples
};

/// One-vs-rest kernel SVM. Support vectors of all sub-problems share one pool;
/// `dual_coef(c, s)` is alpha * y for class c's sub-problem (0 when the row is
/// not a support vector of that sub-problem).
struct SvmModel {
  KernelSpec kernel;
  int num_classes = 0;
  double C = 1.0;
  Matrix support_vectors;
  std::vector<std::size_t> support_indices;  // rows of the training matrix
  Matrix dual_coef;                          // num_classes x num_support
  std::vector<double> bias;                  // decision = coef . K + bias
  std::vector<std::size_t> iterations;
  std::vector<bool> converged;
};

struct Prediction {
  int label = 0;
  std::vector<double> scores;  // one per class, class order
};

SvmModel train_svm(const Matrix& X, std::span<const int> y, const KernelSpec& kernel,
                   const SvmConfig& cfg, unsigned threads = 1);
std::vector<double> svm_decision(const SvmModel& model, std::span<const double> v);
Prediction predict_svm(const SvmModel& model, std::span<const double> v);

struct KnnModel {
  Matrix X;
  std::vector<int> y;
  int k = 5;
  int num_classes = 0;
};

KnnModel train_knn(const Matrix& X, std::span<const int> y, int k);
/// Majority vote of the k nearest rows (distance ties: lower row first; vote
/// ties: lower class). Scores are vote fractions.
Prediction predict_knn(const KnnModel& model, std::span<const double> v);

struct LogRegConfig {
  double l2 = 1e-3;
  double learning_rate = 0.1;
  int max_iter = 1000;
  double tol = 1e-5;  // stop when the gradient norm falls below this
};

struct LogRegModel {
  Matrix weights;  // classes x dim
  std::vector<double> bias;
  double l2 = 0.0;
  std::vector<double> objective_history;
  int iterations = 0;
};

/// Full-batch gradient descent on mean softmax cross-entropy plus
/// (l2 / 2) * ||W||^2, starting from zero parameters.
LogRegModel train_logreg(const Matrix& X, std::span<const int> y, const LogRegConfig& cfg);
double logreg_objective(const LogRegModel& model, const Matrix& X, std::span<const int> y);
/// Gradient w.r.t. weights (same shape) and bias.
void logreg_gradient(const LogRegModel& model, const Matrix& X, std::span<const int> y,
                     Matrix& grad_w, std::vector<double>& grad_b);
Prediction predict_logreg(const LogRegModel& model, std::span<const double> v);

enum class ClassifierKind { svm, knn, logreg };

std::string to_string(ClassifierKind kind);

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::svm;
  KernelSpec kernel;
  SvmConfig svm;
  int knn_k = 5;
  LogRegConfig logreg;
};

using ClassifierModel = std::variant<SvmModel, KnnModel, LogRegModel>;

ClassifierModel train_classifier(const ClassifierConfig& cfg, const Matrix& X,
                                 std::span<const int> y, unsigned threads = 1);
Prediction predict(const ClassifierModel& model, std::span<const double> v);
std::size_t input_dim(const ClassifierModel& model);

inline constexpr int kClassifierSchemaVersion = 1;
nlohmann::json to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ClassifierModel& model);
ClassifierModel classifier_from_json(const nlohmann::json& doc);

}  // namespace pyrabow
