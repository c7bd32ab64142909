#include "pyrabow/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pyrabow/error.hpp"
#include "pyrabow/parallel.hpp"

namespace pyrabow {
namespace {

constexpr double kTau = 1e-12;            // curvature floor for the SMO step
constexpr double kSupportThreshold = 1e-8;

void check_labels(std::span<const int> y, std::size_t rows) {
  if (y.size() != rows) throw Error("label count does not match sample count");
  for (int v : y)
    if (v < 0) throw Error("class labels must be non-negative");
}

int count_classes(std::span<const int> y) {
  return y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
}

int distinct_classes(std::span<const int> y) {
  std::vector<int> s(y.begin(), y.end());
  std::sort(s.begin(), s.end());
  return static_cast<int>(std::unique(s.begin(), s.end()) - s.begin());
}

void check_finite(const Matrix& X) {
  for (double v : X.data())
    if (!std::isfinite(v)) throw Error("features contain non-finite values");
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

void check_dim(std::size_t got, std::size_t want) {
  if (got != want)
    throw Error("input dimension " + std::to_string(got) + " does not match model dimension " +
                std::to_string(want));
}

std::vector<double> softmax(std::vector<double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - top);
    sum += z;
  }
  for (double& z : logits) z /= sum;
  return logits;
}

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"values", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from_json(const nlohmann::json& doc) {
  const auto rows = doc.at("rows").get<std::size_t>();
  const auto cols = doc.at("cols").get<std::size_t>();
  const auto values = doc.at("values").get<std::vector<double>>();
  if (values.size() != rows * cols) throw Error("matrix size mismatch in model file");
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data().begin());
  return m;
}

}  // namespace

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::linear: return "linear";
    case KernelKind::poly: return "poly";
    case KernelKind::rbf: return "rbf";
    case KernelKind::sigmoid: return "sigmoid";
    case KernelKind::hist_intersection: return "hist_intersection";
  }
  return "?";
}

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "linear") return KernelKind::linear;
  if (s == "poly") return KernelKind::poly;
  if (s == "rbf") return KernelKind::rbf;
  if (s == "sigmoid") return KernelKind::sigmoid;
  if (s == "hist_intersection") return KernelKind::hist_intersection;
  throw Error("unknown kernel '" + s + "'");
}

void KernelSpec::validate() const {
  if (degree < 1) throw Error("kernel degree must be >= 1");
  if (gamma && !(*gamma > 0.0)) throw Error("kernel gamma must be > 0");
}

double kernel_eval(const KernelSpec& spec, std::span<const double> a,
                   std::span<const double> b) {
  if (a.size() != b.size())
    throw Error("kernel inputs differ in dimension (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  auto gamma = [&] {
    if (!spec.gamma) throw Error("kernel gamma is unresolved");
    return *spec.gamma;
  };
  switch (spec.kind) {
    case KernelKind::linear:
      return dot(a, b);
    case KernelKind::poly:
      return std::pow(gamma() * dot(a, b) + spec.coef0, spec.degree);
    case KernelKind::rbf:
      return std::exp(-gamma() * squared_distance(a, b));
    case KernelKind::sigmoid:
      return std::tanh(gamma() * dot(a, b) + spec.coef0);
    case KernelKind::hist_intersection: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < 0.0 || b[i] < 0.0)
          throw Error("histogram intersection kernel needs non-negative inputs");
        s += std::min(a[i], b[i]);
      }
      return s;
    }
  }
  return 0.0;
}

KernelSpec resolve_gamma(KernelSpec spec, const Matrix& X) {
  if (spec.gamma) return spec;
  const auto values = X.data();
  if (values.empty()) {
    spec.gamma = 1.0;
    return spec;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  spec.gamma = var > 0.0 ? 1.0 / (static_cast<double>(X.cols()) * var) : 1.0;
  return spec;
}

Matrix gram_matrix(const KernelSpec& spec, const Matrix& X, const Matrix& Y,
                   unsigned threads) {
  Matrix g(X.rows(), Y.rows());
  if (X.rows() == 0 || Y.rows() == 0) return g;
  parallel_for(X.rows(), threads, [&](std::size_t i) {
    auto out = g.row(i);
    for (std::size_t j = 0; j < Y.rows(); ++j) out[j] = kernel_eval(spec, X.row(i), Y.row(j));
  });
  return g;
}

BinarySvmSolution solve_binary_svm(const Matrix& gram, std::span<const int> y, double C,
                                   double tol, std::size_t max_iter) {
  const std::size_t n = y.size();
  if (gram.rows() != n || gram.cols() != n) throw Error("gram matrix shape mismatch");
  if (!(C > 0.0)) throw Error("SVM penalty C must be > 0");

  BinarySvmSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of 0.5 a'Qa - e'a at a = 0
  auto& alpha = sol.alpha;
  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };
  auto Q = [&](std::size_t a, std::size_t b) { return y[a] * y[b] * gram(a, b); };

  while (sol.iterations < max_iter) {
    // i: maximal violating index in I_up.
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      const bool in_up = y[t] == 1 ? !upper(t) : !lower(t);
      if (in_up && -y[t] * grad[t] > gmax) {
        gmax = -y[t] * grad[t];
        i = t;
      }
    }
    // j: second-order selection over I_low.
    double gmin = std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const bool in_low = y[t] == 1 ? !lower(t) : !upper(t);
      if (!in_low) continue;
      const double v = -y[t] * grad[t];
      gmin = std::min(gmin, v);
      if (i == n) continue;
      const double b = gmax - v;
      if (b > 0.0) {
        double a = gram(i, i) + gram(t, t) - 2.0 * gram(i, t);
        if (a <= 0.0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj < best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    if (i == n || j == n || gmax - gmin < tol) {
      sol.converged = true;
      break;
    }

    const double Ci = C, Cj = C;
    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = -diff; }
      }
      if (diff > Ci - Cj) {
        if (alpha[i] > Ci) { alpha[i] = Ci; alpha[j] = Ci - diff; }
      } else {
        if (alpha[j] > Cj) { alpha[j] = Cj; alpha[i] = Cj + diff; }
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > Ci) {
        if (alpha[i] > Ci) { alpha[i] = Ci; alpha[j] = sum - Ci; }
      } else {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
      }
      if (sum > Cj) {
        if (alpha[j] > Cj) { alpha[j] = Cj; alpha[i] = sum - Cj; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += Q(t, i) * di + Q(t, j) * dj;
    ++sol.iterations;
  }

  // Bias from free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  if (free_count > 0) {
    sol.rho = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(ub) && std::isfinite(lb)) {
    sol.rho = (ub + lb) / 2.0;
  } else {
    sol.rho = std::isfinite(ub) ? ub : lb;  // single-sided problem
  }
  return sol;
}

SvmModel train_svm(const Matrix& X, std::span<const int> y, const KernelSpec& kernel,
                   const SvmConfig& cfg, unsigned threads) {
  check_labels(y, X.rows());
  if (distinct_classes(y) < 2) throw Error("SVM training needs at least 2 classes");
  if (!(cfg.C > 0.0)) throw Error("SVM penalty C must be > 0");
  kernel.validate();
  check_finite(X);

  SvmModel model;
  model.kernel = resolve_gamma(kernel, X);
  model.num_classes = count_classes(y);
  model.C = cfg.C;
  const std::size_t n = X.rows();
  const std::size_t max_iter = cfg.max_iter == 0 ? 10 * n : cfg.max_iter;
  const Matrix gram = gram_matrix(model.kernel, X, X, threads);

  const auto classes = static_cast<std::size_t>(model.num_classes);
  std::vector<BinarySvmSolution> solutions(classes);
  parallel_for(classes, threads, [&](std::size_t c) {
    std::vector<int> yb(n);
    for (std::size_t t = 0; t < n; ++t) yb[t] = y[t] == static_cast<int>(c) ? 1 : -1;
    solutions[c] = solve_binary_svm(gram, yb, cfg.C, cfg.tol, max_iter);
  });

  std::vector<std::size_t> pool;
  for (std::size_t t = 0; t < n; ++t) {
    for (const auto& s : solutions) {
      if (s.alpha[t] > kSupportThreshold) {
        pool.push_back(t);
        break;
      }
    }
  }
  model.support_indices = pool;
  model.support_vectors = X.select_rows(pool);
  model.dual_coef = Matrix(classes, pool.size());
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t s = 0; s < pool.size(); ++s) {
      const double a = solutions[c].alpha[pool[s]];
      if (a > kSupportThreshold)
        model.dual_coef(c, s) = y[pool[s]] == static_cast<int>(c) ? a : -a;
    }
    model.bias.push_back(-solutions[c].rho);
    model.iterations.push_back(solutions[c].iterations);
    model.converged.push_back(solutions[c].converged);
  }
  return model;
}

std::vector<double> svm_decision(const SvmModel& model, std::span<const double> v) {
  check_dim(v.size(), model.support_vectors.cols());
  std::vector<double> k(model.support_vectors.rows());
  for (std::size_t s = 0; s < k.size(); ++s)
    k[s] = kernel_eval(model.kernel, model.support_vectors.row(s), v);
  std::vector<double> scores(static_cast<std::size_t>(model.num_classes));
  for (std::size_t c = 0; c < scores.size(); ++c)
    scores[c] = dot(model.dual_coef.row(c), k) + model.bias[c];
  return scores;
}

Prediction predict_svm(const SvmModel& model, std::span<const double> v) {
  Prediction p;
  p.scores = svm_decision(model, v);
  p.label = argmax_lowest(p.scores);
  return p;
}

KnnModel train_knn(const Matrix& X, std::span<const int> y, int k) {
  if (X.rows() == 0) throw Error("k-NN needs a non-empty training set");
  check_labels(y, X.rows());
  if (k < 1 || static_cast<std::size_t>(k) > X.rows())
    throw Error("k-NN k must lie in [1, training size]");
  return {X, std::vector<int>(y.begin(), y.end()), k, count_classes(y)};
}

Prediction predict_knn(const KnnModel& model, std::span<const double> v) {
  check_dim(v.size(), model.X.cols());
  const std::size_t n = model.X.rows();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = {squared_distance(model.X.row(i), v), i};
  const auto k = static_cast<std::size_t>(model.k);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  Prediction p;
  p.scores.assign(static_cast<std::size_t>(model.num_classes), 0.0);
  for (std::size_t i = 0; i < k; ++i)
    p.scores[static_cast<std::size_t>(model.y[dist[i].second])] += 1.0 / static_cast<double>(k);
  p.label = argmax_lowest(p.scores);
  return p;
}

namespace {

std::vector<double> logits(const LogRegModel& m, std::span<const double> v) {
  std::vector<double> z(m.bias);
  for (std::size_t c = 0; c < z.size(); ++c) z[c] += dot(m.weights.row(c), v);
  return z;
}

}  // namespace

double logreg_objective(const LogRegModel& model, const Matrix& X, std::span<const int> y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto z = logits(model, X.row(i));
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    loss += top + std::log(sum) - z[static_cast<std::size_t>(y[i])];
  }
  loss /= static_cast<double>(X.rows());
  double reg = 0.0;
  for (double w : model.weights.data()) reg += w * w;
  return loss + 0.5 * model.l2 * reg;
}

void logreg_gradient(const LogRegModel& model, const Matrix& X, std::span<const int> y,
                     Matrix& grad_w, std::vector<double>& grad_b) {
  const std::size_t C = model.weights.rows(), D = model.weights.cols();
  grad_w = Matrix(C, D);
  grad_b.assign(C, 0.0);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    auto p = softmax(logits(model, X.row(i)));
    p[static_cast<std::size_t>(y[i])] -= 1.0;
    auto x = X.row(i);
    for (std::size_t c = 0; c < C; ++c) {
      auto g = grad_w.row(c);
      for (std::size_t d = 0; d < D; ++d) g[d] += p[c] * x[d] * inv_n;
      grad_b[c] += p[c] * inv_n;
    }
  }
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t d = 0; d < D; ++d) grad_w(c, d) += model.l2 * model.weights(c, d);
}

LogRegModel train_logreg(const Matrix& X, std::span<const int> y, const LogRegConfig& cfg) {
  check_labels(y, X.rows());
  if (distinct_classes(y) < 2) throw Error("logistic regression needs at least 2 classes");
  if (cfg.l2 < 0.0 || !(cfg.learning_rate > 0.0) || cfg.max_iter < 0)
    throw Error("invalid logistic regression settings");
  check_finite(X);

  LogRegModel m;
  const auto C = static_cast<std::size_t>(count_classes(y));
  m.weights = Matrix(C, X.cols());
  m.bias.assign(C, 0.0);
  m.l2 = cfg.l2;
  m.objective_history.push_back(logreg_objective(m, X, y));

  Matrix gw;
  std::vector<double> gb;
  for (int it = 0; it < cfg.max_iter; ++it) {
    logreg_gradient(m, X, y, gw, gb);
    double norm2 = 0.0;
    for (double g : gw.data()) norm2 += g * g;
    for (double g : gb) norm2 += g * g;
    if (std::sqrt(norm2) < cfg.tol) break;
    auto w = m.weights.data();
    auto g = gw.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * g[i];
    for (std::size_t c = 0; c < C; ++c) m.bias[c] -= cfg.learning_rate * gb[c];
    m.objective_history.push_back(logreg_objective(m, X, y));
    m.iterations = it + 1;
  }
  return m;
}

Prediction predict_logreg(const LogRegModel& model, std::span<const double> v) {
  check_dim(v.size(), model.weights.cols());
  Prediction p;
  p.scores = softmax(logits(model, v));
  p.label = argmax_lowest(p.scores);
  return p;
}

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::svm: return "svm";
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::logreg: return "logreg";
  }
  return "?";
}

ClassifierModel train_classifier(const ClassifierConfig& cfg, const Matrix& X,
                                 std::span<const int> y, unsigned threads) {
  switch (cfg.kind) {
    case ClassifierKind::svm: return train_svm(X, y, cfg.kernel, cfg.svm, threads);
    case ClassifierKind::knn: return train_knn(X, y, cfg.knn_k);
    case ClassifierKind::logreg: return train_logreg(X, y, cfg.logreg);
  }
  throw Error("unknown classifier kind");
}

Prediction predict(const ClassifierModel& model, std::span<const double> v) {
  struct Visitor {
    std::span<const double> v;
    Prediction operator()(const SvmModel& m) const { return predict_svm(m, v); }
    Prediction operator()(const KnnModel& m) const { return predict_knn(m, v); }
    Prediction operator()(const LogRegModel& m) const { return predict_logreg(m, v); }
  };
  return std::visit(Visitor{v}, model);
}

std::size_t input_dim(const ClassifierModel& model) {
  struct Visitor {
    std::size_t operator()(const SvmModel& m) const { return m.support_vectors.cols(); }
    std::size_t operator()(const KnnModel& m) const { return m.X.cols(); }
    std::size_t operator()(const LogRegModel& m) const { return m.weights.cols(); }
  };
  return std::visit(Visitor{}, model);
}

nlohmann::json to_json(const KernelSpec& spec) {
  nlohmann::json j = {{"kind", to_string(spec.kind)},
                      {"degree", spec.degree},
                      {"coef0", spec.coef0}};
  if (spec.gamma) j["gamma"] = *spec.gamma; else j["gamma"] = "scale";
  return j;
}

KernelSpec kernel_from_json(const nlohmann::json& doc) {
  KernelSpec s;
  s.kind = kernel_kind_from_string(doc.at("kind").get<std::string>());
  s.degree = doc.value("degree", 3);
  s.coef0 = doc.value("coef0", 0.0);
  if (doc.contains("gamma") && doc.at("gamma").is_number())
    s.gamma = doc.at("gamma").get<double>();
  return s;
}

nlohmann::json to_json(const ClassifierModel& model) {
  nlohmann::json j = {{"schema_version", kClassifierSchemaVersion}};
  if (const auto* m = std::get_if<SvmModel>(&model)) {
    j["kind"] = "svm";
    j["kernel"] = to_json(m->kernel);
    j["num_classes"] = m->num_classes;
    j["C"] = m->C;
    j["support_vectors"] = matrix_json(m->support_vectors);
    j["support_indices"] = m->support_indices;
    j["dual_coef"] = matrix_json(m->dual_coef);
    j["bias"] = m->bias;
    j["iterations"] = m->iterations;
    j["converged"] = m->converged;
  } else if (const auto* m = std::get_if<KnnModel>(&model)) {
    j["kind"] = "knn";
    j["k"] = m->k;
    j["num_classes"] = m->num_classes;
    j["X"] = matrix_json(m->X);
    j["y"] = m->y;
  } else if (const auto* m = std::get_if<LogRegModel>(&model)) {
    j["kind"] = "logreg";
    j["weights"] = matrix_json(m->weights);
    j["bias"] = m->bias;
    j["l2"] = m->l2;
    j["iterations"] = m->iterations;
  }
  return j;
}

ClassifierModel classifier_from_json(const nlohmann::json& doc) {
  if (doc.at("schema_version").get<int>() != kClassifierSchemaVersion)
    throw Error("unsupported classifier schema_version");
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "svm") {
    SvmModel m;
    m.kernel = kernel_from_json(doc.at("kernel"));
    m.num_classes = doc.at("num_classes").get<int>();
    m.C = doc.at("C").get<double>();
    m.support_vectors = matrix_from_json(doc.at("support_vectors"));
    m.support_indices = doc.at("support_indices").get<std::vector<std::size_t>>();
    m.dual_coef = matrix_from_json(doc.at("dual_coef"));
    m.bias = doc.at("bias").get<std::vector<double>>();
    m.iterations = doc.value("iterations", std::vector<std::size_t>{});
    m.converged = doc.value("converged", std::vector<bool>{});
    if (m.dual_coef.rows() != static_cast<std::size_t>(m.num_classes) ||
        m.bias.size() != static_cast<std::size_t>(m.num_classes))
      throw Error("svm model shape mismatch");
    return m;
  }
  if (kind == "knn") {
    KnnModel m;
    m.k = doc.at("k").get<int>();
    m.num_classes = doc.at("num_classes").get<int>();
    m.X = matrix_from_json(doc.at("X"));
    m.y = doc.at("y").get<std::vector<int>>();
    return m;
  }
  if (kind == "logreg") {
    LogRegModel m;
    m.weights = matrix_from_json(doc.at("weights"));
    m.bias = doc.at("bias").get<std::vector<double>>();
    m.l2 = doc.at("l2").get<double>();
    m.iterations = doc.value("iterations", 0);
    return m;
  }
  throw Error("unknown classifier kind '" + kind + "'");
}

}  // namespace pyrabow
