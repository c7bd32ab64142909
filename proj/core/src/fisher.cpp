#include "pyrabow/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "pyrabow/codebook.hpp"
#include "pyrabow/error.hpp"
#include "pyrabow/parallel.hpp"

namespace pyrabow {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

// Per-component log(w_k) - 0.5 * sum_d log(2*pi*var_kd).
std::vector<double> component_constants(const GmmModel& m) {
  std::vector<double> c(m.num_components());
  for (std::size_t k = 0; k < c.size(); ++k) {
    double s = 0.0;
    for (double v : m.variances.row(k)) s += kLog2Pi + std::log(v);
    c[k] = (m.weights[k] > 0.0 ? std::log(m.weights[k])
                               : -std::numeric_limits<double>::infinity()) -
           0.5 * s;
  }
  return c;
}

// Fills `gamma` (length K) with posteriors for x and returns log p(x).
double posterior_row(const GmmModel& m, const std::vector<double>& consts,
                     std::span<const double> x, std::span<double> gamma) {
  const std::size_t K = m.num_components(), D = m.dim();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    auto mu = m.means.row(k);
    auto var = m.variances.row(k);
    double q = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const double diff = x[d] - mu[d];
      q += diff * diff / var[d];
    }
    gamma[k] = consts[k] - 0.5 * q;
    top = std::max(top, gamma[k]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    gamma[k] = std::exp(gamma[k] - top);
    sum += gamma[k];
  }
  for (std::size_t k = 0; k < K; ++k) gamma[k] /= sum;
  return top + std::log(sum);
}

// E-step: responsibilities into `gamma`, returns mean log-likelihood.
double expectation(const GmmModel& m, const Matrix& points, Matrix& gamma,
                   unsigned threads) {
  const auto consts = component_constants(m);
  std::vector<double> logp(points.rows());
  parallel_for(points.rows(), threads, [&](std::size_t n) {
    logp[n] = posterior_row(m, consts, points.row(n), gamma.row(n));
  });
  double total = 0.0;
  for (double v : logp) total += v;
  return total / static_cast<double>(points.rows());
}

void maximization(GmmModel& m, const Matrix& points, const Matrix& gamma, double floor,
                  unsigned threads) {
  const std::size_t N = points.rows(), K = m.num_components(), D = m.dim();
  parallel_for(K, threads, [&](std::size_t k) {
    double nk = 0.0;
    std::vector<double> mu(D, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      const double g = gamma(n, k);
      nk += g;
      auto x = points.row(n);
      for (std::size_t d = 0; d < D; ++d) mu[d] += g * x[d];
    }
    m.weights[k] = nk / static_cast<double>(N);
    if (nk <= 0.0) return;  // dead component keeps its Gaussian, weight 0
    for (double& v : mu) v /= nk;
    std::vector<double> var(D, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      const double g = gamma(n, k);
      auto x = points.row(n);
      for (std::size_t d = 0; d < D; ++d) {
        const double diff = x[d] - mu[d];
        var[d] += g * diff * diff;
      }
    }
    auto mrow = m.means.row(k);
    auto vrow = m.variances.row(k);
    for (std::size_t d = 0; d < D; ++d) {
      mrow[d] = mu[d];
      vrow[d] = std::max(var[d] / nk, floor);
    }
  });
}

}  // namespace

void GmmConfig::validate() const {
  if (components < 1) throw Error("gmm components must be >= 1");
  if (max_iter < 0) throw Error("gmm max_iter must be >= 0");
  if (!(tol >= 0.0)) throw Error("gmm tol must be >= 0");
  if (!(variance_floor > 0.0)) throw Error("gmm variance_floor must be > 0");
}

GmmModel train_gmm(const Matrix& points, const GmmConfig& cfg, unsigned threads) {
  cfg.validate();
  const std::size_t N = points.rows(), K = static_cast<std::size_t>(cfg.components);
  const std::size_t D = points.cols();
  if (N == 0) throw Error("gmm needs at least one point");
  if (N < K)
    throw Error("gmm needs at least K points (K=" + std::to_string(K) +
                ", points=" + std::to_string(N) + ")");

  KMeansConfig km;
  km.k = cfg.components;
  km.seed = cfg.seed;
  km.max_iter = std::max(cfg.max_iter, 1);
  const Codebook init = train_codebook(points, km, threads);

  GmmModel m;
  m.means = init.centroids;
  m.weights.assign(K, 1.0 / static_cast<double>(K));
  m.variances = Matrix(K, D);

  std::vector<double> global_mean(D, 0.0), global_var(D, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t d = 0; d < D; ++d) global_mean[d] += points(n, d);
  for (double& v : global_mean) v /= static_cast<double>(N);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t d = 0; d < D; ++d) {
      const double diff = points(n, d) - global_mean[d];
      global_var[d] += diff * diff;
    }
  for (double& v : global_var) v /= static_cast<double>(N);

  std::vector<std::size_t> counts(K, 0);
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t c = assign(init, points.row(n));
    ++counts[c];
    auto x = points.row(n);
    auto mu = m.means.row(c);
    auto var = m.variances.row(c);
    for (std::size_t d = 0; d < D; ++d) {
      const double diff = x[d] - mu[d];
      var[d] += diff * diff;
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    auto var = m.variances.row(k);
    for (std::size_t d = 0; d < D; ++d) {
      const double v = counts[k] > 0 ? var[d] / static_cast<double>(counts[k]) : global_var[d];
      var[d] = std::max(v, cfg.variance_floor);
    }
  }

  Matrix gamma(N, K);
  double ll = expectation(m, points, gamma, threads);
  m.log_likelihood_history.push_back(ll);
  for (int it = 0; it < cfg.max_iter; ++it) {
    maximization(m, points, gamma, cfg.variance_floor, threads);
    const double next = expectation(m, points, gamma, threads);
    if (next < ll - 1e-9 * std::max(1.0, std::abs(ll)))
      throw std::logic_error("gmm log-likelihood decreased from " + std::to_string(ll) +
                             " to " + std::to_string(next));
    m.log_likelihood_history.push_back(next);
    const double improvement = (next - ll) / std::max(std::abs(ll), 1e-300);
    ll = next;
    if (improvement < cfg.tol) break;
  }
  return m;
}

Matrix gmm_posteriors(const GmmModel& model, const Matrix& points) {
  if (points.cols() != model.dim() && !points.empty())
    throw Error("point dimension does not match gmm dimension");
  Matrix gamma(points.rows(), model.num_components());
  expectation(model, points, gamma, 1);
  return gamma;
}

double gmm_log_likelihood(const GmmModel& model, const Matrix& points) {
  if (points.empty()) throw Error("log-likelihood of an empty set");
  Matrix gamma(points.rows(), model.num_components());
  return expectation(model, points, gamma, 1);
}

std::vector<double> fisher_encode_raw(const GmmModel& model, const Matrix& descs,
                                      bool include_weight_block) {
  if (descs.empty()) throw Error("fisher encoding needs at least one descriptor");
  if (descs.cols() != model.dim())
    throw Error("descriptor dimension does not match gmm dimension");
  const std::size_t N = descs.rows(), K = model.num_components(), D = model.dim();
  const Matrix gamma = gmm_posteriors(model, descs);

  std::vector<double> out(2 * K * D + (include_weight_block ? K : 0), 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double w = model.weights[k];
    if (w <= 0.0) continue;
    auto mu = model.means.row(k);
    auto var = model.variances.row(k);
    double* mean_block = out.data() + k * D;
    double* var_block = out.data() + K * D + k * D;
    double weight_acc = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double g = gamma(n, k);
      weight_acc += g - w;
      if (g == 0.0) continue;
      auto x = descs.row(n);
      for (std::size_t d = 0; d < D; ++d) {
        const double z = (x[d] - mu[d]) / std::sqrt(var[d]);
        mean_block[d] += g * z;
        var_block[d] += g * (z * z - 1.0);
      }
    }
    const double nf = static_cast<double>(N);
    const double mean_scale = 1.0 / (nf * std::sqrt(w));
    const double var_scale = 1.0 / (nf * std::sqrt(2.0 * w));
    for (std::size_t d = 0; d < D; ++d) {
      mean_block[d] *= mean_scale;
      var_block[d] *= var_scale;
    }
    if (include_weight_block) out[2 * K * D + k] = weight_acc * mean_scale;
  }
  return out;
}

FeatureVector fisher_encode(const GmmModel& model, const Matrix& descs,
                            bool include_weight_block) {
  FeatureVector fv;
  fv.tag = EncodingTag::fisher;
  fv.block_size = 0;
  fv.values = fisher_encode_raw(model, descs, include_weight_block);
  double norm = 0.0;
  for (double& v : fv.values) {
    v = std::copysign(std::sqrt(std::abs(v)), v);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& v : fv.values) v /= norm;
  return fv;
}

FeatureVector fisher_encode(const GmmModel& model, std::span<const Descriptor> descs,
                            bool include_weight_block) {
  return fisher_encode(model, to_matrix(descs), include_weight_block);
}

nlohmann::json to_json(const GmmModel& model) {
  return {{"schema_version", kGmmSchemaVersion},
          {"K", model.num_components()},
          {"dim", model.dim()},
          {"weights", model.weights},
          {"means", std::vector<double>(model.means.data().begin(), model.means.data().end())},
          {"variances", std::vector<double>(model.variances.data().begin(),
                                            model.variances.data().end())},
          {"log_likelihood_history", model.log_likelihood_history}};
}

GmmModel gmm_from_json(const nlohmann::json& doc) {
  if (doc.at("schema_version").get<int>() != kGmmSchemaVersion)
    throw Error("unsupported gmm schema_version");
  const auto K = doc.at("K").get<std::size_t>();
  const auto D = doc.at("dim").get<std::size_t>();
  GmmModel m;
  m.weights = doc.at("weights").get<std::vector<double>>();
  const auto means = doc.at("means").get<std::vector<double>>();
  const auto vars = doc.at("variances").get<std::vector<double>>();
  if (m.weights.size() != K || means.size() != K * D || vars.size() != K * D)
    throw Error("gmm parameter size mismatch");
  m.means = Matrix(K, D);
  m.variances = Matrix(K, D);
  std::copy(means.begin(), means.end(), m.means.data().begin());
  std::copy(vars.begin(), vars.end(), m.variances.data().begin());
  m.log_likelihood_history =
      doc.value("log_likelihood_history", std::vector<double>{});
  return m;
}

}  // namespace pyrabow
