#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "pyrabow/encoding.hpp"
#include "pyrabow/features.hpp"
#include "pyrabow/matrix.hpp"

namespace pyrabow {

struct GmmConfig {
  int components = 64;
  int max_iter = 100;
  double tol = 1e-6;  // relative log-likelihood improvement
  std::uint64_t seed = 0;
  double variance_floor = 1e-4;

  void validate() const;
};

/// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  std::vector<double> weights;
  Matrix means;      // K x D
  Matrix variances;  // K x D, every entry >= the floor used in training
  /// Mean per-sample log-likelihood before EM and after each iteration.
  std::vector<double> log_likelihood_history;

  std::size_t num_components() const { return weights.size(); }
  std::size_t dim() const { return means.cols(); }
};

/// Means start at k-means centroids, weights uniform, variances at the
/// floored within-cluster variance; then EM until the relative improvement
/// drops below tol. Throws std::logic_error if the log-likelihood decreases.
GmmModel train_gmm(const Matrix& points, const GmmConfig& cfg, unsigned threads = 1);

/// Posterior responsibilities, one row per point; rows sum to 1.
Matrix gmm_posteriors(const GmmModel& model, const Matrix& points);

/// Mean per-sample log-likelihood of `points`.
double gmm_log_likelihood(const GmmModel& model, const Matrix& points);

/// Gradient statistics before any normalisation: K*D mean-gradient entries,
/// then K*D variance-gradient entries (component-major), then K weight
/// entries when `include_weight_block` is set.
std::vector<double> fisher_encode_raw(const GmmModel& model, const Matrix& descs,
                                      bool include_weight_block = false);

/// Raw statistics followed by signed square root and global L2 normalisation.
FeatureVector fisher_encode(const GmmModel& model, const Matrix& descs,
                            bool include_weight_block = false);
FeatureVector fisher_encode(const GmmModel& model, std::span<const Descriptor> descs,
                            bool include_weight_block = false);

inline constexpr int kGmmSchemaVersion = 1;
nlohmann::json to_json(const GmmModel& model);
GmmModel gmm_from_json(const nlohmann::json& doc);

}  // namespace pyrabow
