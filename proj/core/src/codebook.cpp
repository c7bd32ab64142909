#include "pyrabow/codebook.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "pyrabow/error.hpp"
#include "pyrabow/parallel.hpp"

namespace pyrabow {
namespace {

template <class T>
std::pair<std::size_t, double> nearest(const Matrix& centroids, std::span<const T> v) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    auto row = centroids.row(c);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double d = static_cast<double>(v[j]) - row[j];
      s += d * d;
    }
    if (s < best_d) {
      best_d = s;
      best = c;
    }
  }
  return {best, best_d};
}

Matrix seed_kmeanspp(const Matrix& points, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.rows();
  Matrix centroids;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t first = pick(rng);
  centroids.append_row(points.row(first));

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), points.row(first));

  while (centroids.rows() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);  // every point already coincides with a seed
    }
    centroids.append_row(points.row(chosen));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(points.row(i), points.row(chosen)));
  }
  return centroids;
}

Matrix seed_random(const Matrix& points, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> all(points.rows());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> chosen;
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), k, rng);
  return points.select_rows(chosen);
}

}  // namespace

void KMeansConfig::validate() const {
  if (k < 1) throw Error("k-means k must be >= 1");
  if (max_iter < 1) throw Error("k-means max_iter must be >= 1");
  if (!(tol >= 0.0)) throw Error("k-means tol must be >= 0");
}

Codebook train_codebook(const Matrix& points, const KMeansConfig& cfg, unsigned threads) {
  cfg.validate();
  const std::size_t n = points.rows();
  const std::size_t k = static_cast<std::size_t>(cfg.k);
  const std::size_t dim = points.cols();
  if (n == 0) throw Error("k-means needs at least one point");
  if (n < k)
    throw Error("k-means needs at least k points (k=" + std::to_string(k) +
                ", points=" + std::to_string(n) + ")");

  std::mt19937_64 rng(cfg.seed);
  Codebook cb;
  cb.config = cfg;
  cb.centroids = cfg.init == KMeansInit::kmeanspp ? seed_kmeanspp(points, k, rng)
                                                  : seed_random(points, k, rng);

  std::vector<std::size_t> label(n);
  std::vector<double> dist(n);
  auto assign_all = [&] {
    parallel_for(n, threads, [&](std::size_t i) {
      auto [c, d] = nearest(cb.centroids, points.row(i));
      label[i] = c;
      dist[i] = d;
    });
    return std::accumulate(dist.begin(), dist.end(), 0.0);
  };

  double objective = assign_all();
  cb.objective_history.push_back(objective);

  for (int it = 1; it <= cfg.max_iter; ++it) {
    Matrix sums(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto src = points.row(i);
      auto dst = sums.row(label[i]);
      for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
      ++counts[label[i]];
    }
    std::vector<std::size_t> empty;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        empty.push_back(c);
        continue;
      }
      auto row = cb.centroids.row(c);
      auto s = sums.row(c);
      for (std::size_t j = 0; j < dim; ++j) row[j] = s[j] / static_cast<double>(counts[c]);
    }
    if (!empty.empty()) {
      std::vector<double> moved(n);
      for (std::size_t i = 0; i < n; ++i)
        moved[i] = squared_distance(points.row(i), cb.centroids.row(label[i]));
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return moved[a] > moved[b];
      });
      for (std::size_t e = 0; e < empty.size(); ++e) {
        auto src = points.row(order[e]);
        std::copy(src.begin(), src.end(), cb.centroids.row(empty[e]).begin());
      }
    }

    const double next = assign_all();
    if (next > objective * (1.0 + 1e-12) + 1e-12)
      throw std::logic_error("k-means objective increased from " +
                             std::to_string(objective) + " to " + std::to_string(next));
    cb.objective_history.push_back(next);
    cb.iterations = it;
    const double improvement = objective > 0.0 ? (objective - next) / objective : 0.0;
    objective = next;
    if (objective == 0.0 || improvement < cfg.tol) {
      cb.converged = true;
      break;
    }
  }
  cb.objective = objective;
  return cb;
}

std::size_t assign(const Codebook& cb, std::span<const double> v) {
  if (v.size() != cb.dim())
    throw Error("descriptor dimension " + std::to_string(v.size()) +
                " does not match codebook dimension " + std::to_string(cb.dim()));
  return nearest(cb.centroids, v).first;
}

std::size_t assign(const Codebook& cb, std::span<const float> v) {
  if (v.size() != cb.dim())
    throw Error("descriptor dimension " + std::to_string(v.size()) +
                " does not match codebook dimension " + std::to_string(cb.dim()));
  return nearest(cb.centroids, v).first;
}

std::vector<int> quantize_image(const Codebook& cb, std::span<const Descriptor> descs) {
  std::vector<int> words;
  words.reserve(descs.size());
  for (const auto& d : descs) words.push_back(static_cast<int>(assign(cb, std::span<const float>(d))));
  return words;
}

Matrix to_matrix(std::span<const Descriptor> descs) {
  Matrix m(descs.size(), kDescriptorDim);
  for (std::size_t i = 0; i < descs.size(); ++i)
    std::copy(descs[i].begin(), descs[i].end(), m.row(i).begin());
  return m;
}

Matrix pool_descriptors(std::span<const DenseFeatures* const> images, std::size_t budget,
                        std::uint64_t seed) {
  std::size_t total = 0;
  for (const auto* f : images) total += f->descriptors.size();

  std::vector<std::size_t> keep;
  if (total > budget) {
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(seed);
    keep.reserve(budget);
    std::sample(all.begin(), all.end(), std::back_inserter(keep), budget, rng);
  }

  Matrix pool(total > budget ? budget : total, kDescriptorDim);
  std::size_t global = 0, out = 0, next = 0;
  for (const auto* f : images) {
    for (const auto& d : f->descriptors) {
      const bool take = total <= budget || (next < keep.size() && keep[next] == global);
      if (take) {
        std::copy(d.begin(), d.end(), pool.row(out++).begin());
        if (total > budget) ++next;
      }
      ++global;
    }
  }
  return pool;
}

nlohmann::json to_json(const KMeansConfig& cfg) {
  return {{"k", cfg.k},
          {"max_iter", cfg.max_iter},
          {"tol", cfg.tol},
          {"seed", cfg.seed},
          {"init", cfg.init == KMeansInit::kmeanspp ? "kmeans++" : "random-points"}};
}

nlohmann::json to_json(const Codebook& cb) {
  return {{"schema_version", kCodebookSchemaVersion},
          {"k", cb.k()},
          {"dim", cb.dim()},
          {"centroids", std::vector<double>(cb.centroids.data().begin(),
                                            cb.centroids.data().end())},
          {"objective", cb.objective},
          {"iterations", cb.iterations},
          {"converged", cb.converged},
          {"config", to_json(cb.config)}};
}

Codebook codebook_from_json(const nlohmann::json& doc) {
  if (doc.at("schema_version").get<int>() != kCodebookSchemaVersion)
    throw Error("unsupported codebook schema_version");
  const auto k = doc.at("k").get<std::size_t>();
  const auto dim = doc.at("dim").get<std::size_t>();
  const auto values = doc.at("centroids").get<std::vector<double>>();
  if (values.size() != k * dim) throw Error("codebook centroid count mismatch");
  Codebook cb;
  cb.centroids = Matrix(k, dim);
  std::copy(values.begin(), values.end(), cb.centroids.data().begin());
  cb.objective = doc.at("objective").get<double>();
  cb.iterations = doc.value("iterations", 0);
  cb.converged = doc.value("converged", false);
  const auto& c = doc.at("config");
  cb.config.k = c.at("k").get<int>();
  cb.config.max_iter = c.at("max_iter").get<int>();
  cb.config.tol = c.at("tol").get<double>();
  cb.config.seed = c.at("seed").get<std::uint64_t>();
  cb.config.init = c.at("init").get<std::string>() == "kmeans++" ? KMeansInit::kmeanspp
                                                                 : KMeansInit::random_points;
  return cb;
}

}  // namespace pyrabow
