#include "pyrabow/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "pyrabow/error.hpp"

namespace pyrabow {
namespace {

int boundary(int i, int length, int n) {
  return static_cast<int>(static_cast<long long>(i) * length / n);
}

// Index of the cell containing coord on an axis split into n parts; the last
// cell is closed at `length`.
int cell_of(double coord, int length, int n) {
  if (coord < 0.0 || coord > length)
    throw Error("keypoint coordinate " + std::to_string(coord) +
                " lies outside the image");
  int i = std::min(n - 1, static_cast<int>(coord * n / length));
  while (i > 0 && coord < boundary(i, length, n)) --i;
  while (i < n - 1 && coord >= boundary(i + 1, length, n)) ++i;
  return i;
}

void normalize_blocks(std::vector<double>& values, std::size_t block, NormKind kind) {
  if (block == 0) block = values.size();
  for (std::size_t start = 0; start < values.size(); start += block) {
    const std::size_t end = std::min(values.size(), start + block);
    double denom = 0.0;
    if (kind == NormKind::l2) {
      for (std::size_t i = start; i < end; ++i) denom += values[i] * values[i];
      denom = std::sqrt(denom);
    } else {
      for (std::size_t i = start; i < end; ++i) denom += values[i];
    }
    for (std::size_t i = start; i < end; ++i)
      values[i] = denom == 0.0 ? 0.0 : values[i] / denom;
  }
}

void check_finite(const Matrix& m, const char* what) {
  for (double v : m.data())
    if (!std::isfinite(v)) throw Error(std::string(what) + " contains non-finite values");
}

}  // namespace

std::size_t region_count(const PyramidSpec& spec) {
  std::size_t total = 0;
  for (int l = 0; l <= spec.level; ++l) {
    if (spec.shape == PyramidShape::square) {
      total += std::size_t{1} << (2 * l);
    } else {
      total += l == 0 ? 1 : static_cast<std::size_t>(3 * l);
    }
  }
  return total;
}

RegionLayout pyramid_regions(const PyramidSpec& spec, int width, int height) {
  if (spec.level < 0) throw Error("pyramid level must be >= 0");
  RegionLayout layout;
  layout.width = width;
  layout.height = height;
  for (int l = 0; l <= spec.level; ++l) {
    RegionLayout::Level lv;
    lv.first = layout.regions.size();
    if (spec.shape == PyramidShape::square) {
      lv.cols = lv.rows = 1 << l;
    } else {
      lv.cols = 1;
      lv.rows = l == 0 ? 1 : 3 * l;
    }
    if (width < lv.cols || height < lv.rows)
      throw Error("image " + std::to_string(width) + "x" + std::to_string(height) +
                  " is too small for pyramid level " + std::to_string(l));
    for (int r = 0; r < lv.rows; ++r) {
      for (int c = 0; c < lv.cols; ++c) {
        layout.regions.push_back({boundary(c, width, lv.cols), boundary(r, height, lv.rows),
                                  boundary(c + 1, width, lv.cols),
                                  boundary(r + 1, height, lv.rows)});
      }
    }
    layout.levels.push_back(lv);
  }
  return layout;
}

std::string to_string(EncodingTag tag) {
  switch (tag) {
    case EncodingTag::bovw: return "bovw";
    case EncodingTag::bovw_pca: return "bovw+pca";
    case EncodingTag::fisher: return "fisher";
  }
  return "?";
}

FeatureVector encode_bovw(std::span<const Keypoint> kps, std::span<const int> words,
                          const RegionLayout& layout, int k) {
  if (kps.size() != words.size())
    throw Error("keypoint and word lists differ in length");
  if (k < 1) throw Error("codebook size must be >= 1");
  FeatureVector fv;
  fv.tag = EncodingTag::bovw;
  fv.block_size = static_cast<std::size_t>(k);
  fv.values.assign(layout.size() * fv.block_size, 0.0);
  for (std::size_t i = 0; i < kps.size(); ++i) {
    const int w = words[i];
    if (w < 0 || w >= k)
      throw Error("word index " + std::to_string(w) + " out of range for k=" +
                  std::to_string(k));
    for (const auto& lv : layout.levels) {
      const int col = cell_of(kps[i].x, layout.width, lv.cols);
      const int row = cell_of(kps[i].y, layout.height, lv.rows);
      const std::size_t region = lv.first + static_cast<std::size_t>(row * lv.cols + col);
      fv.values[region * fv.block_size + static_cast<std::size_t>(w)] += 1.0;
    }
  }
  return fv;
}

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::none: return "none";
    case NormKind::l2: return "l2";
    case NormKind::sum: return "sum";
    case NormKind::standard: return "standard";
  }
  return "?";
}

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "none") return NormKind::none;
  if (s == "l2") return NormKind::l2;
  if (s == "sum") return NormKind::sum;
  if (s == "standard") return NormKind::standard;
  throw Error("unknown normalization '" + s + "'");
}

FeatureVector normalize(const FeatureVector& v, NormKind kind, const ScalerStats* stats) {
  FeatureVector out = v;
  switch (kind) {
    case NormKind::none:
      break;
    case NormKind::l2:
    case NormKind::sum:
      normalize_blocks(out.values, out.block_size, kind);
      break;
    case NormKind::standard:
      if (stats == nullptr) throw Error("standard normalization needs fitted scaler stats");
      if (stats->mean.size() != v.size() || stats->std.size() != v.size())
        throw Error("scaler stats have dimension " + std::to_string(stats->mean.size()) +
                    ", vector has " + std::to_string(v.size()));
      for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] =
            stats->std[i] > 0.0 ? (out.values[i] - stats->mean[i]) / stats->std[i] : 0.0;
      }
      break;
  }
  return out;
}

ScalerStats fit_scaler(const Matrix& train) {
  if (train.rows() == 0) throw Error("cannot fit a scaler on zero vectors");
  if (train.rows() < 2) throw Error("fitting a scaler needs at least 2 vectors");
  const std::size_t d = train.cols();
  // Welford's running update.
  std::vector<double> mean(d, 0.0), m2(d, 0.0);
  for (std::size_t r = 0; r < train.rows(); ++r) {
    const double n = static_cast<double>(r + 1);
    auto row = train.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = row[j] - mean[j];
      mean[j] += delta / n;
      m2[j] += delta * (row[j] - mean[j]);
    }
  }
  ScalerStats s;
  s.mean = std::move(mean);
  s.std.resize(d);
  for (std::size_t j = 0; j < d; ++j)
    s.std[j] = std::sqrt(std::max(0.0, m2[j] / static_cast<double>(train.rows())));
  return s;
}

PcaModel fit_pca(const Matrix& train, int num_components) {
  const std::size_t n = train.rows(), d = train.cols();
  if (num_components < 1) throw Error("pca num_components must be >= 1");
  const auto m = static_cast<std::size_t>(num_components);
  if (n < 2 || m > std::min(d, n - 1))
    throw Error("pca num_components=" + std::to_string(m) + " exceeds min(dim=" +
                std::to_string(d) + ", samples-1=" + std::to_string(n == 0 ? 0 : n - 1) +
                ")");
  check_finite(train, "pca training data");

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> x(train.data().data(), static_cast<Eigen::Index>(n),
                             static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mu;
  const double denom = static_cast<double>(n - 1);

  Eigen::MatrixXd basis(d, m);
  Eigen::VectorXd eig(m);
  if (d <= n) {
    const Eigen::MatrixXd cov = (xc.transpose() * xc) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("pca eigendecomposition failed");
    for (std::size_t i = 0; i < m; ++i) {
      const auto col = static_cast<Eigen::Index>(d - 1 - i);  // ascending order
      basis.col(static_cast<Eigen::Index>(i)) = solver.eigenvectors().col(col);
      eig(static_cast<Eigen::Index>(i)) = solver.eigenvalues()(col);
    }
  } else {
    // Fewer samples than dimensions: decompose the n x n Gram matrix instead.
    const Eigen::MatrixXd gram = (xc * xc.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success) throw Error("pca eigendecomposition failed");
    const double top = std::max(solver.eigenvalues()(static_cast<Eigen::Index>(n - 1)), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto col = static_cast<Eigen::Index>(n - 1 - i);
      const double lambda = solver.eigenvalues()(col);
      if (!(lambda > 1e-12 * std::max(top, 1e-300)))
        throw Error("pca training data has rank below num_components=" + std::to_string(m));
      Eigen::VectorXd v = xc.transpose() * solver.eigenvectors().col(col);
      basis.col(static_cast<Eigen::Index>(i)) = v.normalized();
      eig(static_cast<Eigen::Index>(i)) = lambda;
    }
  }

  PcaModel model;
  model.mean.assign(mu.data(), mu.data() + d);
  model.components = Matrix(m, d);
  model.explained_variance.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto col = basis.col(static_cast<Eigen::Index>(i));
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    const double sign = col(arg) < 0.0 ? -1.0 : 1.0;
    auto dst = model.components.row(i);
    for (std::size_t j = 0; j < d; ++j) dst[j] = sign * col(static_cast<Eigen::Index>(j));
    model.explained_variance[i] = std::max(0.0, eig(static_cast<Eigen::Index>(i)));
  }
  return model;
}

FeatureVector project_pca(const PcaModel& model, const FeatureVector& v) {
  if (v.size() != model.dim())
    throw Error("vector dimension " + std::to_string(v.size()) +
                " does not match pca input dimension " + std::to_string(model.dim()));
  std::vector<double> centered(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) centered[j] = v.values[j] - model.mean[j];
  FeatureVector out;
  out.tag = v.tag == EncodingTag::fisher ? EncodingTag::fisher : EncodingTag::bovw_pca;
  out.block_size = 0;
  out.values.resize(model.num_components());
  for (std::size_t i = 0; i < model.num_components(); ++i)
    out.values[i] = dot(centered, model.components.row(i));
  return out;
}

std::vector<double> reconstruct_pca(const PcaModel& model, std::span<const double> coords) {
  if (coords.size() != model.num_components())
    throw Error("pca coordinate count mismatch");
  std::vector<double> out(model.mean);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    auto comp = model.components.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += coords[i] * comp[j];
  }
  return out;
}

nlohmann::json to_json(const ScalerStats& stats) {
  return {{"schema_version", kScalerSchemaVersion},
          {"dim", stats.mean.size()},
          {"mean", stats.mean},
          {"std", stats.std}};
}

ScalerStats scaler_from_json(const nlohmann::json& doc) {
  if (doc.at("schema_version").get<int>() != kScalerSchemaVersion)
    throw Error("unsupported scaler schema_version");
  ScalerStats s;
  s.mean = doc.at("mean").get<std::vector<double>>();
  s.std = doc.at("std").get<std::vector<double>>();
  if (s.mean.size() != s.std.size()) throw Error("scaler mean/std length mismatch");
  return s;
}

nlohmann::json to_json(const PcaModel& model) {
  return {{"schema_version", kPcaSchemaVersion},
          {"dim", model.dim()},
          {"num_components", model.num_components()},
          {"mean", model.mean},
          {"components", std::vector<double>(model.components.data().begin(),
                                             model.components.data().end())},
          {"explained_variance", model.explained_variance}};
}

PcaModel pca_from_json(const nlohmann::json& doc) {
  if (doc.at("schema_version").get<int>() != kPcaSchemaVersion)
    throw Error("unsupported pca schema_version");
  PcaModel model;
  model.mean = doc.at("mean").get<std::vector<double>>();
  const auto m = doc.at("num_components").get<std::size_t>();
  const auto values = doc.at("components").get<std::vector<double>>();
  if (values.size() != m * model.mean.size()) throw Error("pca component size mismatch");
  model.components = Matrix(m, model.mean.size());
  std::copy(values.begin(), values.end(), model.components.data().begin());
  model.explained_variance = doc.at("explained_variance").get<std::vector<double>>();
  return model;
}

}  // namespace pyrabow
