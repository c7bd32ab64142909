#include "pyrabow/pipeline.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "pyrabow/descriptor_cache.hpp"
#include "pyrabow/error.hpp"
#include "pyrabow/hash.hpp"
#include "pyrabow/image.hpp"
#include "pyrabow/io.hpp"
#include "pyrabow/parallel.hpp"

namespace fs = std::filesystem;

namespace pyrabow {
namespace {

nlohmann::json grid_json(const DenseGridSpec& g) {
  return {{"step", g.step}, {"patch", g.patch}, {"scales", g.scales}};
}

std::string indices_digest(std::span<const std::size_t> idx) {
  std::ostringstream os;
  for (std::size_t i : idx) os << i << ',';
  return content_hash(os.str());
}

std::optional<Corpus> try_read_cache(const fs::path& bvwd, const fs::path& sizes_file,
                                     std::size_t expected) {
  std::error_code ec;
  if (!fs::exists(bvwd, ec) || !fs::exists(sizes_file, ec)) return std::nullopt;
  try {
    auto images = read_descriptor_cache(bvwd);
    const auto sizes = read_json_file(sizes_file).at("sizes").get<std::vector<std::array<int, 2>>>();
    if (images.size() != expected || sizes.size() != expected) return std::nullopt;
    Corpus c;
    c.features.resize(expected);
    for (auto& img : images) {
      if (img.record_index >= expected) return std::nullopt;
      c.features[img.record_index] = std::move(img.features);
    }
    c.sizes = sizes;
    return c;
  } catch (const Error&) {
    return std::nullopt;  // stale or corrupt cache: rebuild
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::string corpus_key(const DatasetIndex& index, const DenseGridSpec& grid) {
  std::ostringstream os;
  os << grid_json(grid).dump() << '\n';
  for (const auto& r : index.records) {
    std::error_code ec;
    const auto size = fs::file_size(r.path, ec);
    const auto mtime = fs::last_write_time(r.path, ec).time_since_epoch().count();
    os << r.path.string() << '|' << r.class_id << '|' << size << '|' << mtime << '\n';
  }
  return content_hash(os.str());
}

Corpus build_corpus(DatasetIndex index, const DenseGridSpec& grid, const CorpusOptions& opts) {
  grid.validate();
  const std::string key = corpus_key(index, grid);
  const std::size_t n = index.records.size();

  fs::path bvwd, sizes_file;
  if (opts.cache_dir) {
    bvwd = *opts.cache_dir / (key + ".bvwd");
    sizes_file = *opts.cache_dir / (key + ".sizes.json");
    if (auto cached = try_read_cache(bvwd, sizes_file, n)) {
      cached->index = std::move(index);
      cached->key = key;
      cached->loaded_from_cache = true;
      return std::move(*cached);
    }
  }

  Corpus c;
  c.features.resize(n);
  c.sizes.resize(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const GrayImage img = load_grayscale(index.records[i].path);
    c.features[i] = extract_dense(img, grid);
    c.sizes[i] = {img.width, img.height};
  });

  if (opts.cache_dir) {
    fs::create_directories(*opts.cache_dir);
    std::vector<CachedImage> images(n);
    for (std::size_t i = 0; i < n; ++i) {
      images[i].record_index = static_cast<std::uint32_t>(i);
      images[i].features = c.features[i];
    }
    write_descriptor_cache(bvwd, images);
    write_json_file(sizes_file, {{"key", key}, {"grid", grid_json(grid)}, {"sizes", c.sizes}});
  }
  c.index = std::move(index);
  c.key = key;
  return c;
}

std::shared_ptr<const Codebook> ArtifactCache::codebook(const std::string& key,
                                                        const std::function<Codebook()>& make) {
  {
    std::lock_guard lock(mu_);
    if (auto it = codebooks_.find(key); it != codebooks_.end()) {
      ++hits_;
      return it->second;
    }
  }
  auto made = std::make_shared<const Codebook>(make());
  std::lock_guard lock(mu_);
  ++misses_;
  return codebooks_.try_emplace(key, std::move(made)).first->second;
}

std::shared_ptr<const GmmModel> ArtifactCache::gmm(const std::string& key,
                                                   const std::function<GmmModel()>& make) {
  {
    std::lock_guard lock(mu_);
    if (auto it = gmms_.find(key); it != gmms_.end()) {
      ++hits_;
      return it->second;
    }
  }
  auto made = std::make_shared<const GmmModel>(make());
  std::lock_guard lock(mu_);
  ++misses_;
  return gmms_.try_emplace(key, std::move(made)).first->second;
}

std::size_t ArtifactCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t ArtifactCache::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

FeatureVector encode_image(const FittedPipeline& p, const DenseFeatures& f, int width,
                           int height) {
  if (p.config.fisher.enabled) {
    if (!p.gmm) throw Error("pipeline has no GMM");
    return fisher_encode(*p.gmm, f.descriptors, p.config.fisher.include_weight_block);
  }
  if (!p.codebook) throw Error("pipeline has no codebook");
  const auto layout = pyramid_regions(p.config.encoding.pyramid, width, height);
  const auto words = quantize_image(*p.codebook, f.descriptors);
  return encode_bovw(f.keypoints, words, layout, static_cast<int>(p.codebook->k()));
}

namespace {

std::vector<double> finish_transform(const FittedPipeline& p, const FeatureVector& raw) {
  FeatureVector v = normalize(raw, p.config.encoding.normalization,
                              p.scaler ? &*p.scaler : nullptr);
  if (p.pca) v = project_pca(*p.pca, v);
  return std::move(v.values);
}

}  // namespace

std::vector<double> transform_image(const FittedPipeline& p, const DenseFeatures& f,
                                    int width, int height) {
  return finish_transform(p, encode_image(p, f, width, height));
}

FittedPipeline fit_pipeline(const PipelineConfig& cfg, const Corpus& corpus,
                            std::span<const std::size_t> train, ArtifactCache* cache,
                            unsigned threads) {
  cfg.validate();
  if (train.empty()) throw Error("cannot fit a pipeline on zero training images");

  FittedPipeline p;
  p.config = cfg;
  p.classes = corpus.index.classes;

  std::vector<const DenseFeatures*> train_features;
  train_features.reserve(train.size());
  for (std::size_t i : train) train_features.push_back(&corpus.features.at(i));
  const std::string train_digest = indices_digest(train);

  if (cfg.fisher.enabled) {
    const std::string key = content_hash(corpus.key + "|gmm|" +
                                         to_json(cfg).at("fisher").dump() + "|" + train_digest);
    auto make = [&] {
      const Matrix pool =
          pool_descriptors(train_features, cfg.fisher.subsample, cfg.fisher.gmm.seed);
      return train_gmm(pool, cfg.fisher.gmm, threads);
    };
    p.gmm = cache ? cache->gmm(key, make) : std::make_shared<const GmmModel>(make());
  } else {
    const std::string key = content_hash(corpus.key + "|codebook|" +
                                         to_json(cfg).at("codebook").dump() + "|" +
                                         train_digest);
    auto make = [&] {
      const Matrix pool =
          pool_descriptors(train_features, cfg.codebook.subsample, cfg.codebook.kmeans.seed);
      return train_codebook(pool, cfg.codebook.kmeans, threads);
    };
    p.codebook = cache ? cache->codebook(key, make) : std::make_shared<const Codebook>(make());
  }

  std::vector<FeatureVector> raw(train.size());
  parallel_for(train.size(), threads, [&](std::size_t i) {
    const std::size_t r = train[i];
    raw[i] = encode_image(p, corpus.features[r], corpus.sizes[r][0], corpus.sizes[r][1]);
  });

  if (cfg.encoding.normalization == NormKind::standard) {
    Matrix m(raw.size(), raw.front().size());
    for (std::size_t i = 0; i < raw.size(); ++i)
      std::copy(raw[i].values.begin(), raw[i].values.end(), m.row(i).begin());
    p.scaler = fit_scaler(m);
  }
  std::vector<FeatureVector> normed(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    normed[i] = normalize(raw[i], cfg.encoding.normalization, p.scaler ? &*p.scaler : nullptr);

  Matrix X(normed.size(), normed.front().size());
  for (std::size_t i = 0; i < normed.size(); ++i)
    std::copy(normed[i].values.begin(), normed[i].values.end(), X.row(i).begin());
  if (cfg.pca.enabled) {
    p.pca = fit_pca(X, cfg.pca.num_components);
    Matrix projected(X.rows(), p.pca->num_components());
    for (std::size_t i = 0; i < normed.size(); ++i) {
      const auto v = project_pca(*p.pca, normed[i]);
      std::copy(v.values.begin(), v.values.end(), projected.row(i).begin());
    }
    X = std::move(projected);
  }

  std::vector<int> y;
  y.reserve(train.size());
  for (std::size_t i : train) y.push_back(corpus.index.records[i].class_id);
  p.classifier = train_classifier(cfg.classifier, X, y, threads);
  return p;
}

Prediction predict_image(const FittedPipeline& p, const DenseFeatures& f, int width,
                         int height) {
  const auto v = transform_image(p, f, width, height);
  Prediction pred = predict(p.classifier, v);
  // Classifiers size their score vector by the highest training label; pad to
  // the full class list so scores always line up with class order.
  pred.scores.resize(p.classes.size(), -std::numeric_limits<double>::infinity());
  return pred;
}

Prediction predict_file(const FittedPipeline& p, const fs::path& image) {
  const GrayImage img = load_grayscale(image);
  const DenseFeatures f = extract_dense(img, p.config.features);
  return predict_image(p, f, img.width, img.height);
}

void save_pipeline(const FittedPipeline& p, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json files = nlohmann::json::object();
  if (p.codebook) {
    write_json_file(dir / "codebook.json", to_json(*p.codebook));
    files["codebook"] = "codebook.json";
  }
  if (p.gmm) {
    write_json_file(dir / "gmm.json", to_json(*p.gmm));
    files["gmm"] = "gmm.json";
  }
  if (p.scaler) {
    write_json_file(dir / "scaler.json", to_json(*p.scaler));
    files["scaler"] = "scaler.json";
  }
  if (p.pca) {
    write_json_file(dir / "pca.json", to_json(*p.pca));
    files["pca"] = "pca.json";
  }
  write_json_file(dir / "classifier.json", to_json(p.classifier));
  files["classifier"] = "classifier.json";
  write_json_file(dir / "pipeline.json", {{"schema_version", kPipelineSchemaVersion},
                                          {"config", to_json(p.config)},
                                          {"fingerprint", fingerprint(p.config)},
                                          {"classes", p.classes},
                                          {"files", files}});
}

FittedPipeline load_pipeline(const fs::path& dir) {
  const fs::path manifest = dir / "pipeline.json";
  if (!fs::exists(manifest)) throw Error("missing " + manifest.string());
  const auto doc = read_json_file(manifest);
  try {
    if (doc.at("schema_version").get<int>() != kPipelineSchemaVersion)
      throw Error("unsupported pipeline schema_version");
    FittedPipeline p;
    p.config = config_from_json(doc.at("config"));
    p.classes = doc.at("classes").get<std::vector<std::string>>();
    const auto& files = doc.at("files");
    auto load = [&](const char* name) {
      const fs::path path = dir / files.at(name).get<std::string>();
      if (!fs::exists(path)) throw Error("missing model file " + path.string());
      return read_json_file(path);
    };
    if (p.config.fisher.enabled) {
      p.gmm = std::make_shared<const GmmModel>(gmm_from_json(load("gmm")));
    } else {
      p.codebook = std::make_shared<const Codebook>(codebook_from_json(load("codebook")));
      if (p.codebook->k() != static_cast<std::size_t>(p.config.codebook.kmeans.k))
        throw Error("codebook size does not match the pipeline config");
    }
    if (p.config.encoding.normalization == NormKind::standard)
      p.scaler = scaler_from_json(load("scaler"));
    if (p.config.pca.enabled) p.pca = pca_from_json(load("pca"));
    p.classifier = classifier_from_json(load("classifier"));

    const std::size_t encoded = p.config.encoded_dim();
    if (p.scaler && p.scaler->mean.size() != encoded)
      throw Error("scaler dimension does not match the encoded dimension");
    if (p.pca && p.pca->dim() != encoded)
      throw Error("pca input dimension does not match the encoded dimension");
    if (input_dim(p.classifier) != p.config.classifier_dim())
      throw Error("classifier input dimension does not match the pipeline");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(dir.string() + ": malformed model files: " + e.what());
  } catch (const ConfigError& e) {
    throw Error(dir.string() + ": invalid stored config: " + e.what());
  }
}

}  // namespace pyrabow
