#include "pyrabow/config.hpp"

#include <fstream>
#include <set>

#include "pyrabow/error.hpp"
#include "pyrabow/hash.hpp"

namespace pyrabow {
namespace {

using nlohmann::json;

// Reads keys from one JSON object and remembers which ones were consumed so
// that leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string prefix) : prefix_(std::move(prefix)) {
    if (!doc.is_object())
      throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected a JSON object");
    doc_ = &doc;
  }

  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_->contains(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = doc_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key), "has the wrong type");
    }
  }

  const json& at(const std::string& key) const { return doc_->at(key); }

  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(doc_->contains(key) ? doc_->at(key) : empty, path(key));
  }

  void finish() const {
    for (const auto& [key, _] : doc_->items())
      if (!seen_.count(key)) throw ConfigError(path(key), "unknown key");
  }

 private:
  const json* doc_ = nullptr;
  std::string prefix_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError(field, msg);
}

template <class E, class F>
E parse_enum(Section& s, const std::string& key, E fallback, F&& convert) {
  if (!s.has(key)) return fallback;
  if (!s.at(key).is_string()) throw ConfigError(s.path(key), "expected a string");
  try {
    return convert(s.at(key).get<std::string>());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(s.path(key), e.what());
  }
}

}  // namespace

std::string to_string(Protocol p) { return p == Protocol::cv ? "cv" : "holdout"; }

std::size_t PipelineConfig::num_regions() const { return region_count(encoding.pyramid); }

std::size_t PipelineConfig::encoded_dim() const {
  if (fisher.enabled) {
    const auto K = static_cast<std::size_t>(fisher.gmm.components);
    return 2 * K * kDescriptorDim + (fisher.include_weight_block ? K : 0);
  }
  return num_regions() * static_cast<std::size_t>(codebook.kmeans.k);
}

std::size_t PipelineConfig::classifier_dim() const {
  return pca.enabled ? static_cast<std::size_t>(pca.num_components) : encoded_dim();
}

void PipelineConfig::validate() const {
  require(!dataset.root.empty(), "dataset.root", "is required");
  require(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0,
          "dataset.train_fraction", "must lie strictly between 0 and 1");

  require(features.step >= 1, "features.step", "must be >= 1");
  require(features.patch >= 8, "features.patch", "must be >= 8");
  require(!features.scales.empty(), "features.scales", "must not be empty");
  for (double s : features.scales) require(s > 0.0, "features.scales", "must all be > 0");

  require(codebook.kmeans.k >= 1, "codebook.k", "must be >= 1");
  require(codebook.kmeans.max_iter >= 1, "codebook.max_iter", "must be >= 1");
  require(codebook.kmeans.tol >= 0.0, "codebook.tol", "must be >= 0");
  require(codebook.subsample >= 1, "codebook.subsample", "must be >= 1");

  require(encoding.max_level >= 0, "encoding.max_level", "must be >= 0");
  require(encoding.pyramid.level >= 0, "encoding.pyramid_level", "must be >= 0");
  require(encoding.pyramid.level <= encoding.max_level, "encoding.pyramid_level",
          "exceeds encoding.max_level (" + std::to_string(encoding.max_level) + ")");

  require(fisher.gmm.components >= 1, "fisher.components", "must be >= 1");
  require(fisher.gmm.max_iter >= 0, "fisher.max_iter", "must be >= 0");
  require(fisher.gmm.tol >= 0.0, "fisher.tol", "must be >= 0");
  require(fisher.gmm.variance_floor > 0.0, "fisher.variance_floor", "must be > 0");
  require(fisher.subsample >= 1, "fisher.subsample", "must be >= 1");

  if (pca.enabled) {
    require(pca.num_components >= 1, "pca.num_components", "must be >= 1");
    require(static_cast<std::size_t>(pca.num_components) <= encoded_dim(),
            "pca.num_components",
            "exceeds the encoded feature dimension (" + std::to_string(encoded_dim()) + ")");
  }

  const auto& k = classifier.kernel;
  require(k.degree >= 1, "classifier.degree", "must be >= 1");
  require(!k.gamma || *k.gamma > 0.0, "classifier.gamma", "must be > 0 or \"scale\"");
  require(classifier.svm.C > 0.0, "classifier.C", "must be > 0");
  require(classifier.svm.tol > 0.0, "classifier.svm_tol", "must be > 0");
  require(classifier.knn_k >= 1, "classifier.knn_k", "must be >= 1");
  require(classifier.logreg.l2 >= 0.0, "classifier.logreg.l2", "must be >= 0");
  require(classifier.logreg.learning_rate > 0.0, "classifier.logreg.learning_rate",
          "must be > 0");
  require(classifier.logreg.max_iter >= 0, "classifier.logreg.max_iter", "must be >= 0");
  if (classifier.kind == ClassifierKind::svm &&
      k.kind == KernelKind::hist_intersection &&
      encoding.normalization == NormKind::standard) {
    throw ConfigError("classifier.kernel",
                      "hist_intersection needs non-negative features; standard scaling "
                      "produces negative values");
  }

  require(eval.folds >= 2, "eval.folds", "must be >= 2");
}

PipelineConfig config_from_json(const json& doc) {
  PipelineConfig cfg;
  Section root(doc, "");

  {
    auto s = root.sub("dataset");
    std::string path;
    s.get("root", path);
    cfg.dataset.root = path;
    s.get("split_seed", cfg.dataset.split_seed);
    s.get("train_fraction", cfg.dataset.train_fraction);
    s.finish();
  }
  {
    auto s = root.sub("features");
    s.get("step", cfg.features.step);
    s.get("patch", cfg.features.patch);
    s.get("scales", cfg.features.scales);
    s.finish();
  }
  {
    auto s = root.sub("codebook");
    auto& km = cfg.codebook.kmeans;
    s.get("k", km.k);
    s.get("max_iter", km.max_iter);
    s.get("tol", km.tol);
    s.get("seed", km.seed);
    km.init = parse_enum(s, "init", km.init, [](const std::string& v) {
      if (v == "kmeans++") return KMeansInit::kmeanspp;
      if (v == "random-points") return KMeansInit::random_points;
      throw Error("expected \"kmeans++\" or \"random-points\"");
    });
    s.get("subsample", cfg.codebook.subsample);
    s.finish();
  }
  {
    auto s = root.sub("encoding");
    cfg.encoding.pyramid.shape =
        parse_enum(s, "pyramid_shape", cfg.encoding.pyramid.shape, [](const std::string& v) {
          if (v == "square") return PyramidShape::square;
          if (v == "horizontal") return PyramidShape::horizontal;
          throw Error("expected \"square\" or \"horizontal\"");
        });
    s.get("pyramid_level", cfg.encoding.pyramid.level);
    s.get("max_level", cfg.encoding.max_level);
    cfg.encoding.normalization = parse_enum(s, "normalization", cfg.encoding.normalization,
                                            norm_kind_from_string);
    s.finish();
  }
  {
    auto s = root.sub("pca");
    s.get("enabled", cfg.pca.enabled);
    s.get("num_components", cfg.pca.num_components);
    s.finish();
  }
  {
    auto s = root.sub("fisher");
    s.get("enabled", cfg.fisher.enabled);
    s.get("components", cfg.fisher.gmm.components);
    s.get("max_iter", cfg.fisher.gmm.max_iter);
    s.get("tol", cfg.fisher.gmm.tol);
    s.get("seed", cfg.fisher.gmm.seed);
    s.get("variance_floor", cfg.fisher.gmm.variance_floor);
    s.get("include_weight_block", cfg.fisher.include_weight_block);
    s.get("subsample", cfg.fisher.subsample);
    s.finish();
  }
  {
    auto s = root.sub("classifier");
    auto& c = cfg.classifier;
    c.kind = parse_enum(s, "kind", c.kind, [](const std::string& v) {
      if (v == "svm") return ClassifierKind::svm;
      if (v == "knn") return ClassifierKind::knn;
      if (v == "logreg") return ClassifierKind::logreg;
      throw Error("expected \"svm\", \"knn\" or \"logreg\"");
    });
    c.kernel.kind = parse_enum(s, "kernel", c.kernel.kind, kernel_kind_from_string);
    s.get("degree", c.kernel.degree);
    s.get("coef0", c.kernel.coef0);
    if (s.has("gamma")) {
      const auto& g = s.at("gamma");
      if (g.is_string() && g.get<std::string>() == "scale") {
        c.kernel.gamma.reset();
      } else if (g.is_number()) {
        c.kernel.gamma = g.get<double>();
      } else {
        throw ConfigError("classifier.gamma", "expected a number or \"scale\"");
      }
    }
    s.get("C", c.svm.C);
    s.get("svm_tol", c.svm.tol);
    s.get("svm_max_iter", c.svm.max_iter);
    s.get("knn_k", c.knn_k);
    {
      auto l = s.sub("logreg");
      l.get("l2", c.logreg.l2);
      l.get("learning_rate", c.logreg.learning_rate);
      l.get("max_iter", c.logreg.max_iter);
      l.get("tol", c.logreg.tol);
      l.finish();
    }
    s.finish();
  }
  {
    auto s = root.sub("eval");
    cfg.eval.protocol = parse_enum(s, "protocol", cfg.eval.protocol, [](const std::string& v) {
      if (v == "cv") return Protocol::cv;
      if (v == "holdout") return Protocol::holdout;
      throw Error("expected \"cv\" or \"holdout\"");
    });
    s.get("folds", cfg.eval.folds);
    s.get("seed", cfg.eval.seed);
    s.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  if (doc.is_object() && doc.contains("manifest_version") && doc.contains("config"))
    doc = doc.at("config");
  if (doc.is_object() && doc.contains("dataset") && doc["dataset"].is_object() &&
      doc["dataset"].contains("root") && doc["dataset"]["root"].is_string()) {
    std::filesystem::path root = doc["dataset"]["root"].get<std::string>();
    if (root.is_relative() && !root.empty()) {
      root = (std::filesystem::absolute(path).parent_path() / root).lexically_normal();
      doc["dataset"]["root"] = root.string();
    }
  }
  return config_from_json(doc);
}

json to_json(const PipelineConfig& cfg) {
  const auto& c = cfg.classifier;
  json gamma = c.kernel.gamma ? json(*c.kernel.gamma) : json("scale");
  return {
      {"dataset",
       {{"root", cfg.dataset.root.string()},
        {"split_seed", cfg.dataset.split_seed},
        {"train_fraction", cfg.dataset.train_fraction}}},
      {"features",
       {{"step", cfg.features.step},
        {"patch", cfg.features.patch},
        {"scales", cfg.features.scales}}},
      {"codebook",
       {{"k", cfg.codebook.kmeans.k},
        {"max_iter", cfg.codebook.kmeans.max_iter},
        {"tol", cfg.codebook.kmeans.tol},
        {"seed", cfg.codebook.kmeans.seed},
        {"init", cfg.codebook.kmeans.init == KMeansInit::kmeanspp ? "kmeans++"
                                                                   : "random-points"},
        {"subsample", cfg.codebook.subsample}}},
      {"encoding",
       {{"pyramid_shape",
         cfg.encoding.pyramid.shape == PyramidShape::square ? "square" : "horizontal"},
        {"pyramid_level", cfg.encoding.pyramid.level},
        {"max_level", cfg.encoding.max_level},
        {"normalization", to_string(cfg.encoding.normalization)}}},
      {"pca", {{"enabled", cfg.pca.enabled}, {"num_components", cfg.pca.num_components}}},
      {"fisher",
       {{"enabled", cfg.fisher.enabled},
        {"components", cfg.fisher.gmm.components},
        {"max_iter", cfg.fisher.gmm.max_iter},
        {"tol", cfg.fisher.gmm.tol},
        {"seed", cfg.fisher.gmm.seed},
        {"variance_floor", cfg.fisher.gmm.variance_floor},
        {"include_weight_block", cfg.fisher.include_weight_block},
        {"subsample", cfg.fisher.subsample}}},
      {"classifier",
       {{"kind", to_string(c.kind)},
        {"kernel", to_string(c.kernel.kind)},
        {"degree", c.kernel.degree},
        {"gamma", gamma},
        {"coef0", c.kernel.coef0},
        {"C", c.svm.C},
        {"svm_tol", c.svm.tol},
        {"svm_max_iter", c.svm.max_iter},
        {"knn_k", c.knn_k},
        {"logreg",
         {{"l2", c.logreg.l2},
          {"learning_rate", c.logreg.learning_rate},
          {"max_iter", c.logreg.max_iter},
          {"tol", c.logreg.tol}}}}},
      {"eval",
       {{"protocol", to_string(cfg.eval.protocol)},
        {"folds", cfg.eval.folds},
        {"seed", cfg.eval.seed}}},
  };
}

std::string fingerprint(const PipelineConfig& cfg) { return content_hash(to_json(cfg).dump()); }

}  // namespace pyrabow
