#include "pyrabow/experiment.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <sstream>

#include "pyrabow/dataset.hpp"
#include "pyrabow/error.hpp"
#include "pyrabow/io.hpp"
#include "pyrabow/parallel.hpp"

namespace pyrabow {

SplitResult evaluate_split(const PipelineConfig& cfg, const Corpus& corpus,
                           std::span<const std::size_t> train,
                           std::span<const std::size_t> test, ArtifactCache* cache,
                           unsigned threads, FittedPipeline* fitted) {
  if (test.empty()) throw Error("cannot evaluate on an empty test set");
  FittedPipeline p = fit_pipeline(cfg, corpus, train, cache, threads);

  SplitResult r;
  r.test_indices.assign(test.begin(), test.end());
  const std::size_t n = test.size();
  std::vector<Prediction> preds(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const std::size_t rec = test[i];
    preds[i] = predict_image(p, corpus.features[rec], corpus.sizes[rec][0],
                             corpus.sizes[rec][1]);
  });
  const int num_classes = corpus.index.num_classes();
  r.scores = Matrix(n, static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < n; ++i) {
    r.truth.push_back(corpus.index.records[test[i]].class_id);
    r.predicted.push_back(preds[i].label);
    std::copy(preds[i].scores.begin(), preds[i].scores.end(), r.scores.row(i).begin());
  }
  r.accuracy = accuracy(r.predicted, r.truth);
  r.confusion = confusion(r.predicted, r.truth, num_classes);
  if (fitted) *fitted = std::move(p);
  return r;
}

SplitResult evaluate_holdout(const PipelineConfig& cfg, const Corpus& corpus,
                             ArtifactCache* cache, unsigned threads, FittedPipeline* fitted) {
  const Split split =
      stratified_split(corpus.index, cfg.dataset.train_fraction, cfg.dataset.split_seed);
  return evaluate_split(cfg, corpus, split.train_indices, split.test_indices, cache, threads,
                        fitted);
}

CvReport cross_validate(const PipelineConfig& cfg, const Corpus& corpus, int k,
                        std::uint64_t seed, ArtifactCache* cache, unsigned threads) {
  const FoldAssignment folds = stratified_folds(corpus.index, k, seed);
  CvReport report = cross_validate(
      folds, [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
        return evaluate_split(cfg, corpus, train, test, cache, threads).accuracy;
      });
  report.fingerprint = fingerprint(cfg);
  return report;
}

void SweepGrid::validate() const {
  if (axes.empty()) throw ConfigError("axes", "sweep grid has no axes");
  for (const auto& a : axes) {
    if (a.path.empty()) throw ConfigError("axes", "axis without a path");
    if (a.values.empty()) throw ConfigError(a.path, "axis has no values");
  }
}

std::size_t SweepGrid::size() const {
  std::size_t n = axes.empty() ? 0 : 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

std::vector<std::pair<std::string, nlohmann::json>> SweepGrid::point(std::size_t i) const {
  if (i >= size()) throw Error("sweep grid index out of range");
  std::vector<std::pair<std::string, nlohmann::json>> out(axes.size());
  for (std::size_t a = axes.size(); a-- > 0;) {
    const std::size_t m = axes[a].values.size();
    out[a] = {axes[a].path, axes[a].values[i % m]};
    i /= m;
  }
  return out;
}

SweepGrid sweep_grid_from_json(const nlohmann::json& doc) {
  SweepGrid g;
  if (!doc.is_object() || !doc.contains("axes") || !doc.at("axes").is_array())
    throw ConfigError("axes", "sweep grid must be an object with an \"axes\" array");
  for (const auto& [key, _] : doc.items())
    if (key != "axes") throw ConfigError(key, "unknown key in sweep grid");
  for (const auto& a : doc.at("axes")) {
    if (!a.is_object() || !a.contains("path") || !a.contains("values") ||
        !a.at("path").is_string() || !a.at("values").is_array())
      throw ConfigError("axes", "each axis needs a string \"path\" and a \"values\" array");
    for (const auto& [key, _] : a.items())
      if (key != "path" && key != "values") throw ConfigError("axes." + key, "unknown key");
    SweepAxis axis;
    axis.path = a.at("path").get<std::string>();
    for (const auto& v : a.at("values")) axis.values.push_back(v);
    g.axes.push_back(std::move(axis));
  }
  g.validate();
  return g;
}

nlohmann::json to_json(const SweepGrid& grid) {
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& a : grid.axes) axes.push_back({{"path", a.path}, {"values", a.values}});
  return {{"axes", axes}};
}

nlohmann::json apply_override(nlohmann::json doc, const std::string& path,
                              const nlohmann::json& value) {
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot - start);
    if (part.empty()) throw ConfigError(path, "malformed override path");
    if (!node->is_object()) throw ConfigError(path, "override path crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return doc;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

namespace {

std::string corpus_store_key(const PipelineConfig& cfg) {
  const auto doc = to_json(cfg);
  return doc.at("dataset").at("root").dump() + "|" + doc.at("features").dump();
}

}  // namespace

std::vector<SweepRow> sweep(const PipelineConfig& base, const SweepGrid& grid,
                            const SweepOptions& opts) {
  grid.validate();
  const nlohmann::json base_doc = to_json(base);
  ArtifactCache cache;
  std::map<std::string, std::shared_ptr<const Corpus>> corpora;
  CorpusOptions copts = opts.corpus;
  copts.threads = opts.threads;

  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SweepRow row;
    row.grid_index = i;
    row.overrides = grid.point(i);
    row.protocol = to_string(opts.protocol);
    try {
      nlohmann::json doc = base_doc;
      for (const auto& [path, value] : row.overrides) doc = apply_override(doc, path, value);
      const PipelineConfig cfg = config_from_json(doc);
      row.fingerprint = fingerprint(cfg);

      const std::string ckey = corpus_store_key(cfg);
      auto it = corpora.find(ckey);
      if (it == corpora.end()) {
        auto corpus = std::make_shared<const Corpus>(
            build_corpus(scan_dataset(cfg.dataset.root), cfg.features, copts));
        it = corpora.emplace(ckey, std::move(corpus)).first;
      }
      const Corpus& corpus = *it->second;

      if (opts.protocol == Protocol::cv) {
        const CvReport rep =
            cross_validate(cfg, corpus, cfg.eval.folds, cfg.eval.seed, &cache, opts.threads);
        row.fold_accuracies = rep.fold_accuracies;
        row.mean = rep.mean;
        row.std = rep.std;
      } else {
        const SplitResult r = evaluate_holdout(cfg, corpus, &cache, opts.threads);
        row.fold_accuracies = {r.accuracy};
        row.mean = r.accuracy;
        row.std = 0.0;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.error.has_value() != b.error.has_value()) return !a.error.has_value();
    if (a.error) return false;
    return a.mean > b.mean;
  });
  return rows;
}

nlohmann::json to_json(const SweepRow& row) {
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [path, value] : row.overrides) overrides[path] = value;
  nlohmann::json j = {{"grid_index", row.grid_index},
                      {"overrides", overrides},
                      {"protocol", row.protocol},
                      {"mean", row.mean},
                      {"std", row.std},
                      {"fold_accuracies", row.fold_accuracies},
                      {"fingerprint", row.fingerprint}};
  j["error"] = row.error ? nlohmann::json(*row.error) : nlohmann::json(nullptr);
  return j;
}

std::string sweep_csv(const SweepGrid& grid, std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << "grid_index";
  for (const auto& a : grid.axes) os << ',' << csv_escape(a.path);
  os << ",protocol,mean,std,error\n";
  for (const auto& r : rows) {
    os << r.grid_index;
    for (const auto& [_, value] : r.overrides)
      os << ',' << csv_escape(value.is_string() ? value.get<std::string>() : value.dump());
    os << ',' << r.protocol;
    if (r.error) {
      os << ",,," << csv_escape(*r.error) << '\n';
    } else {
      os << ',' << format_double(r.mean) << ',' << format_double(r.std) << ",\n";
    }
  }
  return os.str();
}

}  // namespace pyrabow
