// pyrabow command-line front end. Exit codes: 0 success, 1 runtime failure,
// 2 config or usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "pyrabow/config.hpp"
#include "pyrabow/dataset.hpp"
#include "pyrabow/error.hpp"
#include "pyrabow/experiment.hpp"
#include "pyrabow/io.hpp"
#include "pyrabow/parallel.hpp"
#include "pyrabow/pipeline.hpp"
#include "pyrabow/runner.hpp"
#include "pyrabow/synthetic.hpp"

namespace fs = std::filesystem;
using namespace pyrabow;

namespace {

struct Common {
  unsigned threads = default_threads();
  std::string out = "out";
  std::string cache_dir;
  std::string config;
};

struct Loaded {
  PipelineConfig cfg;
  Corpus corpus;
};

std::optional<fs::path> cache_flag(const Common& c) {
  if (c.cache_dir.empty()) return std::nullopt;
  return fs::path(c.cache_dir);
}

Loaded load(const Common& c) {
  Loaded l;
  l.cfg = load_config_file(c.config);
  const fs::path cache = resolve_cache_dir(c.out, cache_flag(c));
  l.corpus = build_corpus(scan_dataset(l.cfg.dataset.root), l.cfg.features, {cache, c.threads});
  return l;
}

Split holdout_split(const Loaded& l) {
  return stratified_split(l.corpus.index, l.cfg.dataset.train_fraction,
                          l.cfg.dataset.split_seed);
}

void add_common(CLI::App* sub, Common& c, bool needs_config) {
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--cache-dir", c.cache_dir,
                  "Descriptor cache (default $PYRABOW_CACHE_DIR or <out>/cache)");
  if (needs_config) sub->add_option("-c,--config", c.config, "Pipeline config JSON")->required();
}

void print_json(const nlohmann::json& j) { std::cout << j.dump() << '\n'; }

int cmd_scan(const std::string& root, const Common& c) {
  const DatasetIndex index = scan_dataset(root);
  const fs::path out(c.out);
  write_json_file(out / "index.json", to_json(index));
  write_text_file(out / "metrics" / "class_balance.csv", class_balance_csv(index));
  nlohmann::json counts = nlohmann::json::object();
  for (std::size_t i = 0; i < index.classes.size(); ++i)
    counts[index.classes[i]] = index.counts[i];
  print_json({{"num_images", index.size()}, {"classes", index.classes}, {"counts", counts}});
  return 0;
}

int cmd_extract(const Common& c) {
  const Loaded l = load(c);
  std::size_t total = 0;
  for (const auto& f : l.corpus.features) total += f.size();
  print_json({{"num_images", l.corpus.size()},
              {"num_descriptors", total},
              {"corpus_key", l.corpus.key},
              {"cache_dir", resolve_cache_dir(c.out, cache_flag(c)).string()},
              {"from_cache", l.corpus.loaded_from_cache}});
  return 0;
}

int cmd_train_codebook(const Common& c) {
  const Loaded l = load(c);
  const Split split = holdout_split(l);
  std::vector<const DenseFeatures*> train;
  for (std::size_t i : split.train_indices) train.push_back(&l.corpus.features[i]);
  const fs::path models = fs::path(c.out) / "models";
  if (l.cfg.fisher.enabled) {
    const Matrix pool =
        pool_descriptors(train, l.cfg.fisher.subsample, l.cfg.fisher.gmm.seed);
    const GmmModel gmm = train_gmm(pool, l.cfg.fisher.gmm, c.threads);
    write_json_file(models / "gmm.json", to_json(gmm));
    print_json({{"components", gmm.num_components()},
                {"iterations", gmm.log_likelihood_history.size()},
                {"log_likelihood", gmm.log_likelihood_history.empty()
                                       ? 0.0
                                       : gmm.log_likelihood_history.back()}});
  } else {
    const Matrix pool =
        pool_descriptors(train, l.cfg.codebook.subsample, l.cfg.codebook.kmeans.seed);
    const Codebook cb = train_codebook(pool, l.cfg.codebook.kmeans, c.threads);
    write_json_file(models / "codebook.json", to_json(cb));
    print_json({{"k", cb.k()},
                {"iterations", cb.iterations},
                {"converged", cb.converged},
                {"objective", cb.objective}});
  }
  return 0;
}

int cmd_encode(const Common& c) {
  const Loaded l = load(c);
  const Split split = holdout_split(l);
  const FittedPipeline p = fit_pipeline(l.cfg, l.corpus, split.train_indices, nullptr, c.threads);
  auto dump = [&](const std::vector<std::size_t>& idx, const fs::path& path) {
    Matrix m;
    std::vector<int> labels;
    for (std::size_t i : idx) {
      m.append_row(transform_image(p, l.corpus.features[i], l.corpus.sizes[i][0],
                                   l.corpus.sizes[i][1]));
      labels.push_back(l.corpus.index.records[i].class_id);
    }
    write_feature_csv(path, m, labels);
    return m.cols();
  };
  const fs::path out(c.out);
  const std::size_t dim = dump(split.train_indices, out / "features_train.csv");
  dump(split.test_indices, out / "features_test.csv");
  print_json({{"dim", dim},
              {"num_train", split.train_indices.size()},
              {"num_test", split.test_indices.size()}});
  return 0;
}

int cmd_fit(const Common& c) {
  const Loaded l = load(c);
  const Split split = holdout_split(l);
  const FittedPipeline p = fit_pipeline(l.cfg, l.corpus, split.train_indices, nullptr, c.threads);
  const fs::path models = fs::path(c.out) / "models";
  save_pipeline(p, models);
  print_json({{"models", models.string()}, {"num_train", split.train_indices.size()}});
  return 0;
}

int cmd_evaluate(const std::string& models, const Common& c) {
  const FittedPipeline p = load_pipeline(models);
  const Loaded l = load(c);
  if (l.corpus.index.classes != p.classes)
    throw Error("dataset classes do not match the saved model");
  const Split split = holdout_split(l);
  SplitResult r;
  r.test_indices = split.test_indices;
  const int num_classes = l.corpus.index.num_classes();
  r.scores = Matrix(split.test_indices.size(), static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < split.test_indices.size(); ++i) {
    const std::size_t rec = split.test_indices[i];
    const Prediction pred =
        predict_image(p, l.corpus.features[rec], l.corpus.sizes[rec][0], l.corpus.sizes[rec][1]);
    r.truth.push_back(l.corpus.index.records[rec].class_id);
    r.predicted.push_back(pred.label);
    std::copy(pred.scores.begin(), pred.scores.end(), r.scores.row(i).begin());
  }
  r.accuracy = accuracy(r.predicted, r.truth);
  r.confusion = confusion(r.predicted, r.truth, num_classes);
  const fs::path metrics = fs::path(c.out) / "metrics";
  const auto j = holdout_metrics_json(r, p.classes, fingerprint(p.config));
  write_json_file(metrics / "metrics.json", j);
  write_text_file(metrics / "confusion.csv", confusion_csv(r.confusion, p.classes));
  write_text_file(metrics / "roc.csv", roc_csv(r, p.classes));
  print_json({{"protocol", "holdout"}, {"accuracy", r.accuracy}, {"num_test", r.truth.size()}});
  return 0;
}

int cmd_cv(const Common& c, std::optional<int> folds) {
  const Loaded l = load(c);
  const int k = folds.value_or(l.cfg.eval.folds);
  ArtifactCache cache;
  const CvReport rep = cross_validate(l.cfg, l.corpus, k, l.cfg.eval.seed, &cache, c.threads);
  const fs::path metrics = fs::path(c.out) / "metrics";
  write_text_file(metrics / "cv.csv", cv_csv(rep));
  write_json_file(metrics / "cv.json", to_json(rep));
  print_json(to_json(rep));
  return 0;
}

int cmd_sweep(const Common& c, const std::string& grid_path, const std::string& protocol) {
  const PipelineConfig base = load_config_file(c.config);
  nlohmann::json grid_doc;
  try {
    grid_doc = read_json_file(grid_path);
  } catch (const Error& e) {
    throw ConfigError("<grid>", e.what());
  }
  const SweepGrid grid = sweep_grid_from_json(grid_doc);
  SweepOptions opts;
  opts.protocol = protocol.empty() ? base.eval.protocol
                  : protocol == "cv" ? Protocol::cv
                                     : Protocol::holdout;
  opts.threads = c.threads;
  opts.corpus.cache_dir = resolve_cache_dir(c.out, cache_flag(c));
  const auto rows = sweep(base, grid, opts);
  const fs::path metrics = fs::path(c.out) / "metrics";
  write_text_file(metrics / "sweep.csv", sweep_csv(grid, rows));
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) arr.push_back(to_json(r));
  write_json_file(metrics / "sweep.json", {{"grid", to_json(grid)}, {"rows", arr}});
  std::cout << sweep_csv(grid, rows);
  return 0;
}

int cmd_predict(const std::string& models, const std::string& image) {
  const FittedPipeline p = load_pipeline(models);
  const Prediction pred = predict_file(p, image);
  print_json({{"class", p.classes.at(pred.label)},
              {"class_id", pred.label},
              {"classes", p.classes},
              {"scores", pred.scores}});
  return 0;
}

int cmd_run(const Common& c) {
  const PipelineConfig cfg = load_config_file(c.config);
  RunOptions opts;
  opts.threads = c.threads;
  opts.cache_dir = cache_flag(c);
  const RunSummary s = run_pipeline(cfg, c.out, opts);
  nlohmann::json j = {{"protocol", s.protocol},
                      {"accuracy", s.accuracy},
                      {"manifest", s.manifest.string()}};
  if (s.protocol == "cv") j["std"] = s.std;
  print_json(j);
  return 0;
}

int cmd_synth(const std::string& root, const GratingSpec& spec) {
  const auto classes = write_grating_corpus(root, spec);
  print_json({{"root", root}, {"classes", classes}, {"per_class", spec.per_class}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pyrabow: bag-of-visual-words scene classification"};
  app.require_subcommand(1);

  Common c;
  std::string root, models, image, grid, protocol;
  std::optional<int> folds;
  GratingSpec synth;

  auto* scan = app.add_subcommand("scan", "Index a dataset directory (one folder per class)");
  scan->add_option("root", root, "Dataset root")->required();
  scan->add_option("--out", c.out, "Output directory");

  auto* extract = app.add_subcommand("extract", "Extract dense descriptors into the cache");
  add_common(extract, c, true);
  auto* train_cb = app.add_subcommand("train-codebook",
                                      "Fit the codebook (or GMM) on the training split");
  add_common(train_cb, c, true);
  auto* encode = app.add_subcommand("encode", "Write encoded feature matrices as CSV");
  add_common(encode, c, true);
  auto* fit = app.add_subcommand("fit", "Fit the full pipeline on the training split");
  add_common(fit, c, true);

  auto* evaluate = app.add_subcommand("evaluate", "Score saved models on the held-out split");
  add_common(evaluate, c, true);
  evaluate->add_option("--models", models, "Model directory")->required();

  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  add_common(cv, c, true);
  cv->add_option("--folds", folds, "Fold count (default eval.folds)")->check(CLI::Range(2, 1000));

  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a grid of config overrides");
  add_common(sweep_cmd, c, true);
  sweep_cmd->add_option("--grid", grid, "Sweep grid JSON")->required();
  sweep_cmd->add_option("--protocol", protocol, "cv or holdout (default eval.protocol)")
      ->check(CLI::IsMember({"cv", "holdout"}));

  auto* predict_cmd = app.add_subcommand("predict", "Classify one image with saved models");
  predict_cmd->add_option("models", models, "Model directory")->required();
  predict_cmd->add_option("image", image, "Image file")->required();

  auto* run = app.add_subcommand("run", "Run the configured pipeline end to end");
  add_common(run, c, true);

  auto* synth_cmd = app.add_subcommand("synth", "Generate the oriented-grating corpus");
  synth_cmd->add_option("root", root, "Output root")->required();
  synth_cmd->add_option("--per-class", synth.per_class, "Images per class")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", synth.size, "Image side in pixels")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", synth.noise_sigma, "Gaussian noise sigma (grey levels)");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*scan) return cmd_scan(root, c);
    if (*extract) return cmd_extract(c);
    if (*train_cb) return cmd_train_codebook(c);
    if (*encode) return cmd_encode(c);
    if (*fit) return cmd_fit(c);
    if (*evaluate) return cmd_evaluate(models, c);
    if (*cv) return cmd_cv(c, folds);
    if (*sweep_cmd) return cmd_sweep(c, grid, protocol);
    if (*predict_cmd) return cmd_predict(models, image);
    if (*run) return cmd_run(c);
    if (*synth_cmd) return cmd_synth(root, synth);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
