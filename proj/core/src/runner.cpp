#include "pyrabow/runner.hpp"

#include <chrono>
#include <cstdlib>
#include <memory>
#include <sstream>

#include "pyrabow/error.hpp"
#include "pyrabow/hash.hpp"
#include "pyrabow/io.hpp"
#include "pyrabow/pipeline.hpp"

namespace fs = std::filesystem;

namespace pyrabow {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool has_both_sides(std::span<const int> truth, int class_id) {
  bool pos = false, neg = false;
  for (int t : truth) (t == class_id ? pos : neg) = true;
  return pos && neg;
}

}  // namespace

fs::path resolve_cache_dir(const fs::path& out_dir, const std::optional<fs::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PYRABOW_CACHE_DIR"); env && *env) return env;
  return out_dir / "cache";
}

std::string class_balance_csv(const DatasetIndex& index) {
  std::ostringstream os;
  os << "class,count,fraction\n";
  for (std::size_t c = 0; c < index.classes.size(); ++c) {
    const double frac = index.size() ? static_cast<double>(index.counts[c]) / index.size() : 0.0;
    os << csv_escape(index.classes[c]) << ',' << index.counts[c] << ',' << format_double(frac)
       << '\n';
  }
  return os.str();
}

std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& classes) {
  std::ostringstream os;
  os << "true\\predicted";
  for (const auto& c : classes) os << ',' << csv_escape(c);
  os << '\n';
  for (int t = 0; t < cm.num_classes; ++t) {
    os << csv_escape(classes.at(t));
    for (int p = 0; p < cm.num_classes; ++p) os << ',' << cm.counts[t][p];
    os << '\n';
  }
  return os.str();
}

std::string roc_csv(const SplitResult& r, const std::vector<std::string>& classes) {
  std::ostringstream os;
  os << "class,threshold,fpr,tpr\n";
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (!has_both_sides(r.truth, static_cast<int>(c))) continue;
    const RocCurve curve = roc_auc(r.scores, r.truth, static_cast<int>(c));
    for (const auto& pt : curve.points)
      os << csv_escape(classes[c]) << ',' << format_double(pt.threshold) << ','
         << format_double(pt.fpr) << ',' << format_double(pt.tpr) << '\n';
  }
  return os.str();
}

std::string cv_csv(const CvReport& report) {
  std::ostringstream os;
  os << "fold,accuracy\n";
  for (std::size_t f = 0; f < report.fold_accuracies.size(); ++f)
    os << f << ',' << format_double(report.fold_accuracies[f]) << '\n';
  os << "mean," << format_double(report.mean) << '\n';
  os << "std," << format_double(report.std) << '\n';
  return os.str();
}

nlohmann::json holdout_metrics_json(const SplitResult& r,
                                    const std::vector<std::string>& classes,
                                    const std::string& fp) {
  nlohmann::json auc = nlohmann::json::object();
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (has_both_sides(r.truth, static_cast<int>(c)))
      auc[classes[c]] = roc_auc(r.scores, r.truth, static_cast<int>(c)).auc;
  return {{"protocol", "holdout"},
          {"accuracy", r.accuracy},
          {"num_test", r.truth.size()},
          {"auc", auc},
          {"confusion", to_json(r.confusion)},
          {"fingerprint", fp}};
}

RunSummary run_pipeline(const PipelineConfig& cfg, const fs::path& out, const RunOptions& opts) {
  cfg.validate();
  const auto t_start = Clock::now();
  nlohmann::json timings = nlohmann::json::object();
  const fs::path metrics_dir = out / "metrics";
  const fs::path models_dir = out / "models";
  fs::create_directories(metrics_dir);
  fs::create_directories(models_dir);

  auto t0 = Clock::now();
  DatasetIndex index = scan_dataset(cfg.dataset.root);
  timings["scan_ms"] = ms_since(t0);
  write_text_file(metrics_dir / "class_balance.csv", class_balance_csv(index));

  t0 = Clock::now();
  const fs::path cache_dir = resolve_cache_dir(out, opts.cache_dir);
  const Corpus corpus =
      build_corpus(std::move(index), cfg.features, {cache_dir, opts.threads});
  timings["extract_ms"] = ms_since(t0);

  ArtifactCache cache;
  RunSummary summary;
  summary.protocol = to_string(cfg.eval.protocol);
  const std::string fp = fingerprint(cfg);
  FittedPipeline final_model;
  nlohmann::json metrics;
  std::size_t num_train = 0;

  t0 = Clock::now();
  if (cfg.eval.protocol == Protocol::holdout) {
    const Split split =
        stratified_split(corpus.index, cfg.dataset.train_fraction, cfg.dataset.split_seed);
    num_train = split.train_indices.size();
    const SplitResult r = evaluate_split(cfg, corpus, split.train_indices, split.test_indices,
                                         &cache, opts.threads, &final_model);
    metrics = holdout_metrics_json(r, corpus.index.classes, fp);
    metrics["num_train"] = num_train;
    summary.accuracy = r.accuracy;

    std::ostringstream csv;
    csv << "protocol,accuracy,num_train,num_test,fingerprint\n"
        << "holdout," << format_double(r.accuracy) << ',' << num_train << ','
        << r.truth.size() << ',' << fp << '\n';
    write_text_file(metrics_dir / "metrics.csv", csv.str());
    write_text_file(metrics_dir / "confusion.csv", confusion_csv(r.confusion, corpus.index.classes));
    write_text_file(metrics_dir / "roc.csv", roc_csv(r, corpus.index.classes));
  } else {
    const CvReport rep =
        cross_validate(cfg, corpus, cfg.eval.folds, cfg.eval.seed, &cache, opts.threads);
    metrics = to_json(rep);
    summary.accuracy = rep.mean;
    summary.std = rep.std;
    std::ostringstream csv;
    csv << "protocol,folds,mean,std,fingerprint\n"
        << "cv," << rep.fold_accuracies.size() << ',' << format_double(rep.mean) << ','
        << format_double(rep.std) << ',' << fp << '\n';
    write_text_file(metrics_dir / "metrics.csv", csv.str());
    write_text_file(metrics_dir / "cv.csv", cv_csv(rep));
    // The deliverable model is refit on every image once CV has been scored.
    std::vector<std::size_t> all(corpus.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    num_train = all.size();
    final_model = fit_pipeline(cfg, corpus, all, &cache, opts.threads);
  }
  timings["evaluate_ms"] = ms_since(t0);
  write_json_file(metrics_dir / "metrics.json", metrics);

  save_pipeline(final_model, models_dir);

  nlohmann::json artifacts = nlohmann::json::object();
  for (const auto& entry : fs::directory_iterator(models_dir)) {
    if (entry.path().extension() != ".json") continue;
    artifacts["models/" + entry.path().filename().string()] =
        content_hash(read_text_file(entry.path()));
  }
  for (const auto& entry : fs::directory_iterator(metrics_dir)) {
    if (entry.path().extension() != ".csv") continue;
    artifacts["metrics/" + entry.path().filename().string()] =
        content_hash(read_text_file(entry.path()));
  }
  timings["total_ms"] = ms_since(t_start);

  nlohmann::json counts = nlohmann::json::object();
  for (std::size_t c = 0; c < corpus.index.classes.size(); ++c)
    counts[corpus.index.classes[c]] = corpus.index.counts[c];

  nlohmann::json manifest = {
      {"manifest_version", kManifestVersion},
      {"command", opts.command},
      {"config", to_json(cfg)},
      {"fingerprint", fp},
      {"dataset",
       {{"root", cfg.dataset.root.string()},
        {"num_images", corpus.size()},
        {"classes", corpus.index.classes},
        {"counts", counts},
        {"corpus_key", corpus.key}}},
      {"num_regions", cfg.fisher.enabled ? 0 : cfg.num_regions()},
      {"feature_dim", cfg.encoded_dim()},
      {"classifier_dim", cfg.classifier_dim()},
      {"protocol", summary.protocol},
      {"accuracy", summary.accuracy},
      {"final_model_train_size", num_train},
      {"cache_dir", cache_dir.string()},
      {"descriptor_cache_hit", corpus.loaded_from_cache},
      {"threads", opts.threads},
      {"artifacts", artifacts},
      {"timings", timings}};
  if (cfg.eval.protocol == Protocol::cv) manifest["std"] = summary.std;
  summary.manifest = out / "manifest.json";
  write_json_file(summary.manifest, manifest);
  return summary;
}

}  // namespace pyrabow
