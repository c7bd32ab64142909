#include "pyrabow/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "pyrabow/error.hpp"

namespace fs = std::filesystem;

namespace pyrabow {
namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const DatasetIndex& index) {
  std::vector<std::vector<std::size_t>> by_class(index.classes.size());
  for (std::size_t i = 0; i < index.records.size(); ++i)
    by_class.at(static_cast<std::size_t>(index.records[i].class_id)).push_back(i);
  return by_class;
}

}  // namespace

std::vector<int> DatasetIndex::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.class_id);
  return out;
}

bool is_supported_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".pgm" || ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

DatasetIndex scan_dataset(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec))
    throw Error("dataset root not found: " + root.string());

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name[0] != '.')
      class_dirs.push_back(entry.path());
  }
  if (class_dirs.empty()) throw Error("no classes found in " + root.string());
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });

  DatasetIndex index;
  index.root = root;
  for (const auto& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_supported_image(entry.path()))
        files.push_back(entry.path());
    }
    if (files.empty()) continue;
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
      return a.filename().string() < b.filename().string();
    });
    const int id = static_cast<int>(index.classes.size());
    index.classes.push_back(dir.filename().string());
    index.counts.push_back(files.size());
    for (auto& f : files)
      index.records.push_back({std::move(f), id, index.classes.back()});
  }
  if (index.records.empty()) throw Error("no images found in " + root.string());
  return index;
}

DatasetIndex subset(const DatasetIndex& index, std::span<const std::size_t> indices) {
  DatasetIndex out;
  out.root = index.root;
  out.classes = index.classes;
  out.counts.assign(index.classes.size(), 0);
  out.records.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto& r = index.records.at(i);
    out.records.push_back(r);
    ++out.counts[static_cast<std::size_t>(r.class_id)];
  }
  return out;
}

Split stratified_split(const DatasetIndex& index, double train_fraction,
                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error("train_fraction must lie strictly between 0 and 1");

  std::mt19937_64 rng(seed);
  Split split;
  auto by_class = indices_by_class(index);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < 2)
      throw Error("class '" + index.classes[c] + "' has fewer than 2 samples; "
                  "cannot stratify");
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(members.size()) * train_fraction));
    split.train_indices.insert(split.train_indices.end(), members.begin(),
                               members.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test_indices.insert(split.test_indices.end(),
                              members.begin() + static_cast<std::ptrdiff_t>(n_train),
                              members.end());
  }
  std::sort(split.train_indices.begin(), split.train_indices.end());
  std::sort(split.test_indices.begin(), split.test_indices.end());
  split.train = subset(index, split.train_indices);
  split.test = subset(index, split.test_indices);
  return split;
}

std::vector<std::size_t> FoldAssignment::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

FoldAssignment stratified_folds(const DatasetIndex& index, int k, std::uint64_t seed) {
  if (k < 2) throw Error("fold count must be at least 2");
  auto by_class = indices_by_class(index);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < static_cast<std::size_t>(k))
      throw Error("class '" + index.classes[c] + "' has " +
                  std::to_string(by_class[c].size()) + " samples, fewer than " +
                  std::to_string(k) + " folds");
  }

  std::mt19937_64 rng(seed);
  FoldAssignment folds;
  folds.k = k;
  folds.fold_of.assign(index.records.size(), -1);
  std::size_t deal = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i : members) folds.fold_of[i] = static_cast<int>(deal++ % k);
  }
  return folds;
}

nlohmann::json to_json(const DatasetIndex& index) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : index.records)
    records.push_back({{"path", r.path.string()}, {"class_id", r.class_id}});
  return {{"schema_version", kDatasetSchemaVersion},
          {"root", index.root.string()},
          {"classes", index.classes},
          {"counts", index.counts},
          {"records", std::move(records)}};
}

DatasetIndex dataset_from_json(const nlohmann::json& doc) {
  if (doc.at("schema_version").get<int>() != kDatasetSchemaVersion)
    throw Error("unsupported dataset index schema_version");
  DatasetIndex index;
  index.root = doc.at("root").get<std::string>();
  index.classes = doc.at("classes").get<std::vector<std::string>>();
  index.counts.assign(index.classes.size(), 0);
  for (const auto& r : doc.at("records")) {
    ImageRecord rec;
    rec.path = r.at("path").get<std::string>();
    rec.class_id = r.at("class_id").get<int>();
    if (rec.class_id < 0 || rec.class_id >= index.num_classes())
      throw Error("dataset index record has out-of-range class_id");
    rec.class_name = index.classes[static_cast<std::size_t>(rec.class_id)];
    ++index.counts[static_cast<std::size_t>(rec.class_id)];
    index.records.push_back(std::move(rec));
  }
  return index;
}

}  // namespace pyrabow
