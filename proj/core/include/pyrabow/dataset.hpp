#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pyrabow {

struct ImageRecord {
  std::filesystem::path path;
  int class_id = 0;
  std::string class_name;
};

/// A labelled corpus. Classes are sorted lexicographically and class_id
/// indexes into `classes`; records are grouped by class, then by file name.
struct DatasetIndex {
  std::filesystem::path root;
  std::vector<std::string> classes;
  std::vector<ImageRecord> records;
  std::vector<std::size_t> counts;

  std::size_t size() const { return records.size(); }
  int num_classes() const { return static_cast<int>(classes.size()); }
  std::vector<int> labels() const;
};

/// Extensions (lower-case, with dot) that scan_dataset picks up.
bool is_supported_image(const std::filesystem::path& p);

/// Indexes `<root>/<class>/<image>`. Class directories without any supported
/// image are ignored. Throws Error when root is missing, has no class
/// directories ("no classes found") or contains no images.
DatasetIndex scan_dataset(const std::filesystem::path& root);

/// Records at `indices`, with counts recomputed. Class list is kept whole.
DatasetIndex subset(const DatasetIndex& index, std::span<const std::size_t> indices);

struct Split {
  DatasetIndex train;
  DatasetIndex test;
  std::vector<std::size_t> train_indices;  // positions in the source index
  std::vector<std::size_t> test_indices;
};

/// Per class, floor(count * train_fraction) records go to train after a
/// seeded shuffle; the rest go to test. Index lists are sorted ascending.
Split stratified_split(const DatasetIndex& index, double train_fraction,
                       std::uint64_t seed);

struct FoldAssignment {
  int k = 0;
  std::vector<int> fold_of;

  std::vector<std::size_t> train_indices(int fold) const;
  std::vector<std::size_t> test_indices(int fold) const;
};

/// Seeded per-class shuffle followed by round-robin dealing into k folds.
/// The dealing position carries over between classes so fold totals stay
/// balanced too.
FoldAssignment stratified_folds(const DatasetIndex& index, int k,
                                std::uint64_t seed);

inline constexpr int kDatasetSchemaVersion = 1;
nlohmann::json to_json(const DatasetIndex& index);
DatasetIndex dataset_from_json(const nlohmann::json& doc);

}  // namespace pyrabow
