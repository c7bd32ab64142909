#include "support.hpp"

#include <nlohmann/json.hpp>

#include "pyrabow/synthetic.hpp"

namespace testing_support {

void write_small_corpus(const std::filesystem::path& root, int per_class, std::uint64_t seed) {
  pyrabow::GratingSpec spec;
  spec.per_class = per_class;
  spec.size = 48;
  spec.seed = seed;
  pyrabow::write_grating_corpus(root, spec);
}

std::string small_config_json(const std::filesystem::path& root) {
  nlohmann::json doc = {
      {"dataset", {{"root", root.string()}, {"split_seed", 3}}},
      {"codebook", {{"k", 32}, {"seed", 5}}},
      {"encoding", {{"pyramid_shape", "horizontal"}, {"pyramid_level", 1}}},
      {"classifier", {{"kind", "svm"}, {"kernel", "rbf"}}},
      {"eval", {{"folds", 4}, {"seed", 9}}}};
  return doc.dump(2);
}

}  // namespace testing_support
