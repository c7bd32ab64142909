#include <benchmark/benchmark.h>

#include <random>

#include "pyrabow/classify.hpp"
#include "pyrabow/codebook.hpp"
#include "pyrabow/features.hpp"
#include "pyrabow/fisher.hpp"
#include "pyrabow/synthetic.hpp"

using namespace pyrabow;

namespace {

Matrix uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = u(rng);
  return m;
}

std::vector<Descriptor> descriptors(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 0.3f);
  std::vector<Descriptor> out(n);
  for (auto& d : out)
    for (float& v : d) v = u(rng);
  return out;
}

}  // namespace

static void BM_DenseExtraction(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const GrayImage img = make_grating(45.0, 8.0, 0.3, side, 80.0, 20.0, 1);
  const DenseGridSpec spec;
  std::size_t n = 0;
  for (auto _ : state) {
    const DenseFeatures f = extract_dense(img, spec);
    n = f.descriptors.size();
    benchmark::DoNotOptimize(f.descriptors.data());
  }
  state.counters["descriptors"] = static_cast<double>(n);
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n));
}
BENCHMARK(BM_DenseExtraction)->Arg(64)->Arg(256);

static void BM_Quantize(benchmark::State& state) {
  Codebook cb;
  cb.centroids = uniform(static_cast<std::size_t>(state.range(0)), kDescriptorDim, 2);
  const auto descs = descriptors(1000, 3);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_image(cb, descs));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * descs.size()));
}
BENCHMARK(BM_Quantize)->Arg(128)->Arg(512);

static void BM_KMeans(benchmark::State& state) {
  const Matrix pts = uniform(5000, kDescriptorDim, 4);
  KMeansConfig cfg;
  cfg.k = static_cast<int>(state.range(0));
  cfg.max_iter = 10;
  for (auto _ : state) benchmark::DoNotOptimize(train_codebook(pts, cfg).objective);
}
BENCHMARK(BM_KMeans)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_SvmTrain(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix X = uniform(n, 512, 5);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 3);
  KernelSpec k;
  k.kind = KernelKind::rbf;
  k = resolve_gamma(k, X);
  for (auto _ : state) benchmark::DoNotOptimize(train_svm(X, y, k, SvmConfig{}).bias);
}
BENCHMARK(BM_SvmTrain)->Arg(126)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_FisherEncode(benchmark::State& state) {
  GmmConfig cfg;
  cfg.components = static_cast<int>(state.range(0));
  cfg.max_iter = 5;
  const GmmModel gmm = train_gmm(uniform(2000, kDescriptorDim, 6), cfg);
  const auto descs = descriptors(500, 7);
  for (auto _ : state) benchmark::DoNotOptimize(fisher_encode(gmm, descs).values.data());
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * descs.size()));
}
BENCHMARK(BM_FisherEncode)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
