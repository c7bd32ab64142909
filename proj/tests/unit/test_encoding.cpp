#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles/oracles.hpp"
#include "pyrabow/encoding.hpp"
#include "pyrabow/error.hpp"
#include "support.hpp"

using namespace pyrabow;
using testing_support::random_matrix;
using testing_support::to_rows;

namespace {

PyramidSpec spec(PyramidShape s, int level) {
  PyramidSpec p;
  p.shape = s;
  p.level = level;
  return p;
}

FeatureVector fv(std::vector<double> v, std::size_t block = 0) {
  FeatureVector f;
  f.values = std::move(v);
  f.block_size = block;
  return f;
}

}  // namespace

TEST(PyramidRegions, Counts) {
  EXPECT_EQ(pyramid_regions(spec(PyramidShape::square, 2), 64, 64).size(), 21u);
  EXPECT_EQ(pyramid_regions(spec(PyramidShape::horizontal, 2), 64, 64).size(), 10u);
  EXPECT_EQ(pyramid_regions(spec(PyramidShape::horizontal, 3), 64, 64).size(), 19u);
  EXPECT_EQ(region_count(spec(PyramidShape::square, 2)), 21u);
  EXPECT_EQ(region_count(spec(PyramidShape::horizontal, 1)), 4u);
  for (auto s : {PyramidShape::square, PyramidShape::horizontal}) {
    const auto l0 = pyramid_regions(spec(s, 0), 37, 23);
    ASSERT_EQ(l0.size(), 1u);
    EXPECT_EQ(l0.regions[0], (Region{0, 0, 37, 23}));
  }
}

TEST(PyramidRegions, LevelsTileTheImage) {
  for (auto s : {PyramidShape::square, PyramidShape::horizontal}) {
    const int w = 53, h = 41;
    const auto layout = pyramid_regions(spec(s, 2), w, h);
    for (std::size_t l = 0; l < layout.levels.size(); ++l) {
      const auto& lv = layout.levels[l];
      const std::size_t n = static_cast<std::size_t>(lv.cols) * lv.rows;
      long long area = 0;
      for (std::size_t i = lv.first; i < lv.first + n; ++i) area += layout.regions[i].area();
      EXPECT_EQ(area, static_cast<long long>(w) * h);
      // No overlaps: every pixel lands in exactly one region of the level.
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          int hits = 0;
          for (std::size_t i = lv.first; i < lv.first + n; ++i) {
            const Region& r = layout.regions[i];
            hits += x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1;
          }
          ASSERT_EQ(hits, 1);
        }
    }
  }
}

TEST(PyramidRegions, HorizontalStripsAreFullWidth) {
  const auto layout = pyramid_regions(spec(PyramidShape::horizontal, 2), 30, 60);
  for (std::size_t i = 4; i < 10; ++i) {
    EXPECT_EQ(layout.regions[i].x0, 0);
    EXPECT_EQ(layout.regions[i].x1, 30);
    EXPECT_EQ(layout.regions[i].y1 - layout.regions[i].y0, 10);
  }
}

TEST(PyramidRegions, TooSmallThrows) {
  EXPECT_THROW(pyramid_regions(spec(PyramidShape::square, 2), 3, 8), Error);
  EXPECT_THROW(pyramid_regions(spec(PyramidShape::horizontal, 2), 8, 5), Error);
}

TEST(EncodeBovw, SingleRegionCount) {
  const auto layout = pyramid_regions(spec(PyramidShape::square, 0), 10, 10);
  std::vector<Keypoint> kps(5, Keypoint{3, 3, 1});
  std::vector<int> words(5, 2);
  const FeatureVector v = encode_bovw(kps, words, layout, 4);
  EXPECT_EQ(v.values, (std::vector<double>{0, 0, 5, 0}));
  EXPECT_EQ(v.block_size, 4u);
}

TEST(EncodeBovw, MatchesBruteForceMembership) {
  const int w = 40, h = 30, k = 5;
  const auto layout = pyramid_regions(spec(PyramidShape::square, 1), w, h);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<float> ux(0.0f, static_cast<float>(w)), uy(0.0f, static_cast<float>(h));
  std::uniform_int_distribution<int> uw(0, k - 1);
  std::vector<Keypoint> kps;
  std::vector<int> words;
  for (int i = 0; i < 10; ++i) {
    kps.push_back({ux(rng), uy(rng), 1});
    words.push_back(uw(rng));
  }
  kps.push_back({20.0f, 15.0f, 1});  // on both interior boundaries
  words.push_back(0);
  kps.push_back({static_cast<float>(w), static_cast<float>(h), 1});  // far corner
  words.push_back(1);

  const FeatureVector v = encode_bovw(kps, words, layout, k);
  ASSERT_EQ(v.size(), 5u * k);
  std::vector<double> expect(5 * k, 0.0);
  for (std::size_t i = 0; i < kps.size(); ++i) {
    expect[words[i]] += 1;  // level 0
    // Level 1: 2x2 cells at x < 20 / y < 15 boundaries.
    const int col = kps[i].x >= 20.0f ? 1 : 0;
    const int row = kps[i].y >= 15.0f ? 1 : 0;
    expect[(1 + row * 2 + col) * k + words[i]] += 1;
  }
  EXPECT_EQ(v.values, expect);
  double level0 = 0, level1 = 0;
  for (int i = 0; i < k; ++i) level0 += v.values[i];
  for (int i = k; i < 5 * k; ++i) level1 += v.values[i];
  EXPECT_EQ(level0, static_cast<double>(kps.size()));
  EXPECT_EQ(level1, static_cast<double>(kps.size()));
}

TEST(EncodeBovw, Errors) {
  const auto layout = pyramid_regions(spec(PyramidShape::square, 0), 10, 10);
  std::vector<Keypoint> kps(2, Keypoint{1, 1, 1});
  EXPECT_THROW(encode_bovw(kps, std::vector<int>{0}, layout, 4), Error);
  EXPECT_THROW(encode_bovw(kps, std::vector<int>{0, 4}, layout, 4), Error);
}

TEST(Normalize, Identities) {
  EXPECT_EQ(normalize(fv({3, 4}), NormKind::l2).values, (std::vector<double>{0.6, 0.8}));
  EXPECT_EQ(normalize(fv({1, 3}), NormKind::sum).values, (std::vector<double>{0.25, 0.75}));
  ScalerStats st{{2.0, 2.0}, {1.0, 1.0}};
  EXPECT_EQ(normalize(fv({1, 3}), NormKind::standard, &st).values, (std::vector<double>{-1, 1}));
  EXPECT_EQ(normalize(fv({1, 3}), NormKind::none).values, (std::vector<double>{1, 3}));
}

TEST(Normalize, PerBlockAndZeroBlocks) {
  const auto l2 = normalize(fv({3, 4, 0, 0, 0, 5}, 2), NormKind::l2).values;
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_NEAR(l2[i], (std::vector<double>{0.6, 0.8, 0, 0, 0, 1})[i], 1e-12);
  const auto s = normalize(fv({1, 1, 0, 0, 2, 6}, 2), NormKind::sum).values;
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_NEAR(s[i], (std::vector<double>{0.5, 0.5, 0, 0, 0.25, 0.75})[i], 1e-12);
}

TEST(Normalize, StandardErrors) {
  ScalerStats st{{0.0}, {1.0}};
  EXPECT_THROW(normalize(fv({1, 2}), NormKind::standard, &st), Error);
  EXPECT_THROW(normalize(fv({1}), NormKind::standard, nullptr), Error);
  ScalerStats zero{{5.0}, {0.0}};
  EXPECT_EQ(normalize(fv({7}), NormKind::standard, &zero).values[0], 0.0);
}

TEST(FitScaler, SimpleAndConstant) {
  const ScalerStats a = fit_scaler(Matrix{{0.0, 4.0}, {2.0, 4.0}});
  EXPECT_EQ(a.mean, (std::vector<double>{1.0, 4.0}));
  EXPECT_EQ(a.std, (std::vector<double>{1.0, 0.0}));
  EXPECT_THROW(fit_scaler(Matrix()), Error);
}

TEST(FitScaler, MatchesTwoPassOracleAndStandardises) {
  const Matrix m = random_matrix(5, 3, 21, -5, 9);
  const ScalerStats st = fit_scaler(m);
  const auto [mean, sd] = oracle::two_pass_stats(to_rows(m));
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(st.mean[j], mean[j], 1e-12);
    EXPECT_NEAR(st.std[j], sd[j], 1e-12);
  }
  Matrix z(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto v = normalize(fv({m.row(i).begin(), m.row(i).end()}), NormKind::standard, &st);
    std::copy(v.values.begin(), v.values.end(), z.row(i).begin());
  }
  const auto [zm, zs] = oracle::two_pass_stats(to_rows(z));
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(zm[j], 0.0, 1e-8);
    EXPECT_NEAR(zs[j], 1.0, 1e-8);
  }
}

TEST(FitPca, RankOneLine) {
  Matrix m(6, 2);
  for (int i = 0; i < 6; ++i) {
    m(i, 0) = i - 2.0;
    m(i, 1) = 2.0 * (i - 2.0);
  }
  const PcaModel p = fit_pca(m, 2);
  EXPECT_NEAR(p.explained_variance[1], 0.0, 1e-10);
  EXPECT_NEAR(p.explained_variance[0] / (p.explained_variance[0] + p.explained_variance[1]), 1.0, 1e-12);
  EXPECT_NEAR(p.components(0, 0), 1.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(p.components(0, 1), 2.0 / std::sqrt(5.0), 1e-12);
}

TEST(FitPca, FullRankReconstructs) {
  const Matrix m = random_matrix(12, 5, 31);
  const PcaModel p = fit_pca(m, 5);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto proj = project_pca(p, fv({m.row(i).begin(), m.row(i).end()}));
    EXPECT_EQ(proj.tag, EncodingTag::bovw_pca);
    const auto back = reconstruct_pca(p, proj.values);
    for (std::size_t j = 0; j < m.cols(); ++j) EXPECT_NEAR(back[j], m(i, j), 1e-8);
  }
}

TEST(FitPca, MatchesJacobiOracle) {
  const std::size_t n = 20, d = 6;
  const Matrix m = random_matrix(n, d, 44);
  const PcaModel p = fit_pca(m, 3);
  const auto eig = oracle::jacobi_eigen(oracle::covariance(to_rows(m)));
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(p.explained_variance[c], eig.values[c], 1e-10);
    // Same direction up to sign.
    double dotp = 0;
    for (std::size_t j = 0; j < d; ++j) dotp += p.components(c, j) * eig.vectors[c][j];
    EXPECT_NEAR(std::abs(dotp), 1.0, 1e-8);
  }
  // Squared reconstruction error over the training set = (n - 1) * discarded eigenvalues.
  double err = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto proj = project_pca(p, fv({m.row(i).begin(), m.row(i).end()}));
    const auto back = reconstruct_pca(p, proj.values);
    for (std::size_t j = 0; j < d; ++j) err += std::pow(back[j] - m(i, j), 2);
  }
  double discarded = 0;
  for (std::size_t c = 3; c < d; ++c) discarded += eig.values[c];
  EXPECT_NEAR(err, (n - 1) * discarded, 1e-8);
}

TEST(FitPca, OrthonormalSortedSigned) {
  for (auto [n, d] : {std::pair<std::size_t, std::size_t>{30, 8}, {6, 15}}) {
    const Matrix m = random_matrix(n, d, n * 7 + d);
    const int k = 4;
    const PcaModel p = fit_pca(m, k);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += p.components(a, j) * p.components(b, j);
        EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 1e-8);
      }
      if (a > 0) {
        EXPECT_LE(p.explained_variance[a], p.explained_variance[a - 1]);
      }
      double big = 0;
      for (std::size_t j = 0; j < d; ++j)
        if (std::abs(p.components(a, j)) > std::abs(big)) big = p.components(a, j);
      EXPECT_GT(big, 0.0);
    }
  }
}

TEST(ProjectPca, MeanBasisAndOracle) {
  const Matrix m = random_matrix(15, 4, 8);
  const PcaModel p = fit_pca(m, 3);
  for (double x : project_pca(p, fv(p.mean)).values) EXPECT_NEAR(x, 0.0, 1e-12);
  std::vector<double> on_axis = p.mean;
  for (std::size_t j = 0; j < 4; ++j) on_axis[j] += 2.5 * p.components(1, j);
  const auto c = project_pca(p, fv(on_axis)).values;
  EXPECT_NEAR(c[0], 0.0, 1e-12);
  EXPECT_NEAR(c[1], 2.5, 1e-12);
  const std::vector<double> v{0.3, -1.2, 0.8, 2.0};
  const auto got = project_pca(p, fv(v)).values;
  for (int k = 0; k < 3; ++k) {
    double s = 0;
    for (std::size_t j = 0; j < 4; ++j) s += (v[j] - p.mean[j]) * p.components(k, j);
    EXPECT_NEAR(got[k], s, 1e-12);
  }
  EXPECT_THROW(project_pca(p, fv({1.0, 2.0})), Error);
}

TEST(FitPca, TooManyComponents) {
  EXPECT_THROW(fit_pca(random_matrix(5, 8, 1), 5), Error);
  EXPECT_THROW(fit_pca(random_matrix(20, 3, 1), 4), Error);
  EXPECT_THROW(fit_pca(random_matrix(20, 3, 1), 0), Error);
}

TEST(EncodingJson, ScalerAndPcaRoundTrip) {
  const Matrix m = random_matrix(10, 4, 2);
  const ScalerStats st = fit_scaler(m);
  const ScalerStats st2 = scaler_from_json(to_json(st));
  EXPECT_EQ(st.mean, st2.mean);
  EXPECT_EQ(st.std, st2.std);
  const PcaModel p = fit_pca(m, 2);
  const PcaModel p2 = pca_from_json(to_json(p));
  EXPECT_EQ(p.components, p2.components);
  EXPECT_EQ(p.explained_variance, p2.explained_variance);
  EXPECT_EQ(to_json(p).at("schema_version"), kPcaSchemaVersion);
}
