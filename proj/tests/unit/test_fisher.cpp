#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pyrabow/codebook.hpp"
#include "pyrabow/error.hpp"
#include "pyrabow/fisher.hpp"
#include "support.hpp"

using namespace pyrabow;
using testing_support::random_matrix;

namespace {

GmmModel manual_model(const std::vector<double>& weights, const Matrix& means,
                      const Matrix& variances) {
  GmmModel m;
  m.weights = weights;
  m.means = means;
  m.variances = variances;
  return m;
}

// Posterior of each component for x, computed directly from the densities.
std::vector<double> posterior(const GmmModel& m, std::span<const double> x) {
  const std::size_t K = m.num_components(), D = m.dim();
  std::vector<double> logp(K);
  double mx = -1e300;
  for (std::size_t k = 0; k < K; ++k) {
    double s = std::log(m.weights[k]);
    for (std::size_t d = 0; d < D; ++d) {
      const double v = m.variances(k, d), diff = x[d] - m.means(k, d);
      s += -0.5 * (std::log(2 * std::numbers::pi * v) + diff * diff / v);
    }
    logp[k] = s;
    mx = std::max(mx, s);
  }
  double z = 0;
  for (double& l : logp) z += (l = std::exp(l - mx));
  for (double& l : logp) l /= z;
  return logp;
}

Matrix two_blobs(std::size_t per, std::uint64_t seed, double sep) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.5);
  Matrix m(2 * per, 3);
  for (std::size_t i = 0; i < 2 * per; ++i)
    for (int d = 0; d < 3; ++d) m(i, d) = n(rng) + (i < per ? 0.0 : sep);
  return m;
}

}  // namespace

TEST(TrainGmm, SingleComponentIsSampleMoments) {
  const Matrix pts = random_matrix(50, 4, 3, 0.0, 2.0);
  GmmConfig cfg;
  cfg.components = 1;
  const GmmModel g = train_gmm(pts, cfg);
  ASSERT_EQ(g.num_components(), 1u);
  EXPECT_NEAR(g.weights[0], 1.0, 1e-12);
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < pts.rows(); ++i) mean += pts(i, d) / pts.rows();
    for (std::size_t i = 0; i < pts.rows(); ++i) var += std::pow(pts(i, d) - mean, 2) / pts.rows();
    EXPECT_NEAR(g.means(0, d), mean, 1e-9);
    EXPECT_NEAR(g.variances(0, d), std::max(var, cfg.variance_floor), 1e-9);
  }
}

TEST(TrainGmm, VarianceFloorApplies) {
  Matrix pts(10, 2, 1.0);  // zero variance
  GmmConfig cfg;
  cfg.components = 1;
  const GmmModel g = train_gmm(pts, cfg);
  EXPECT_DOUBLE_EQ(g.variances(0, 0), 1e-4);
}

TEST(TrainGmm, LogLikelihoodNonDecreasing) {
  GmmConfig cfg;
  cfg.components = 5;
  cfg.tol = 0.0;
  cfg.max_iter = 40;
  const GmmModel g = train_gmm(random_matrix(300, 4, 9), cfg);
  ASSERT_GE(g.log_likelihood_history.size(), 2u);
  for (std::size_t t = 1; t < g.log_likelihood_history.size(); ++t) {
    const double prev = g.log_likelihood_history[t - 1];
    EXPECT_GE(g.log_likelihood_history[t], prev - 1e-9 * std::max(1.0, std::abs(prev)));
  }
  double wsum = 0;
  for (double w : g.weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-9);
  for (double v : g.variances.data()) EXPECT_GE(v, cfg.variance_floor);
}

TEST(TrainGmm, RecoversSeparatedClusters) {
  const std::size_t per = 200;
  const Matrix pts = two_blobs(per, 4, 10.0);
  GmmConfig cfg;
  cfg.components = 2;
  const GmmModel g = train_gmm(pts, cfg);
  for (int c = 0; c < 2; ++c) {
    std::vector<double> sample(3, 0.0);
    for (std::size_t i = c * per; i < (c + 1) * per; ++i)
      for (int d = 0; d < 3; ++d) sample[d] += pts(i, d) / per;
    const std::size_t k = std::abs(g.means(0, 0) - sample[0]) < std::abs(g.means(1, 0) - sample[0]) ? 0 : 1;
    for (int d = 0; d < 3; ++d) EXPECT_NEAR(g.means(k, d), sample[d], 0.05);
  }
}

TEST(TrainGmm, Errors) {
  GmmConfig cfg;
  cfg.components = 10;
  EXPECT_THROW(train_gmm(random_matrix(5, 2, 1), cfg), Error);
  cfg.components = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(GmmPosteriors, RowsSumToOneAndMatchOracle) {
  GmmConfig cfg;
  cfg.components = 3;
  const Matrix pts = random_matrix(40, 3, 6);
  const GmmModel g = train_gmm(pts, cfg);
  const Matrix post = gmm_posteriors(g, pts);
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    double s = 0;
    const auto ref = posterior(g, pts.row(i));
    for (std::size_t k = 0; k < 3; ++k) {
      s += post(i, k);
      EXPECT_NEAR(post(i, k), ref[k], 1e-12);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(FisherEncode, RawMatchesClosedForm) {
  const Matrix means{{0.0, 1.0, -1.0}, {2.0, 0.5, 0.0}};
  const Matrix vars{{1.0, 0.5, 2.0}, {0.7, 1.5, 1.0}};
  const GmmModel g = manual_model({0.3, 0.7}, means, vars);
  const Matrix x = random_matrix(5, 3, 13, -2, 3);
  const auto raw = fisher_encode_raw(g, x, true);
  ASSERT_EQ(raw.size(), 2u * 2 * 3 + 2);
  const double N = 5;
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t d = 0; d < 3; ++d) {
      double mb = 0, vb = 0;
      for (std::size_t n = 0; n < 5; ++n) {
        const double gam = posterior(g, x.row(n))[k];
        const double z = (x(n, d) - means(k, d)) / std::sqrt(vars(k, d));
        mb += gam * z;
        vb += gam * (z * z - 1);
      }
      EXPECT_NEAR(raw[k * 3 + d], mb / (N * std::sqrt(g.weights[k])), 1e-12);
      EXPECT_NEAR(raw[6 + k * 3 + d], vb / (N * std::sqrt(2 * g.weights[k])), 1e-12);
    }
    double wb = 0;
    for (std::size_t n = 0; n < 5; ++n) wb += posterior(g, x.row(n))[k] - g.weights[k];
    EXPECT_NEAR(raw[12 + k], wb / (N * std::sqrt(g.weights[k])), 1e-12);
  }
}

TEST(FisherEncode, DescriptorsAtMeansGiveZeroMeanBlock) {
  Matrix means(2, 4), vars(2, 4, 1.0);
  for (std::size_t d = 0; d < 4; ++d) means(1, d) = 100.0;
  const GmmModel g = manual_model({0.5, 0.5}, means, vars);
  const Matrix x{{0, 0, 0, 0}, {100, 100, 100, 100}};
  const auto raw = fisher_encode_raw(g, x);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(raw[i], 0.0, 1e-8);
}

TEST(FisherEncode, SingleDescriptorOneSigmaAway) {
  const Matrix means{{0.5, -1.0}};
  const Matrix vars{{4.0, 0.25}};
  const GmmModel g = manual_model({1.0}, means, vars);
  const Matrix x{{0.5 + 2.0, -1.0 + 0.5}};
  const auto raw = fisher_encode_raw(g, x);
  EXPECT_NEAR(raw[0], 1.0, 1e-12);
  EXPECT_NEAR(raw[1], 1.0, 1e-12);
  EXPECT_NEAR(raw[2], 0.0, 1e-12);
  EXPECT_NEAR(raw[3], 0.0, 1e-12);
}

TEST(FisherEncode, LengthSignAndNorm) {
  const Matrix means = random_matrix(16, kDescriptorDim, 1, 0.0, 0.2);
  const Matrix vars(16, kDescriptorDim, 0.01);
  const GmmModel g = manual_model(std::vector<double>(16, 1.0 / 16), means, vars);
  std::vector<Descriptor> descs(7);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0.0f, 0.2f);
  for (auto& d : descs)
    for (float& v : d) v = u(rng);
  const FeatureVector f = fisher_encode(g, descs);
  ASSERT_EQ(f.size(), 4096u);
  EXPECT_EQ(f.tag, EncodingTag::fisher);
  const auto raw = fisher_encode_raw(g, to_matrix(descs));
  double n2 = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    n2 += f.values[i] * f.values[i];
    if (raw[i] != 0.0) {
      EXPECT_EQ(std::signbit(f.values[i]), std::signbit(raw[i]));
    }
    EXPECT_TRUE(std::isfinite(f.values[i]));
  }
  EXPECT_NEAR(n2, 1.0, 1e-9);
  EXPECT_EQ(fisher_encode(g, descs, true).size(), 4096u + 16);
}

TEST(FisherEncode, Errors) {
  const GmmModel g = manual_model({1.0}, Matrix{{0.0, 0.0}}, Matrix{{1.0, 1.0}});
  EXPECT_THROW(fisher_encode(g, Matrix(0, 2)), Error);
  EXPECT_THROW(fisher_encode(g, Matrix{{1.0, 2.0, 3.0}}), Error);
}

TEST(GmmJson, RoundTrip) {
  GmmConfig cfg;
  cfg.components = 2;
  const GmmModel g = train_gmm(random_matrix(30, 3, 5), cfg);
  const auto j = to_json(g);
  EXPECT_EQ(j.at("schema_version"), kGmmSchemaVersion);
  const GmmModel b = gmm_from_json(j);
  EXPECT_EQ(b.weights, g.weights);
  EXPECT_EQ(b.means, g.means);
  EXPECT_EQ(b.variances, g.variances);
}
