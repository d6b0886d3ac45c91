#include <gtest/gtest.h>

#include <random>

#include "defectchain/error.hpp"
#include "defectchain/retrieval.hpp"
#include "oracles.hpp"

using namespace defectchain;

namespace {

Detection ruler(const std::string& id, Polygon region) {
  return {id, "img", Category::kUtility, "ruler", std::move(region), 1.0};
}

FeatureSet random_features(std::mt19937_64& rng, int n, double w, double h) {
  std::uniform_real_distribution<double> ux(0, w), uy(0, h);
  FeatureSet f;
  for (int i = 0; i < n; ++i) {
    f.keypoints.push_back(Keypoint{{ux(rng), uy(rng)}, 0, 0.0, double(n - i)});
    f.descriptors.push_back(oracle::random_descriptor(rng));
  }
  return f;
}

Vocabulary flat_vocabulary(std::vector<BinaryDescriptor> centroids) {
  Vocabulary v;
  v.idf.assign(centroids.size(), 1.0);
  v.centroids = std::move(centroids);
  return v;
}

BowVector sparse(std::vector<std::pair<std::uint32_t, double>> e) {
  double n = 0;
  for (auto& [w, x] : e) n += x * x;
  for (auto& [w, x] : e) x /= std::sqrt(n);
  return {std::move(e), false, 1};
}

}  // namespace

TEST(UtilityFilter, NoUtilityIsIdentity) {
  std::mt19937_64 rng(1);
  const FeatureSet f = random_features(rng, 50, 100, 100);
  const Detection crack{"c", "img", Category::kDefect, "crack", Polygon::rectangle(0, 0, 100, 100), 1.0};
  const FilteredFeatures out = filter_utility_keypoints(f, std::vector<Detection>{crack});
  EXPECT_EQ(out.features, f);
  for (std::uint32_t i = 0; i < out.source_index.size(); ++i) EXPECT_EQ(out.source_index[i], i);
}

TEST(UtilityFilter, FullCoverageRemovesEverything) {
  std::mt19937_64 rng(2);
  const FeatureSet f = random_features(rng, 50, 100, 100);
  EXPECT_EQ(filter_utility_keypoints(f, std::vector<Detection>{ruler("r", Polygon::rectangle(0, 0, 100, 100))}).size(),
            0u);
}

TEST(UtilityFilter, MatchesPointInPolygonOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureSet f = random_features(rng, 100, 100, 100);
    const auto ring = oracle::random_star(rng, 50, 50, 15, 45, 7);
    const FilteredFeatures out = filter_utility_keypoints(f, std::vector<Detection>{ruler("r", Polygon(ring))});
    std::size_t outside = 0;
    for (const auto& k : f.keypoints) outside += !oracle::ray_cast_inside(k.position, ring);
    ASSERT_EQ(out.size(), outside);
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(out.features.keypoints[i], f.keypoints[out.source_index[i]]);
      EXPECT_EQ(out.features.descriptors[i], f.descriptors[out.source_index[i]]);
    }
  }
}

TEST(Vocabulary, ExactlyKDistinctIsIdentity) {
  std::mt19937_64 rng(4);
  std::vector<BinaryDescriptor> sample;
  for (int i = 0; i < 16; ++i) sample.push_back(oracle::random_descriptor(rng));
  const std::vector<std::vector<BinaryDescriptor>> per_image{sample};
  const Vocabulary v = build_vocabulary(per_image, 16, 99);
  std::set<BinaryDescriptor> got(v.centroids.begin(), v.centroids.end());
  EXPECT_EQ(got, std::set<BinaryDescriptor>(sample.begin(), sample.end()));
}

TEST(Vocabulary, DeterministicInSeed) {
  std::mt19937_64 rng(5);
  std::vector<std::vector<BinaryDescriptor>> per_image(4);
  for (auto& img : per_image) {
    for (int i = 0; i < 100; ++i) img.push_back(oracle::random_descriptor(rng));
  }
  EXPECT_EQ(build_vocabulary(per_image, 20, 1), build_vocabulary(per_image, 20, 1));
  EXPECT_NE(build_vocabulary(per_image, 20, 1), build_vocabulary(per_image, 20, 2));
}

TEST(Vocabulary, SeparatedClustersRecoverMajority) {
  std::mt19937_64 rng(6);
  const BinaryDescriptor a = oracle::random_descriptor(rng);
  BinaryDescriptor b = a.complement();
  std::vector<BinaryDescriptor> ca, cb;
  for (int i = 0; i < 60; ++i) {
    ca.push_back(oracle::flip_bits(a, 4, rng));
    cb.push_back(oracle::flip_bits(b, 4, rng));
  }
  auto majority = [](const std::vector<BinaryDescriptor>& c) {
    BinaryDescriptor m;
    for (int bit = 0; bit < BinaryDescriptor::kBits; ++bit) {
      int ones = 0;
      for (const auto& d : c) ones += d.bit(bit);
      m.set_bit(bit, 2 * ones > int(c.size()));
    }
    return m;
  };
  const std::vector<std::vector<BinaryDescriptor>> per_image{ca, cb};
  const Vocabulary v = build_vocabulary(per_image, 2, 11);
  ASSERT_EQ(v.size(), 2u);
  const BinaryDescriptor ma = majority(ca), mb = majority(cb);
  const bool direct = hamming(v.centroids[0], ma) <= 8 && hamming(v.centroids[1], mb) <= 8;
  const bool swapped = hamming(v.centroids[1], ma) <= 8 && hamming(v.centroids[0], mb) <= 8;
  EXPECT_TRUE(direct || swapped);
}

TEST(Vocabulary, IdfIsNonNegative) {
  std::mt19937_64 rng(7);
  std::vector<std::vector<BinaryDescriptor>> per_image(3);
  for (auto& img : per_image) {
    for (int i = 0; i < 50; ++i) img.push_back(oracle::random_descriptor(rng));
  }
  const Vocabulary v = build_vocabulary(per_image, 10, 3);
  for (double x : v.idf) EXPECT_GE(x, 0.0);
}

TEST(Vocabulary, TooSmallSample) {
  std::mt19937_64 rng(8);
  const std::vector<std::vector<BinaryDescriptor>> per_image{{oracle::random_descriptor(rng)}};
  EXPECT_THROW(build_vocabulary(per_image, 2, 1), DataError);
  EXPECT_THROW(build_vocabulary(per_image, 0, 1), ConfigError);
}

TEST(Quantize, SingleDescriptorOnCentroid) {
  std::mt19937_64 rng(9);
  std::vector<BinaryDescriptor> c;
  for (int i = 0; i < 6; ++i) c.push_back(oracle::random_descriptor(rng));
  const Vocabulary v = flat_vocabulary(c);
  const BowVector b = quantize(std::vector<BinaryDescriptor>{c[3]}, v);
  ASSERT_EQ(b.entries.size(), 1u);
  EXPECT_EQ(b.entries[0].first, 3u);
  EXPECT_DOUBLE_EQ(b.entries[0].second, 1.0);
  const BowVector z = quantize(std::vector<BinaryDescriptor>{}, v);
  EXPECT_TRUE(z.is_zero());
  EXPECT_TRUE(z.empty_image);
}

TEST(Quantize, MatchesNearestCentroidOracle) {
  std::mt19937_64 rng(10);
  std::vector<std::vector<BinaryDescriptor>> per_image(5);
  for (auto& img : per_image) {
    for (int i = 0; i < 200; ++i) img.push_back(oracle::random_descriptor(rng));
  }
  const Vocabulary v = build_vocabulary(per_image, 40, 5, 5);
  for (const auto& img : per_image) {
    for (const auto& d : img) ASSERT_EQ(v.nearest_word(d), oracle::nearest_centroid(d, v.centroids));
    const BowVector b = quantize(img, v);
    const auto want = oracle::bow_oracle(img, v);
    ASSERT_EQ(b.entries.size(), want.size());
    for (const auto& [w, x] : b.entries) EXPECT_NEAR(x, want.at(w), 1e-12);
  }
}

TEST(BowSimilarity, Basics) {
  const BowVector v = sparse({{1, 2.0}, {4, 1.0}});
  EXPECT_NEAR(bow_similarity(v, v), 1.0, 1e-15);
  EXPECT_EQ(bow_similarity(v, sparse({{2, 1.0}, {3, 5.0}})), 0.0);
  BowVector other = v;
  other.vocabulary = 2;
  EXPECT_THROW(bow_similarity(v, other), DataError);
  EXPECT_EQ(bow_similarity(v, BowVector{{}, true, 1}), 0.0);
}

TEST(BowSimilarity, MatchesDenseDotProduct) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::uint32_t> word(0, 63);
  std::uniform_real_distribution<double> weight(0.01, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::map<std::uint32_t, double> ma, mb;
    for (int i = 0; i < 12; ++i) ma[word(rng)] = weight(rng);
    for (int i = 0; i < 12; ++i) mb[word(rng)] = weight(rng);
    const BowVector a = sparse({ma.begin(), ma.end()}), b = sparse({mb.begin(), mb.end()});
    std::vector<double> da(64, 0.0), db(64, 0.0);
    for (auto& [w, x] : a.entries) da[w] = x;
    for (auto& [w, x] : b.entries) db[w] = x;
    double dot = 0.0;
    for (int i = 0; i < 64; ++i) dot += da[i] * db[i];
    ASSERT_NEAR(bow_similarity(a, b), dot, 1e-9);
  }
}

TEST(CnnSimilarity, Endpoints) {
  const std::vector<float> e{1, 2, 3}, neg{-1, -2, -3}, x{1, 0, 0}, y{0, 1, 0};
  const auto ne = EmbeddingVector::normalized(std::span<const float>(e));
  EXPECT_NEAR(cnn_similarity(ne, ne), 1.0, 1e-15);
  EXPECT_NEAR(cnn_similarity(ne, EmbeddingVector::normalized(std::span<const float>(neg))), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(cnn_similarity(EmbeddingVector::normalized(std::span<const float>(x)),
                                  EmbeddingVector::normalized(std::span<const float>(y))),
                   0.5);
  const std::vector<float> zero{0, 0, 0}, two{1, 1};
  EXPECT_THROW(EmbeddingVector::normalized(std::span<const float>(zero)), DataError);
  EXPECT_THROW(cnn_similarity(ne, EmbeddingVector::normalized(std::span<const float>(two))), DataError);
}

TEST(CombinedSimilarity, Arithmetic) {
  EXPECT_NEAR(combined_similarity(0.8, 0.6, 0.5), 0.70, 1e-15);
  EXPECT_NEAR(combined_similarity(0.25, 0.75, 0.2), 0.65, 1e-15);
  EXPECT_EQ(combined_similarity(0.3141, 0.9, 1.0), 0.3141);
  EXPECT_EQ(combined_similarity(0.3141, 0.9, 0.0), 0.9);
  EXPECT_THROW(combined_similarity(0.5, 0.5, 1.01), ConfigError);
  EXPECT_THROW(combined_similarity(0.5, 0.5, -0.01), ConfigError);
  EXPECT_THROW(combined_similarity(1.5, 0.5, 0.5), DataError);
}

TEST(CombinedSimilarity, RandomTriplesStayInRange) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng), b = u(rng), alpha = u(rng);
    const double s = combined_similarity(a, b, alpha);
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
    ASSERT_GE(s, std::min(a, b) - 1e-15);
    ASSERT_LE(s, std::max(a, b) + 1e-15);
  }
}

TEST(Retrieve, DuplicateRanksFirstAndTiesById) {
  const BowVector a = sparse({{1, 1.0}, {2, 1.0}});
  const BowVector b = sparse({{1, 1.0}, {3, 1.0}});
  const RetrievalIndex idx({"q", "dup", "x2", "x1", "far"}, {a, a, b, b, sparse({{9, 1.0}})}, std::nullopt);
  RetrievalConfig cfg;
  const auto hits = retrieve("q", idx, cfg);
  ASSERT_EQ(hits.size(), 4u);
  EXPECT_EQ(hits[0].image_id, "dup");
  EXPECT_NEAR(hits[0].score, 1.0, 1e-12);
  EXPECT_EQ(hits[1].image_id, "x1");
  EXPECT_EQ(hits[2].image_id, "x2");
  EXPECT_EQ(hits[3].image_id, "far");
  cfg.top_k = 0;
  EXPECT_TRUE(retrieve("q", idx, cfg).empty());
  cfg.top_k = 10;
  cfg.min_score = 0.1;
  EXPECT_EQ(retrieve("q", idx, cfg).size(), 3u);
  EXPECT_THROW(retrieve("nope", idx, cfg), DataError);
}

TEST(Retrieve, AlphaForcedToOneWithoutEmbeddings) {
  const RetrievalIndex idx({"a", "b"}, {sparse({{1, 1.0}}), sparse({{1, 1.0}})}, std::nullopt);
  RetrievalConfig cfg;
  cfg.alpha = 0.3;
  EXPECT_EQ(idx.effective_alpha(cfg), 1.0);
  EXPECT_NEAR(retrieve("a", idx, cfg)[0].score, 1.0, 1e-12);
}

TEST(Retrieve, PairsAreCanonicalUnion) {
  const BowVector a = sparse({{1, 1.0}});
  const RetrievalIndex idx({"c", "b", "a"}, {a, a, a}, std::nullopt);
  RetrievalConfig cfg;
  cfg.top_k = 1;
  const auto pairs = retrieve_pairs(idx, cfg);
  for (const auto& p : pairs) EXPECT_LT(p.first, p.second);
  EXPECT_TRUE(std::is_sorted(pairs.begin(), pairs.end()));
}
