#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "defectchain/features.hpp"
#include "defectchain/model.hpp"

namespace defectchain {

struct RetrievalConfig {
  double alpha = 0.5;  // weight of the BoW term in the hybrid score
  int top_k = 10;
  double min_score = 0.0;
  int vocab_k = 1024;
  int vocab_iterations = 15;

  void validate() const;

  friend bool operator==(const RetrievalConfig&, const RetrievalConfig&) = default;
};

// Keypoints that survive utility filtering, with their positions in the
// unfiltered list.
struct FilteredFeatures {
  FeatureSet features;
  std::vector<std::uint32_t> source_index;

  static FilteredFeatures all_of(FeatureSet features);
  std::size_t size() const { return features.size(); }

  friend bool operator==(const FilteredFeatures&, const FilteredFeatures&) = default;
};

// Drops every keypoint that lies inside a utility-category detection.
// Detections of other categories are ignored.
FilteredFeatures filter_utility_keypoints(const FilteredFeatures& in,
                                          std::span<const Detection> detections);
FilteredFeatures filter_utility_keypoints(const FeatureSet& in,
                                          std::span<const Detection> detections);

struct Vocabulary {
  std::vector<BinaryDescriptor> centroids;
  std::vector<double> idf;
  std::uint64_t train_seed = 0;

  std::size_t size() const { return centroids.size(); }
  // Index of the nearest centroid; ties go to the lowest index.
  std::uint32_t nearest_word(const BinaryDescriptor& d) const;
  // Hash of centroids and idf; BoW vectors remember it.
  std::uint64_t fingerprint() const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

// Hamming-space k-majority clustering of all descriptors in `per_image`.
// Seeding is k-means++ style with a seeded generator, each update takes the
// per-bit majority of the cluster, and a seed-derived bit pattern breaks
// exact ties. idf_w = max(0, ln(N / (1 + n_w))) where N counts the images
// and n_w the images with at least one descriptor quantized to w.
Vocabulary build_vocabulary(std::span<const std::vector<BinaryDescriptor>> per_image,
                            int k, std::uint64_t seed, int max_iterations = 15);

struct BowVector {
  std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by word
  bool empty_image = false;  // the image had no descriptors
  std::uint64_t vocabulary = 0;

  bool is_zero() const { return entries.empty(); }
  friend bool operator==(const BowVector&, const BowVector&) = default;
};

BowVector quantize(std::span<const BinaryDescriptor> descriptors, const Vocabulary& vocab);

// Cosine of two TF-IDF vectors; 0 if either is zero. Throws DataError when
// the vectors come from different vocabularies.
double bow_similarity(const BowVector& a, const BowVector& b);

class EmbeddingVector {
 public:
  // L2-normalises; throws DataError on a zero or non-finite vector.
  static EmbeddingVector normalized(std::span<const float> raw);
  static EmbeddingVector normalized(std::span<const double> raw);

  std::span<const double> values() const { return values_; }
  std::size_t dimension() const { return values_.size(); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

// (cos(a,b) + 1) / 2. Throws DataError on dimension mismatch.
double cnn_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// alpha * s_sift + (1 - alpha) * s_cnn. Throws ConfigError for alpha
// outside [0,1] and DataError for scores outside [0,1].
double combined_similarity(double s_sift, double s_cnn, double alpha);

class RetrievalIndex {
 public:
  RetrievalIndex(std::vector<std::string> image_ids, std::vector<BowVector> bows,
                 std::optional<std::vector<EmbeddingVector>> embeddings);

  std::span<const std::string> image_ids() const { return ids_; }
  const BowVector& bow(std::size_t i) const { return bows_[i]; }
  bool has_embeddings() const { return embeddings_.has_value(); }
  const EmbeddingVector& embedding(std::size_t i) const { return (*embeddings_)[i]; }
  std::optional<std::size_t> find(std::string_view id) const;

  // alpha from cfg, or 1 when no embeddings were ingested.
  double effective_alpha(const RetrievalConfig& cfg) const;
  double score(std::size_t a, std::size_t b, double alpha) const;

 private:
  std::vector<std::string> ids_;
  std::vector<BowVector> bows_;
  std::optional<std::vector<EmbeddingVector>> embeddings_;
};

struct ScoredImage {
  std::string image_id;
  double score = 0.0;

  friend bool operator==(const ScoredImage&, const ScoredImage&) = default;
};

// Every other image scored with combined_similarity, filtered by min_score,
// top_k by descending score with ties broken by ascending image id.
std::vector<ScoredImage> retrieve(std::string_view query, const RetrievalIndex& index,
                                  const RetrievalConfig& cfg);

// Union of canonical (query, hit) pairs over all queries, sorted.
std::vector<IdPair> retrieve_pairs(const RetrievalIndex& index, const RetrievalConfig& cfg);

}  // namespace defectchain
