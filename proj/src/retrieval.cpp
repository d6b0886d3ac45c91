#include "defectchain/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "defectchain/error.hpp"
#include "defectchain/rng.hpp"

namespace defectchain {

void RetrievalConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  if (top_k < 0) throw ConfigError("top_k must be >= 0");
  if (!(min_score >= 0.0 && min_score <= 1.0)) throw ConfigError("min_score must lie in [0,1]");
  if (vocab_k < 1) throw ConfigError("vocab_k must be >= 1");
  if (vocab_iterations < 1) throw ConfigError("vocab_iterations must be >= 1");
}

FilteredFeatures FilteredFeatures::all_of(FeatureSet features) {
  FilteredFeatures out;
  out.source_index.resize(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) out.source_index[i] = std::uint32_t(i);
  out.features = std::move(features);
  return out;
}

FilteredFeatures filter_utility_keypoints(const FilteredFeatures& in,
                                          std::span<const Detection> detections) {
  std::vector<const Polygon*> utilities;
  for (const Detection& d : detections) {
    if (d.category == Category::kUtility) utilities.push_back(&d.region);
  }
  if (utilities.empty()) return in;

  FilteredFeatures out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const Point2 p = in.features.keypoints[i].position;
    const bool covered = std::any_of(utilities.begin(), utilities.end(),
                                     [&](const Polygon* poly) { return point_in_region(p, *poly); });
    if (covered) continue;
    out.features.keypoints.push_back(in.features.keypoints[i]);
    out.features.descriptors.push_back(in.features.descriptors[i]);
    out.source_index.push_back(in.source_index[i]);
  }
  return out;
}

FilteredFeatures filter_utility_keypoints(const FeatureSet& in,
                                          std::span<const Detection> detections) {
  return filter_utility_keypoints(FilteredFeatures::all_of(in), detections);
}

std::uint32_t Vocabulary::nearest_word(const BinaryDescriptor& d) const {
  std::uint32_t best = 0;
  int best_dist = BinaryDescriptor::kBits + 1;
  for (std::uint32_t w = 0; w < centroids.size(); ++w) {
    const int dist = hamming(d, centroids[w]);
    if (dist < best_dist) {
      best_dist = dist;
      best = w;
      if (dist == 0) break;
    }
  }
  return best;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = fnv1a64("vocabulary");
  for (const BinaryDescriptor& c : centroids) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(c.words.data()), sizeof(c.words)), h);
  }
  for (double v : idf) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&bits), sizeof bits), h);
  }
  return h;
}

namespace {

std::vector<BinaryDescriptor> kmeanspp_seeds(const std::vector<BinaryDescriptor>& sample, int k,
                                             Rng& rng) {
  const std::size_t n = sample.size();
  std::vector<BinaryDescriptor> seeds;
  seeds.reserve(k);
  seeds.push_back(sample[rng.below(n)]);
  std::vector<std::uint32_t> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int d = hamming(sample[i], seeds[0]);
    d2[i] = std::uint32_t(d * d);
  }
  while (int(seeds.size()) < k) {
    std::uint64_t total = 0;
    for (std::uint32_t v : d2) total += v;
    if (total == 0) {
      throw DataError("vocabulary sample has fewer than " + std::to_string(k) +
                      " distinct descriptors");
    }
    std::uint64_t target = rng.below(total);
    std::size_t pick = 0;
    for (; pick < n; ++pick) {
      if (target < d2[pick]) break;
      target -= d2[pick];
    }
    seeds.push_back(sample[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      const int d = hamming(sample[i], seeds.back());
      d2[i] = std::min(d2[i], std::uint32_t(d * d));
    }
  }
  return seeds;
}

}  // namespace

Vocabulary build_vocabulary(std::span<const std::vector<BinaryDescriptor>> per_image, int k,
                            std::uint64_t seed, int max_iterations) {
  if (k < 1) throw ConfigError("vocabulary size must be >= 1");
  std::vector<BinaryDescriptor> sample;
  for (const auto& img : per_image) sample.insert(sample.end(), img.begin(), img.end());
  if (sample.size() < std::size_t(k)) {
    throw DataError("vocabulary sample of " + std::to_string(sample.size()) +
                    " descriptors is smaller than k=" + std::to_string(k));
  }

  Rng rng(derive_seed(seed, "vocabulary"));
  BinaryDescriptor tie_bits;
  for (auto& w : tie_bits.words) w = rng.next_u64();

  Vocabulary vocab;
  vocab.train_seed = seed;
  vocab.centroids = kmeanspp_seeds(sample, k, rng);

  std::vector<std::uint32_t> assign(sample.size(), UINT32_MAX);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const std::uint32_t w = vocab.nearest_word(sample[i]);
      changed |= w != assign[i];
      assign[i] = w;
    }
    if (!changed) break;

    std::vector<std::array<std::uint32_t, BinaryDescriptor::kBits>> ones(k);
    std::vector<std::uint32_t> members(k, 0);
    for (auto& o : ones) o.fill(0);
    for (std::size_t i = 0; i < sample.size(); ++i) {
      auto& o = ones[assign[i]];
      ++members[assign[i]];
      for (int wi = 0; wi < 4; ++wi) {
        std::uint64_t bits = sample[i].words[wi];
        while (bits) {
          o[wi * 64 + std::countr_zero(bits)]++;
          bits &= bits - 1;
        }
      }
    }

    const std::vector<BinaryDescriptor> previous = vocab.centroids;
    for (int c = 0; c < k; ++c) {
      if (members[c] == 0) continue;
      BinaryDescriptor next;
      for (int b = 0; b < BinaryDescriptor::kBits; ++b) {
        const std::uint32_t twice = 2 * ones[c][b];
        next.set_bit(b, twice == members[c] ? tie_bits.bit(b) : twice > members[c]);
      }
      vocab.centroids[c] = next;
    }

    // Keep centroids distinct: a collision reverts to the previous value,
    // and failing that takes the sample point farthest from its centroid.
    std::set<BinaryDescriptor> used;
    for (int c = 0; c < k; ++c) {
      if (used.contains(vocab.centroids[c])) vocab.centroids[c] = previous[c];
      if (used.contains(vocab.centroids[c])) {
        int best = -1;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < sample.size(); ++i) {
          if (used.contains(sample[i])) continue;
          const int d = hamming(sample[i], previous[assign[i]]);
          if (d > best) {
            best = d;
            best_i = i;
          }
        }
        vocab.centroids[c] = sample[best_i];
      }
      used.insert(vocab.centroids[c]);
    }
  }

  const double n_images = double(per_image.size());
  std::vector<std::uint32_t> doc_freq(k, 0);
  for (const auto& img : per_image) {
    std::vector<bool> seen(k, false);
    for (const auto& d : img) seen[vocab.nearest_word(d)] = true;
    for (int w = 0; w < k; ++w) doc_freq[w] += seen[w];
  }
  vocab.idf.resize(k);
  for (int w = 0; w < k; ++w) {
    vocab.idf[w] = std::max(0.0, std::log(n_images / (1.0 + doc_freq[w])));
  }
  return vocab;
}

BowVector quantize(std::span<const BinaryDescriptor> descriptors, const Vocabulary& vocab) {
  BowVector out;
  out.vocabulary = vocab.fingerprint();
  out.empty_image = descriptors.empty();
  std::vector<std::uint32_t> tf(vocab.size(), 0);
  for (const auto& d : descriptors) ++tf[vocab.nearest_word(d)];
  double norm2 = 0.0;
  for (std::uint32_t w = 0; w < tf.size(); ++w) {
    const double v = tf[w] * vocab.idf[w];
    if (v > 0.0) {
      out.entries.emplace_back(w, v);
      norm2 += v * v;
    }
  }
  const double norm = std::sqrt(norm2);
  for (auto& [w, v] : out.entries) v /= norm;
  return out;
}

double bow_similarity(const BowVector& a, const BowVector& b) {
  if (a.vocabulary != b.vocabulary) {
    throw DataError("BoW vectors were built with different vocabularies");
  }
  if (a.is_zero() || b.is_zero()) return 0.0;
  double dot = 0.0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() && ib != b.entries.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return std::clamp(dot, 0.0, 1.0);
}

namespace {

template <typename T>
void normalize_into(std::span<const T> raw, std::vector<double>& values) {
  double norm2 = 0.0;
  for (T v : raw) {
    if (!std::isfinite(double(v))) throw DataError("embedding has a non-finite component");
    norm2 += double(v) * double(v);
  }
  if (raw.empty() || norm2 == 0.0) throw DataError("embedding is empty or zero");
  const double norm = std::sqrt(norm2);
  values.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) values[i] = double(raw[i]) / norm;
}

}  // namespace

EmbeddingVector EmbeddingVector::normalized(std::span<const float> raw) {
  EmbeddingVector e;
  normalize_into(raw, e.values_);
  return e;
}

EmbeddingVector EmbeddingVector::normalized(std::span<const double> raw) {
  EmbeddingVector e;
  normalize_into(raw, e.values_);
  return e;
}

double cnn_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw DataError("embedding dimensions differ (" + std::to_string(a.dimension()) + " vs " +
                    std::to_string(b.dimension()) + ")");
  }
  double dot = 0.0;
  const auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) dot += va[i] * vb[i];
  return std::clamp((std::clamp(dot, -1.0, 1.0) + 1.0) / 2.0, 0.0, 1.0);
}

double combined_similarity(double s_sift, double s_cnn, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  if (!(s_sift >= 0.0 && s_sift <= 1.0) || !(s_cnn >= 0.0 && s_cnn <= 1.0)) {
    throw DataError("similarity scores must lie in [0,1]");
  }
  return std::clamp(alpha * s_sift + (1.0 - alpha) * s_cnn, 0.0, 1.0);
}

RetrievalIndex::RetrievalIndex(std::vector<std::string> image_ids, std::vector<BowVector> bows,
                               std::optional<std::vector<EmbeddingVector>> embeddings)
    : ids_(std::move(image_ids)), bows_(std::move(bows)), embeddings_(std::move(embeddings)) {
  if (ids_.size() != bows_.size()) throw DataError("index ids and BoW vectors differ in count");
  if (embeddings_) {
    if (embeddings_->size() != ids_.size()) {
      throw DataError("index ids and embeddings differ in count");
    }
    for (const auto& e : *embeddings_) {
      if (e.dimension() != embeddings_->front().dimension()) {
        throw DataError("embeddings do not share one dimension");
      }
    }
  }
}

std::optional<std::size_t> RetrievalIndex::find(std::string_view id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == id) return i;
  }
  return std::nullopt;
}

double RetrievalIndex::effective_alpha(const RetrievalConfig& cfg) const {
  return embeddings_ ? cfg.alpha : 1.0;
}

double RetrievalIndex::score(std::size_t a, std::size_t b, double alpha) const {
  const double s_bow = bow_similarity(bows_[a], bows_[b]);
  const double s_cnn = embeddings_ ? cnn_similarity((*embeddings_)[a], (*embeddings_)[b]) : 0.0;
  return combined_similarity(s_bow, s_cnn, alpha);
}

std::vector<ScoredImage> retrieve(std::string_view query, const RetrievalIndex& index,
                                  const RetrievalConfig& cfg) {
  cfg.validate();
  const auto q = index.find(query);
  if (!q) throw DataError("unknown query image '" + std::string(query) + "'");
  const double alpha = index.effective_alpha(cfg);
  std::vector<ScoredImage> scored;
  if (cfg.top_k == 0) return scored;
  for (std::size_t i = 0; i < index.image_ids().size(); ++i) {
    if (i == *q) continue;
    const double s = index.score(*q, i, alpha);
    if (s >= cfg.min_score) scored.push_back({index.image_ids()[i], s});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredImage& a, const ScoredImage& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.image_id < b.image_id;
  });
  if (scored.size() > std::size_t(cfg.top_k)) scored.resize(cfg.top_k);
  return scored;
}

std::vector<IdPair> retrieve_pairs(const RetrievalIndex& index, const RetrievalConfig& cfg) {
  std::set<IdPair> pairs;
  for (const std::string& id : index.image_ids()) {
    for (const ScoredImage& hit : retrieve(id, index, cfg)) pairs.insert(canonical_pair(id, hit.image_id));
  }
  return {pairs.begin(), pairs.end()};
}

}  // namespace defectchain
