#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "defectchain/matching.hpp"
#include "defectchain/model.hpp"

namespace defectchain {

struct MatchThresholdConfig {
  int tau = 5;  // an edge needs valid_count >= tau

  void validate() const;

  friend bool operator==(const MatchThresholdConfig&, const MatchThresholdConfig&) = default;
};

struct DefectPairCount {
  IdPair detections;
  int valid_count = 0;

  friend bool operator==(const DefectPairCount&, const DefectPairCount&) = default;
};

struct ValidMatchCounts {
  std::vector<DefectPairCount> counts;  // sorted by detection pair
  // Keypoint matches that incremented more than one detection pair because
  // same-class defect regions overlap.
  std::size_t multi_pair_matches = 0;
};

// A keypoint match is valid for a detection pair when its endpoint in the
// first image lies in one defect region, its endpoint in the second image
// lies in another, and both share a class label. Every such cross pair is
// incremented, so overlapping regions can share a keypoint match. dets_a
// and dets_b belong to pm.images.first and pm.images.second.
ValidMatchCounts count_valid_matches(const PairMatches& pm, std::span<const Keypoint> kps_a,
                                     std::span<const Keypoint> kps_b,
                                     std::span<const Detection> dets_a,
                                     std::span<const Detection> dets_b);

struct ImagePairCounts {
  IdPair images;
  std::vector<DefectPairCount> counts;
};

using CountTable = std::map<IdPair, int>;

// Sums counts by detection pair. Submitting the same image pair twice is a
// DataError.
CountTable accumulate_counts(std::span<const ImagePairCounts> per_pair);

struct DefectMatchGraph {
  std::vector<std::string> nodes;  // all defect detection ids, sorted
  std::vector<DefectPairCount> edges;  // sorted, valid_count >= tau

  friend bool operator==(const DefectMatchGraph&, const DefectMatchGraph&) = default;
};

DefectMatchGraph build_graph(const CountTable& table, const MatchThresholdConfig& cfg,
                             std::span<const Detection> detections);

struct DefectChain {
  std::string chain_id;  // lowest member id
  std::vector<std::string> members;  // sorted

  friend bool operator==(const DefectChain&, const DefectChain&) = default;
};

// Connected components, sorted by chain id. Isolated nodes become singleton
// chains.
std::vector<DefectChain> build_chains(const DefectMatchGraph& g);

}  // namespace defectchain
