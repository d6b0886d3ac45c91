#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "defectchain/defect_match.hpp"
#include "defectchain/model.hpp"

namespace defectchain {

// Precision or recall; nullopt when the denominator is zero.
using Ratio = std::optional<double>;

struct PairwiseResult {
  std::size_t tp = 0, fp = 0, fn = 0;
  Ratio precision;
  Ratio recall;

  friend bool operator==(const PairwiseResult&, const PairwiseResult&) = default;
};

PairwiseResult pairwise_metrics(const std::set<IdPair>& predicted, const std::set<IdPair>& gt);

// Every unordered pair inside each chain. Overlapping chains are a
// ValidationError.
std::set<IdPair> expand_chains_to_pairs(std::span<const std::vector<std::string>> chains);

struct ChainAssignment {
  std::string predicted_chain;
  std::size_t gt_chain = 0;  // index into the ground-truth list
  std::size_t overlap = 0;
};

struct ChainResult {
  std::size_t tp = 0, fp = 0;
  std::size_t matched_gt = 0;
  std::size_t total_gt = 0;
  std::size_t evaluated = 0;  // predicted chains with >= 2 members
  Ratio precision;
  Ratio recall;
  std::vector<ChainAssignment> assignments;

  friend bool operator==(const ChainResult& a, const ChainResult& b) {
    return a.tp == b.tp && a.fp == b.fp && a.matched_gt == b.matched_gt &&
           a.total_gt == b.total_gt && a.evaluated == b.evaluated &&
           a.precision == b.precision && a.recall == b.recall;
  }
};

// Greedy chain evaluation. Predicted chains with fewer than two members are
// skipped. The rest are visited by descending size, then ascending chain
// id. A predicted chain is a true positive when some remaining ground-truth
// chain shares at least two members with it and the shared count is at
// least half that ground-truth chain's size (|common| >= |gt| / 2 as a real
// comparison). The largest qualifying intersection wins, ties to the lower
// ground-truth index, and the winner is removed from the candidates.
ChainResult chain_metrics(std::span<const DefectChain> predicted,
                          std::span<const std::vector<std::string>> gt);

}  // namespace defectchain
