#include "defectchain/evaluation.hpp"

#include <algorithm>
#include <unordered_map>

#include "defectchain/error.hpp"

namespace defectchain {

namespace {

Ratio ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return double(num) / double(den);
}

void require_canonical(const std::set<IdPair>& pairs, const char* which) {
  for (const IdPair& p : pairs) {
    if (!(p.first < p.second)) {
      throw ValidationError(std::string(which) + " pair (" + p.first + ", " + p.second +
                            ") is not canonical or is a self-pair");
    }
  }
}

}  // namespace

PairwiseResult pairwise_metrics(const std::set<IdPair>& predicted, const std::set<IdPair>& gt) {
  require_canonical(predicted, "predicted");
  require_canonical(gt, "ground-truth");
  PairwiseResult r;
  for (const IdPair& p : predicted) {
    if (gt.contains(p)) {
      ++r.tp;
    } else {
      ++r.fp;
    }
  }
  r.fn = gt.size() - r.tp;
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.recall = ratio(r.tp, r.tp + r.fn);
  return r;
}

std::set<IdPair> expand_chains_to_pairs(std::span<const std::vector<std::string>> chains) {
  std::set<std::string> seen;
  std::set<IdPair> pairs;
  for (const auto& chain : chains) {
    for (const std::string& id : chain) {
      if (!seen.insert(id).second) throw ValidationError("chains overlap at " + id);
    }
    for (std::size_t i = 0; i < chain.size(); ++i) {
      for (std::size_t j = i + 1; j < chain.size(); ++j) pairs.insert(canonical_pair(chain[i], chain[j]));
    }
  }
  return pairs;
}

ChainResult chain_metrics(std::span<const DefectChain> predicted,
                          std::span<const std::vector<std::string>> gt) {
  std::unordered_map<std::string, std::size_t> gt_of;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (const std::string& id : gt[g]) {
      if (!gt_of.emplace(id, g).second) {
        throw ValidationError("ground-truth chains overlap at " + id);
      }
    }
  }
  {
    std::set<std::string> seen;
    for (const DefectChain& c : predicted) {
      for (const std::string& id : c.members) {
        if (!seen.insert(id).second) throw ValidationError("predicted chains overlap at " + id);
      }
    }
  }

  std::vector<const DefectChain*> order;
  for (const DefectChain& c : predicted) {
    if (c.members.size() >= 2) order.push_back(&c);
  }
  std::sort(order.begin(), order.end(), [](const DefectChain* a, const DefectChain* b) {
    if (a->members.size() != b->members.size()) return a->members.size() > b->members.size();
    return a->chain_id < b->chain_id;
  });

  ChainResult r;
  r.total_gt = gt.size();
  r.evaluated = order.size();
  std::vector<bool> available(gt.size(), true);
  for (const DefectChain* c : order) {
    std::unordered_map<std::size_t, std::size_t> overlap;
    for (const std::string& id : c->members) {
      auto it = gt_of.find(id);
      if (it != gt_of.end() && available[it->second]) ++overlap[it->second];
    }
    std::optional<std::size_t> winner;
    std::size_t winner_overlap = 0;
    for (const auto& [g, common] : overlap) {
      const bool qualifies = common >= 2 && 2 * common >= gt[g].size();
      if (!qualifies) continue;
      if (!winner || common > winner_overlap || (common == winner_overlap && g < *winner)) {
        winner = g;
        winner_overlap = common;
      }
    }
    if (winner) {
      ++r.tp;
      available[*winner] = false;
      r.assignments.push_back({c->chain_id, *winner, winner_overlap});
    } else {
      ++r.fp;
    }
  }
  r.matched_gt = r.tp;
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.recall = ratio(r.matched_gt, r.total_gt);
  return r;
}

}  // namespace defectchain
