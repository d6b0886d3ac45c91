#include "defectchain/defect_match.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "defectchain/error.hpp"
#include "defectchain/union_find.hpp"

namespace defectchain {

void MatchThresholdConfig::validate() const {
  if (tau < 1) throw ConfigError("tau must be >= 1");
}

namespace {

std::vector<const Detection*> defects_of(std::span<const Detection> dets) {
  std::vector<const Detection*> out;
  for (const Detection& d : dets) {
    if (d.category == Category::kDefect) out.push_back(&d);
  }
  return out;
}

}  // namespace

ValidMatchCounts count_valid_matches(const PairMatches& pm, std::span<const Keypoint> kps_a,
                                     std::span<const Keypoint> kps_b,
                                     std::span<const Detection> dets_a,
                                     std::span<const Detection> dets_b) {
  ValidMatchCounts out;
  const auto defects_a = defects_of(dets_a);
  const auto defects_b = defects_of(dets_b);
  if (defects_a.empty() || defects_b.empty()) return out;

  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  std::vector<std::size_t> hit_a, hit_b;
  for (const KeypointMatch& m : pm.matches) {
    const Point2 pa = kps_a[m.index_a].position;
    const Point2 pb = kps_b[m.index_b].position;
    hit_a.clear();
    hit_b.clear();
    for (std::size_t i = 0; i < defects_a.size(); ++i) {
      if (point_in_region(pa, defects_a[i]->region)) hit_a.push_back(i);
    }
    if (hit_a.empty()) continue;
    for (std::size_t j = 0; j < defects_b.size(); ++j) {
      if (point_in_region(pb, defects_b[j]->region)) hit_b.push_back(j);
    }
    int increments = 0;
    for (std::size_t i : hit_a) {
      for (std::size_t j : hit_b) {
        if (defects_a[i]->class_label != defects_b[j]->class_label) continue;
        ++counts[{i, j}];
        ++increments;
      }
    }
    if (increments > 1) ++out.multi_pair_matches;
  }

  for (const auto& [key, n] : counts) {
    out.counts.push_back({canonical_pair(defects_a[key.first]->detection_id,
                                         defects_b[key.second]->detection_id),
                          n});
  }
  std::sort(out.counts.begin(), out.counts.end(),
            [](const DefectPairCount& x, const DefectPairCount& y) { return x.detections < y.detections; });
  return out;
}

CountTable accumulate_counts(std::span<const ImagePairCounts> per_pair) {
  std::set<IdPair> seen;
  CountTable table;
  for (const ImagePairCounts& p : per_pair) {
    if (!seen.insert(p.images).second) {
      throw DataError("image pair (" + p.images.first + ", " + p.images.second +
                      ") submitted twice");
    }
    for (const DefectPairCount& c : p.counts) table[c.detections] += c.valid_count;
  }
  return table;
}

DefectMatchGraph build_graph(const CountTable& table, const MatchThresholdConfig& cfg,
                             std::span<const Detection> detections) {
  cfg.validate();
  DefectMatchGraph g;
  for (const Detection& d : detections) {
    if (d.category == Category::kDefect) g.nodes.push_back(d.detection_id);
  }
  std::sort(g.nodes.begin(), g.nodes.end());
  if (std::adjacent_find(g.nodes.begin(), g.nodes.end()) != g.nodes.end()) {
    throw DataError("duplicate defect detection id");
  }
  auto known = [&](const std::string& id) {
    return std::binary_search(g.nodes.begin(), g.nodes.end(), id);
  };
  for (const auto& [pair, count] : table) {
    if (count < cfg.tau) continue;
    if (!known(pair.first) || !known(pair.second)) {
      throw DataError("count table references a detection that is not a defect node");
    }
    g.edges.push_back({pair, count});
  }
  return g;
}

std::vector<DefectChain> build_chains(const DefectMatchGraph& g) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) index.emplace(g.nodes[i], i);
  UnionFind uf(g.nodes.size());
  for (const DefectPairCount& e : g.edges) {
    uf.unite(index.at(e.detections.first), index.at(e.detections.second));
  }
  // Nodes are sorted, so the first member seen for a root is the lowest id.
  std::unordered_map<std::size_t, std::size_t> chain_of_root;
  std::vector<DefectChain> chains;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const std::size_t root = uf.find(i);
    auto [it, fresh] = chain_of_root.emplace(root, chains.size());
    if (fresh) chains.push_back({g.nodes[i], {}});
    chains[it->second].members.push_back(g.nodes[i]);
  }
  return chains;
}

}  // namespace defectchain
