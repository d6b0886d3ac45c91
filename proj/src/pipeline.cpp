#include "defectchain/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <set>
#include <thread>

#include <json.hpp>

#include "defectchain/error.hpp"
#include "defectchain/rng.hpp"

namespace defectchain {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

namespace {

void check_keys(const json& obj, const char* section, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(section) + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(std::string(section) + ": unknown key '" + key + "'");
    }
  }
}

[[noreturn]] void bad_type(const char* section, const char* key, const char* want) {
  throw ConfigError(std::string(section) + "." + key + ": expected " + want);
}

void read_int(const json& obj, const char* section, const char* key, int& out) {
  if (!obj.contains(key)) return;
  const json& v = obj[key];
  if (!v.is_number_integer()) bad_type(section, key, "an integer");
  const auto x = v.get<std::int64_t>();
  if (x < INT32_MIN || x > INT32_MAX) bad_type(section, key, "a 32-bit integer");
  out = int(x);
}

void read_u64(const json& obj, const char* section, const char* key, std::uint64_t& out) {
  if (!obj.contains(key)) return;
  const json& v = obj[key];
  if (!v.is_number_unsigned()) bad_type(section, key, "a non-negative integer");
  out = v.get<std::uint64_t>();
}

void read_double(const json& obj, const char* section, const char* key, double& out) {
  if (!obj.contains(key)) return;
  const json& v = obj[key];
  if (!v.is_number()) bad_type(section, key, "a number");
  out = v.get<double>();
}

void read_bool(const json& obj, const char* section, const char* key, bool& out) {
  if (!obj.contains(key)) return;
  const json& v = obj[key];
  if (!v.is_boolean()) bad_type(section, key, "a boolean");
  out = v.get<bool>();
}

const char* kind_name(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::kOrb256:
      return "orb256";
  }
  return "?";
}

json config_json(const PipelineConfig& c) {
  const FeatureConfig& f = c.features;
  const RetrievalConfig& r = c.retrieval;
  const MatchConfig& m = c.matching;
  return {
      {"features",
       {{"kind", kind_name(f.kind)},
        {"fast_threshold", f.fast_threshold},
        {"target_keypoints", f.target_keypoints},
        {"pyramid_levels", f.pyramid_levels},
        {"scale_factor", f.scale_factor},
        {"patch_radius", f.patch_radius},
        {"descriptor_pattern_seed", f.descriptor_pattern_seed}}},
      {"retrieval",
       {{"alpha", r.alpha},
        {"top_k", r.top_k},
        {"min_score", r.min_score},
        {"vocab_k", r.vocab_k},
        {"vocab_iterations", r.vocab_iterations}}},
      {"matching",
       {{"ratio", m.ratio},
        {"cross_check", m.cross_check},
        {"max_distance", m.max_distance},
        {"ransac_enabled", m.ransac_enabled},
        {"ransac_iters", m.ransac_iters},
        {"ransac_inlier_px", m.ransac_inlier_px},
        {"ransac_min_matches", m.ransac_min_matches}}},
      {"threshold", {{"tau", c.threshold.tau}}},
      {"seed", c.seed},
  };
}

PipelineConfig config_from(const json& j) {
  PipelineConfig c;
  check_keys(j, "config", {"features", "retrieval", "matching", "threshold", "seed", "workers"});
  if (j.contains("features")) {
    const json& f = j["features"];
    check_keys(f, "features",
               {"kind", "fast_threshold", "target_keypoints", "pyramid_levels", "scale_factor",
                "patch_radius", "descriptor_pattern_seed"});
    if (f.contains("kind")) {
      if (!f["kind"].is_string() || f["kind"] != "orb256") bad_type("features", "kind", "\"orb256\"");
    }
    read_int(f, "features", "fast_threshold", c.features.fast_threshold);
    read_int(f, "features", "target_keypoints", c.features.target_keypoints);
    read_int(f, "features", "pyramid_levels", c.features.pyramid_levels);
    read_double(f, "features", "scale_factor", c.features.scale_factor);
    read_int(f, "features", "patch_radius", c.features.patch_radius);
    read_u64(f, "features", "descriptor_pattern_seed", c.features.descriptor_pattern_seed);
  }
  if (j.contains("retrieval")) {
    const json& r = j["retrieval"];
    check_keys(r, "retrieval", {"alpha", "top_k", "min_score", "vocab_k", "vocab_iterations"});
    read_double(r, "retrieval", "alpha", c.retrieval.alpha);
    read_int(r, "retrieval", "top_k", c.retrieval.top_k);
    read_double(r, "retrieval", "min_score", c.retrieval.min_score);
    read_int(r, "retrieval", "vocab_k", c.retrieval.vocab_k);
    read_int(r, "retrieval", "vocab_iterations", c.retrieval.vocab_iterations);
  }
  if (j.contains("matching")) {
    const json& m = j["matching"];
    check_keys(m, "matching",
               {"ratio", "cross_check", "max_distance", "ransac_enabled", "ransac_iters",
                "ransac_inlier_px", "ransac_min_matches"});
    read_double(m, "matching", "ratio", c.matching.ratio);
    read_bool(m, "matching", "cross_check", c.matching.cross_check);
    read_int(m, "matching", "max_distance", c.matching.max_distance);
    read_bool(m, "matching", "ransac_enabled", c.matching.ransac_enabled);
    read_int(m, "matching", "ransac_iters", c.matching.ransac_iters);
    read_double(m, "matching", "ransac_inlier_px", c.matching.ransac_inlier_px);
    read_int(m, "matching", "ransac_min_matches", c.matching.ransac_min_matches);
  }
  if (j.contains("threshold")) {
    check_keys(j["threshold"], "threshold", {"tau"});
    read_int(j["threshold"], "threshold", "tau", c.threshold.tau);
  }
  read_u64(j, "config", "seed", c.seed);
  read_int(j, "config", "workers", c.workers);
  c.matching.seed = c.seed;
  return c;
}

}  // namespace

void PipelineConfig::validate() const {
  features.validate();
  retrieval.validate();
  matching.validate();
  threshold.validate();
  if (workers < 0) throw ConfigError("workers must be >= 0");
}

std::string PipelineConfig::to_json() const { return config_json(*this).dump(); }

PipelineConfig PipelineConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return config_from(j);
}

// ---------------------------------------------------------------------------
// Threads

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 0) workers = int(std::max(1u, std::thread::hardware_concurrency()));
  const std::size_t threads = std::min<std::size_t>(std::size_t(workers), n);
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

template <typename F>
decltype(auto) in_stage(const char* stage, F&& f) {
  const std::string prefix = std::string(stage) + ": ";
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::uint64_t hash_bytes(std::span<const std::uint8_t> bytes, std::uint64_t h) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), h);
}

std::uint64_t hash_image(const GrayImage& img) {
  const std::uint64_t h = mix_seed(std::uint64_t(img.width()) << 32 | std::uint32_t(img.height()));
  return hash_bytes(img.pixels(), h);
}

std::uint64_t hash_descriptors(std::span<const BinaryDescriptor> ds, std::uint64_t h) {
  for (const BinaryDescriptor& d : ds) {
    h = hash_bytes({reinterpret_cast<const std::uint8_t*>(d.words.data()), sizeof d.words}, h);
  }
  return mix_seed(h ^ ds.size());
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string safe_name(std::string_view id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out + "-" + hex(fnv1a64(id)).substr(0, 8);
}

}  // namespace

struct Pipeline::State {
  Dataset ds;
  PipelineConfig cfg;
  RunOptions opt;
  std::vector<std::vector<Detection>> dets;  // per image
  std::vector<std::string> warnings;

  std::optional<std::vector<FeatureSet>> features;
  std::optional<std::vector<FilteredFeatures>> filtered;
  std::optional<Vocabulary> vocabulary;
  std::optional<RetrievalIndex> index;
  std::optional<std::vector<RetrievedPair>> retrieval;
  std::optional<std::vector<PairMatches>> matches;
  std::size_t multi_pair_matches = 0;
  std::optional<CountTable> counts;
  std::optional<DefectMatchGraph> graph;
  std::optional<std::vector<DefectChain>> chains;

  State(const Dataset& d, PipelineConfig c, RunOptions o) : ds(d), cfg(std::move(c)), opt(std::move(o)) {}
};

Pipeline::Pipeline(const Dataset& dataset, PipelineConfig cfg, RunOptions options) {
  cfg.validate();
  cfg.matching.seed = cfg.seed;
  if (!options.loader) {
    options.loader = [](const ImageRecord& r) { return read_pnm(r.source_path); };
  }
  s_ = std::make_unique<State>(dataset, std::move(cfg), std::move(options));
  std::map<std::string, std::size_t, std::less<>> pos;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) pos.emplace(dataset.images[i].image_id, i);
  s_->dets.resize(dataset.images.size());
  for (const Detection& d : dataset.detections) {
    auto it = pos.find(d.image_id);
    if (it == pos.end()) throw DataError("detection " + d.detection_id + " references unknown image " + d.image_id);
    s_->dets[it->second].push_back(d);
  }
  if (s_->opt.cache_dir) fs::create_directories(*s_->opt.cache_dir / "features");
}

Pipeline::~Pipeline() = default;

const std::vector<FeatureSet>& Pipeline::features() {
  if (s_->features) return *s_->features;
  in_stage("extract", [&] {
    const auto& images = s_->ds.images;
    const std::uint64_t cfg_key = fnv1a64(config_json(s_->cfg)["features"].dump());
    std::vector<FeatureSet> out(images.size());
    parallel_for(images.size(), s_->cfg.workers, [&](std::size_t i) {
      const ImageRecord& rec = images[i];
      GrayImage img;
      try {
        img = s_->opt.loader(rec);
      } catch (const DataError& e) {
        throw DataError("image " + rec.image_id + ": " + e.what());
      }
      if (img.width() != rec.width || img.height() != rec.height) {
        throw DataError("image " + rec.image_id + " is " + std::to_string(img.width()) + "x" +
                        std::to_string(img.height()) + ", manifest says " + std::to_string(rec.width) +
                        "x" + std::to_string(rec.height));
      }
      const std::uint64_t key = mix_seed(hash_image(img) ^ cfg_key);
      std::optional<fs::path> file;
      if (s_->opt.cache_dir) {
        file = *s_->opt.cache_dir / "features" / (safe_name(rec.image_id) + ".feat");
        if (auto cached = read_feature_cache(*file, key)) {
          out[i] = std::move(*cached);
          return;
        }
      }
      out[i] = extract_features(img, s_->cfg.features);
      if (file) write_feature_cache(*file, key, out[i]);
    });
    s_->features = std::move(out);
  });
  return *s_->features;
}

const std::vector<FilteredFeatures>& Pipeline::filtered() {
  if (s_->filtered) return *s_->filtered;
  const auto& feats = features();
  in_stage("filter", [&] {
    std::vector<FilteredFeatures> out(feats.size());
    parallel_for(feats.size(), s_->cfg.workers,
                 [&](std::size_t i) { out[i] = filter_utility_keypoints(feats[i], s_->dets[i]); });
    s_->filtered = std::move(out);
  });
  return *s_->filtered;
}

const Vocabulary& Pipeline::vocabulary() {
  if (s_->vocabulary) return *s_->vocabulary;
  const auto& filt = filtered();
  in_stage("vocabulary", [&] {
    const RetrievalConfig& rc = s_->cfg.retrieval;
    if (filt.size() < 2) {
      s_->warnings.push_back("fewer than two images: retrieval skipped");
      s_->vocabulary = Vocabulary{};
      return;
    }
    std::vector<std::vector<BinaryDescriptor>> per_image;
    std::set<BinaryDescriptor> distinct;
    for (const auto& f : filt) {
      per_image.push_back(f.features.descriptors);
      distinct.insert(f.features.descriptors.begin(), f.features.descriptors.end());
    }
    int k = rc.vocab_k;
    if (distinct.size() < std::size_t(k)) {
      k = int(distinct.size());
      s_->warnings.push_back("vocabulary reduced to " + std::to_string(k) + " words (distinct descriptors)");
    }
    if (k == 0) {
      s_->vocabulary = Vocabulary{};
      return;
    }
    const std::uint64_t seed = derive_seed(s_->cfg.seed, "vocabulary");
    std::optional<fs::path> file;
    if (s_->opt.cache_dir) {
      std::uint64_t key = mix_seed(seed ^ (std::uint64_t(k) << 20) ^ std::uint64_t(rc.vocab_iterations));
      for (const auto& d : per_image) key = hash_descriptors(d, key);
      file = *s_->opt.cache_dir / ("vocabulary-" + hex(key) + ".bin");
      std::error_code ec;
      if (fs::exists(*file, ec)) {
        try {
          Vocabulary v = read_vocabulary(*file);
          if (v.train_seed == seed && v.size() == std::size_t(k)) {
            s_->vocabulary = std::move(v);
            return;
          }
        } catch (const DataError&) {
        }
      }
    }
    s_->vocabulary = build_vocabulary(per_image, k, seed, rc.vocab_iterations);
    if (file) write_vocabulary(*file, *s_->vocabulary);
  });
  return *s_->vocabulary;
}

const RetrievalIndex& Pipeline::index() {
  if (s_->index) return *s_->index;
  const auto& filt = filtered();
  const Vocabulary& vocab = vocabulary();
  in_stage("quantize", [&] {
    std::vector<BowVector> bows(filt.size());
    parallel_for(filt.size(), s_->cfg.workers, [&](std::size_t i) {
      const auto& d = filt[i].features.descriptors;
      if (vocab.size() == 0) {
        bows[i].empty_image = d.empty();
      } else {
        bows[i] = quantize(d, vocab);
      }
    });
    std::vector<std::string> ids;
    for (const auto& r : s_->ds.images) ids.push_back(r.image_id);
    auto emb = s_->ds.normalized_embeddings();
    if (!emb) s_->warnings.push_back("no embeddings: alpha forced to 1");
    s_->index.emplace(std::move(ids), std::move(bows), std::move(emb));
  });
  return *s_->index;
}

const std::vector<RetrievedPair>& Pipeline::retrieval() {
  if (s_->retrieval) return *s_->retrieval;
  const RetrievalIndex& idx = index();
  in_stage("retrieve", [&] {
    std::vector<RetrievedPair> out;
    if (idx.image_ids().size() >= 2) {
      const double alpha = idx.effective_alpha(s_->cfg.retrieval);
      for (const IdPair& p : retrieve_pairs(idx, s_->cfg.retrieval)) {
        out.push_back({p, idx.score(*idx.find(p.first), *idx.find(p.second), alpha)});
      }
    }
    s_->retrieval = std::move(out);
  });
  return *s_->retrieval;
}

const std::vector<PairMatches>& Pipeline::matches() {
  if (s_->matches) return *s_->matches;
  const auto& filt = filtered();
  retrieval();
  const RetrievalIndex& idx = index();
  in_stage("match", [&] {
    auto& pairs = *s_->retrieval;
    std::vector<PairMatches> out(pairs.size());
    parallel_for(pairs.size(), s_->cfg.workers, [&](std::size_t i) {
      const std::size_t a = *idx.find(pairs[i].images.first);
      const std::size_t b = *idx.find(pairs[i].images.second);
      out[i] = match_pair(pairs[i].images.first, filt[a].features, pairs[i].images.second,
                          filt[b].features, s_->cfg.matching);
      pairs[i].keypoint_matches = out[i].matches.size();
      pairs[i].verified = out[i].verified;
    });
    s_->matches = std::move(out);
  });
  return *s_->matches;
}

const CountTable& Pipeline::counts() {
  if (s_->counts) return *s_->counts;
  const auto& pms = matches();
  const auto& filt = filtered();
  const RetrievalIndex& idx = index();
  in_stage("count", [&] {
    auto& pairs = *s_->retrieval;
    std::vector<ImagePairCounts> per_pair(pms.size());
    std::vector<std::size_t> multi(pms.size());
    parallel_for(pms.size(), s_->cfg.workers, [&](std::size_t i) {
      const std::size_t a = *idx.find(pms[i].images.first);
      const std::size_t b = *idx.find(pms[i].images.second);
      ValidMatchCounts c = count_valid_matches(pms[i], filt[a].features.keypoints,
                                               filt[b].features.keypoints, s_->dets[a], s_->dets[b]);
      std::size_t total = 0;
      for (const auto& dc : c.counts) total += std::size_t(dc.valid_count);
      pairs[i].valid_matches = total;
      multi[i] = c.multi_pair_matches;
      per_pair[i] = {pms[i].images, std::move(c.counts)};
    });
    s_->multi_pair_matches = 0;
    for (std::size_t m : multi) s_->multi_pair_matches += m;
    s_->counts = accumulate_counts(per_pair);
  });
  return *s_->counts;
}

const DefectMatchGraph& Pipeline::graph() {
  if (s_->graph) return *s_->graph;
  const CountTable& table = counts();
  in_stage("graph", [&] { s_->graph = build_graph(table, s_->cfg.threshold, s_->ds.detections); });
  return *s_->graph;
}

const std::vector<DefectChain>& Pipeline::chains() {
  if (s_->chains) return *s_->chains;
  const DefectMatchGraph& g = graph();
  in_stage("chains", [&] { s_->chains = build_chains(g); });
  return *s_->chains;
}

ChainReport Pipeline::report() {
  const auto& chain_list = chains();
  const DefectMatchGraph& g = graph();
  const auto& feats = features();
  const auto& filt = filtered();
  return in_stage("report", [&] {
    const Dataset& ds = s_->ds;
    ChainReport r;
    r.config = s_->cfg;
    r.dataset_id = ds.dataset_id;
    r.effective_alpha = index().effective_alpha(s_->cfg.retrieval);
    r.embeddings_used = index().has_embeddings();
    r.retrieval = *s_->retrieval;
    r.warnings = s_->warnings;

    std::map<std::string, const Detection*, std::less<>> by_id;
    for (const Detection& d : ds.detections) by_id.emplace(d.detection_id, &d);
    auto member = [&](const std::string& id) {
      const Detection& d = *by_id.at(id);
      return ChainMember{d.image_id, d.detection_id, d.class_label};
    };
    std::map<std::string, std::size_t> chain_of;
    for (const DefectChain& c : chain_list) {
      if (c.members.size() < 2) {
        r.singletons.push_back(member(c.members.front()));
        continue;
      }
      ChainRecord rec{c.chain_id, {}, {}};
      for (const auto& m : c.members) {
        rec.members.push_back(member(m));
        chain_of[m] = r.chains.size();
      }
      r.chains.push_back(std::move(rec));
    }
    for (const DefectPairCount& e : g.edges) {
      r.chains[chain_of.at(e.detections.first)].edges.push_back({e.detections, e.valid_count});
    }
    std::sort(r.singletons.begin(), r.singletons.end(),
              [](const ChainMember& a, const ChainMember& b) { return a.detection_id < b.detection_id; });

    ReportStats& st = r.stats;
    st.images = ds.images.size();
    st.detections = ds.detections.size();
    st.defect_detections = g.nodes.size();
    for (const auto& f : feats) st.keypoints += f.size();
    for (const auto& f : filt) st.keypoints_after_filter += f.size();
    st.vocabulary_size = s_->vocabulary->size();
    st.retrieved_pairs = r.retrieval.size();
    for (const RetrievedPair& p : r.retrieval) {
      st.verified_pairs += p.verified ? 1 : 0;
      st.keypoint_matches += p.keypoint_matches;
      st.valid_matches += p.valid_matches;
    }
    st.multi_pair_matches = s_->multi_pair_matches;
    st.edges = g.edges.size();
    st.chains = r.chains.size();
    st.singletons = r.singletons.size();

    if (ds.ground_truth) {
      EvalReport ev;
      std::set<std::string> tags;
      bool untagged = false;
      for (const auto& img : ds.images) {
        if (img.acquisition_tag) {
          tags.insert(*img.acquisition_tag);
        } else {
          untagged = true;
        }
      }
      ev.image_type = tags.size() == 1 && !untagged ? *tags.begin() : "All";
      std::set<IdPair> predicted;
      for (const DefectPairCount& e : g.edges) predicted.insert(e.detections);
      ev.pairwise = pairwise_metrics(predicted, ds.ground_truth->pairwise_matches);
      ev.chain = chain_metrics(chain_list, ds.ground_truth->chains);
      r.eval = std::move(ev);
    }
    return r;
  });
}

ChainReport run_pipeline(const Dataset& dataset, const PipelineConfig& cfg, const RunOptions& options) {
  return Pipeline(dataset, cfg, options).report();
}

// ---------------------------------------------------------------------------
// Report serialization

namespace {

json ratio_json(const Ratio& r) { return r ? json(*r) : json(nullptr); }

Ratio ratio_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json pair_json(const IdPair& p) { return json::array({p.first, p.second}); }

IdPair pair_from(const json& j) { return {j.at(0).get<std::string>(), j.at(1).get<std::string>()}; }

json member_json(const ChainMember& m) {
  return {{"image_id", m.image_id}, {"detection_id", m.detection_id}, {"class_label", m.class_label}};
}

ChainMember member_from(const json& j) {
  return {j.at("image_id").get<std::string>(), j.at("detection_id").get<std::string>(),
          j.at("class_label").get<std::string>()};
}

}  // namespace

std::string ChainReport::to_json() const {
  json j;
  j["config"] = config_json(config);
  j["dataset_id"] = dataset_id;
  j["effective_alpha"] = effective_alpha;
  j["embeddings_used"] = embeddings_used;
  j["retrieval"] = json::array();
  for (const RetrievedPair& p : retrieval) {
    j["retrieval"].push_back({{"images", pair_json(p.images)},
                              {"score", p.score},
                              {"keypoint_matches", p.keypoint_matches},
                              {"verified", p.verified},
                              {"valid_matches", p.valid_matches}});
  }
  j["chains"] = json::array();
  for (const ChainRecord& c : chains) {
    json members = json::array();
    for (const auto& m : c.members) members.push_back(member_json(m));
    json edges = json::array();
    for (const auto& e : c.edges) edges.push_back({{"detections", pair_json(e.detections)}, {"valid_count", e.valid_count}});
    j["chains"].push_back({{"chain_id", c.chain_id}, {"members", members}, {"edges", edges}});
  }
  j["singletons"] = json::array();
  for (const auto& m : singletons) j["singletons"].push_back(member_json(m));
  j["stats"] = {{"images", stats.images},
                {"detections", stats.detections},
                {"defect_detections", stats.defect_detections},
                {"keypoints", stats.keypoints},
                {"keypoints_after_filter", stats.keypoints_after_filter},
                {"vocabulary_size", stats.vocabulary_size},
                {"retrieved_pairs", stats.retrieved_pairs},
                {"verified_pairs", stats.verified_pairs},
                {"keypoint_matches", stats.keypoint_matches},
                {"valid_matches", stats.valid_matches},
                {"multi_pair_matches", stats.multi_pair_matches},
                {"edges", stats.edges},
                {"chains", stats.chains},
                {"singletons", stats.singletons}};
  j["warnings"] = warnings;
  if (eval) {
    const PairwiseResult& p = eval->pairwise;
    const ChainResult& c = eval->chain;
    json assignments = json::array();
    for (const auto& a : c.assignments) {
      assignments.push_back({{"predicted_chain", a.predicted_chain}, {"gt_chain", a.gt_chain}, {"overlap", a.overlap}});
    }
    j["eval"] = {{"image_type", eval->image_type},
                 {"pairwise",
                  {{"tp", p.tp},
                   {"fp", p.fp},
                   {"fn", p.fn},
                   {"precision", ratio_json(p.precision)},
                   {"recall", ratio_json(p.recall)}}},
                 {"chain",
                  {{"tp", c.tp},
                   {"fp", c.fp},
                   {"matched_gt", c.matched_gt},
                   {"total_gt", c.total_gt},
                   {"evaluated", c.evaluated},
                   {"precision", ratio_json(c.precision)},
                   {"recall", ratio_json(c.recall)},
                   {"assignments", assignments}}}};
  } else {
    j["eval"] = nullptr;
  }
  return j.dump(2) + "\n";
}

ChainReport ChainReport::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ChainReport r;
    r.config = config_from(j.at("config"));
    r.dataset_id = j.at("dataset_id").get<std::string>();
    r.effective_alpha = j.at("effective_alpha").get<double>();
    r.embeddings_used = j.at("embeddings_used").get<bool>();
    for (const json& p : j.at("retrieval")) {
      r.retrieval.push_back({pair_from(p.at("images")), p.at("score").get<double>(),
                             p.at("keypoint_matches").get<std::size_t>(), p.at("verified").get<bool>(),
                             p.at("valid_matches").get<std::size_t>()});
    }
    for (const json& c : j.at("chains")) {
      ChainRecord rec;
      rec.chain_id = c.at("chain_id").get<std::string>();
      for (const json& m : c.at("members")) rec.members.push_back(member_from(m));
      for (const json& e : c.at("edges")) rec.edges.push_back({pair_from(e.at("detections")), e.at("valid_count").get<int>()});
      r.chains.push_back(std::move(rec));
    }
    for (const json& m : j.at("singletons")) r.singletons.push_back(member_from(m));
    const json& s = j.at("stats");
    ReportStats& st = r.stats;
    st.images = s.at("images").get<std::size_t>();
    st.detections = s.at("detections").get<std::size_t>();
    st.defect_detections = s.at("defect_detections").get<std::size_t>();
    st.keypoints = s.at("keypoints").get<std::size_t>();
    st.keypoints_after_filter = s.at("keypoints_after_filter").get<std::size_t>();
    st.vocabulary_size = s.at("vocabulary_size").get<std::size_t>();
    st.retrieved_pairs = s.at("retrieved_pairs").get<std::size_t>();
    st.verified_pairs = s.at("verified_pairs").get<std::size_t>();
    st.keypoint_matches = s.at("keypoint_matches").get<std::size_t>();
    st.valid_matches = s.at("valid_matches").get<std::size_t>();
    st.multi_pair_matches = s.at("multi_pair_matches").get<std::size_t>();
    st.edges = s.at("edges").get<std::size_t>();
    st.chains = s.at("chains").get<std::size_t>();
    st.singletons = s.at("singletons").get<std::size_t>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (!j.at("eval").is_null()) {
      const json& e = j["eval"];
      EvalReport ev;
      ev.image_type = e.at("image_type").get<std::string>();
      const json& p = e.at("pairwise");
      ev.pairwise = {p.at("tp").get<std::size_t>(), p.at("fp").get<std::size_t>(), p.at("fn").get<std::size_t>(),
                     ratio_from(p.at("precision")), ratio_from(p.at("recall"))};
      const json& c = e.at("chain");
      ev.chain.tp = c.at("tp").get<std::size_t>();
      ev.chain.fp = c.at("fp").get<std::size_t>();
      ev.chain.matched_gt = c.at("matched_gt").get<std::size_t>();
      ev.chain.total_gt = c.at("total_gt").get<std::size_t>();
      ev.chain.evaluated = c.at("evaluated").get<std::size_t>();
      ev.chain.precision = ratio_from(c.at("precision"));
      ev.chain.recall = ratio_from(c.at("recall"));
      for (const json& a : c.at("assignments")) {
        ev.chain.assignments.push_back({a.at("predicted_chain").get<std::string>(), a.at("gt_chain").get<std::size_t>(),
                                        a.at("overlap").get<std::size_t>()});
      }
      r.eval = std::move(ev);
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

namespace {

std::string percent(const Ratio& r) {
  if (!r) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *r * 100.0);
  return buf;
}

std::string join(const std::set<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

}  // namespace

std::string metrics_table(const ChainReport& report) {
  std::string out = "Image Type\tMetric\tPrecision\tRecall\n";
  if (report.eval) {
    const EvalReport& e = *report.eval;
    out += e.image_type + "\tPairwise\t" + percent(e.pairwise.precision) + "\t" + percent(e.pairwise.recall) + "\n";
    out += e.image_type + "\tChain\t" + percent(e.chain.precision) + "\t" + percent(e.chain.recall) + "\n";
  }
  return out;
}

std::string chains_table(const ChainReport& report) {
  std::string out = "chain_id\tsize\tclass_labels\timages\tdetections\tedges\n";
  for (const ChainRecord& c : report.chains) {
    std::set<std::string> labels, images, dets;
    for (const auto& m : c.members) {
      labels.insert(m.class_label);
      images.insert(m.image_id);
      dets.insert(m.detection_id);
    }
    out += c.chain_id + "\t" + std::to_string(c.members.size()) + "\t" + join(labels) + "\t" + join(images) +
           "\t" + join(dets) + "\t" + std::to_string(c.edges.size()) + "\n";
  }
  return out;
}

void emit_report(const ChainReport& report, const fs::path& dir) {
  try {
    fs::create_directories(dir);
    write_file_atomic(dir / "report.json", report.to_json());
    write_file_atomic(dir / "chains.tsv", chains_table(report));
    write_file_atomic(dir / "metrics.tsv", metrics_table(report));
  } catch (const fs::filesystem_error& e) {
    throw Error(std::string("cannot write report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic surveys

Dataset synth_dataset(const SynthDataset& synth) {
  Dataset ds;
  ds.dataset_id = synth.dataset_id;
  ds.images = synth.images;
  ds.classes = synth.classes;
  ds.detections = synth.detections;
  ds.embeddings = synth.embeddings;
  ds.ground_truth = synth.ground_truth;
  return ds;
}

ImageLoader synth_loader(const SynthDataset& synth) {
  return [&synth](const ImageRecord& rec) {
    for (std::size_t i = 0; i < synth.images.size(); ++i) {
      if (synth.images[i].image_id == rec.image_id) return synth.pixels[i];
    }
    throw DataError("no pixels for image " + rec.image_id);
  };
}

fs::path write_synth(const SynthDataset& synth, const fs::path& dir) {
  Dataset ds = synth_dataset(synth);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const fs::path p = fs::absolute(dir / ds.images[i].source_path).lexically_normal();
    fs::create_directories(p.parent_path());
    write_pgm(p, synth.pixels[i]);
    ds.images[i].source_path = p.string();
  }
  return save_dataset(ds, dir);
}

}  // namespace defectchain
