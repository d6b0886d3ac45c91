// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "defectchain/pipeline.hpp"
#include "oracles.hpp"

using namespace defectchain;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double or_nan(const Ratio& r) { return r ? *r : std::nan(""); }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("defectchain_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string emitted(const ChainReport& r, const std::string& name) {
  const fs::path dir = scratch(name);
  emit_report(r, dir);
  return slurp(dir / "report.json") + slurp(dir / "chains.tsv") + slurp(dir / "metrics.tsv");
}

DefectChain chain_of(std::vector<std::string> m) {
  std::sort(m.begin(), m.end());
  return {m.front(), m};
}

struct Survey {
  SynthDataset synth;
  Dataset dataset;
  RunOptions options;
};

Survey default_survey() {
  Survey s;
  SynthConfig sc;
  sc.seed = 7;
  s.synth = generate(sc);
  s.dataset = synth_dataset(s.synth);
  s.options.loader = synth_loader(s.synth);
  return s;
}

// Metrics table columns are the only part of the published results table
// that a desk-scale run can mirror.
void table_note(const ChainReport& r) {
  const std::string table = metrics_table(r);
  const bool ok = table.rfind("Image Type\tMetric\tPrecision\tRecall\n", 0) == 0 &&
                  table.find("\tPairwise\t") != std::string::npos && table.find("\tChain\t") != std::string::npos;
  report(ok, "results-table", "published datasets are proprietary; metrics table mirrors its columns on synthetic data");
}

void synthetic_end_to_end(Survey& s, ChainReport& out, Pipeline& p, double seconds) {
  out = p.report();
  const EvalReport& e = *out.eval;
  const double pp = or_nan(e.pairwise.precision), pr = or_nan(e.pairwise.recall), cr = or_nan(e.chain.recall);
  const bool ok = pp >= 0.95 && pr >= 0.80 && cr >= 0.80 && seconds < 120.0;
  report(ok, "synthetic-end-to-end",
         fmt("pairwise P %.3f R %.3f, chain R %.3f (P %.3f), %zu images, %.1f s", pp, pr, cr,
             or_nan(e.chain.precision), s.dataset.images.size(), seconds));
}

void transitivity() {
  std::vector<Detection> dets;
  for (const char* id : {"a", "b", "c"}) {
    dets.push_back({id, std::string("img_") + id, Category::kDefect, "crack", Polygon::rectangle(0, 0, 1, 1), 1.0});
  }
  const CountTable t{{{"a", "b"}, 9}, {{"b", "c"}, 7}, {{"a", "c"}, 0}};
  const DefectMatchGraph g = build_graph(t, MatchThresholdConfig{}, dets);
  std::set<IdPair> edges;
  for (const auto& e : g.edges) edges.insert(e.detections);
  const std::vector<std::vector<std::string>> gt{{"a", "b", "c"}};
  const PairwiseResult pw = pairwise_metrics(edges, expand_chains_to_pairs(gt));
  const ChainResult ch = chain_metrics(build_chains(g), gt);
  const bool ok = pw.recall == 2.0 / 3.0 && ch.recall == 1.0 && *ch.recall > *pw.recall;
  report(ok, "transitivity", fmt("pairwise recall %.17g, chain recall %.17g", or_nan(pw.recall), or_nan(ch.recall)));
}

void split_chain() {
  const std::vector<DefectChain> pred{chain_of({"a", "b"}), chain_of({"c", "d"})};
  const std::vector<std::vector<std::string>> gt{{"a", "b", "c", "d"}};
  const ChainResult r = chain_metrics(pred, gt);
  report(r.precision == 0.5 && r.recall == 1.0, "split-chain",
         fmt("precision %.17g, recall %.17g", or_nan(r.precision), or_nan(r.recall)));
}

void hybrid_endpoints() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool ok = true;
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng), b = u(rng), alpha = u(rng);
    const double s = combined_similarity(a, b, alpha);
    ok &= s >= 0.0 && s <= 1.0;
    ok &= combined_similarity(a, b, 1.0) == a && combined_similarity(a, b, 0.0) == b;
  }
  report(ok, "hybrid-similarity", "exact endpoints and range over 10000 random triples");
}

void oracle_suites(Pipeline& p) {
  std::mt19937_64 rng(99);
  std::vector<std::string> bad;

  {
    std::uniform_real_distribution<double> u(-5, 105);
    int n = 0;
    for (int poly = 0; poly < 100; ++poly) {
      const auto ring = oracle::random_star(rng, 50, 50, 10, 50, 5 + poly % 12);
      const Polygon pg(ring);
      for (int i = 0; i < 100; ++i, ++n) {
        // Every fourth query sits on the integer lattice to hit vertices and edges.
        Point2 q{u(rng), u(rng)};
        if (i % 4 == 0) q = {std::round(q.x), std::round(q.y)};
        if (point_in_region(q, pg) != oracle::ray_cast_inside(q, ring)) {
          bad.push_back("point-in-polygon");
          poly = 100;
          break;
        }
      }
    }
  }
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_descriptor(rng), b = oracle::random_descriptor(rng);
    if (hamming(a, b) != oracle::hamming_bits(a, b)) {
      bad.push_back("hamming");
      break;
    }
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 r(seed);
    std::vector<BinaryDescriptor> a, b;
    for (int i = 0; i < 200; ++i) a.push_back(oracle::random_descriptor(r));
    for (int i = 0; i < 200; ++i) b.push_back(i % 2 ? oracle::random_descriptor(r) : oracle::flip_bits(a[i], 25, r));
    MatchConfig cfg;
    cfg.cross_check = seed % 2 == 0;
    if (match_descriptors(a, b, cfg) != oracle::match_double_loop(a, b, cfg)) {
      bad.push_back("matcher");
      break;
    }
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 r(seed + 500);
    std::uniform_real_distribution<double> u(0, 200);
    std::vector<Keypoint> ka, kb;
    for (int i = 0; i < 300; ++i) {
      ka.push_back(Keypoint{{u(r), u(r)}});
      kb.push_back(Keypoint{{u(r), u(r)}});
    }
    std::uniform_int_distribution<std::uint32_t> idx(0, 299);
    PairMatches pm{{"A", "B"}, {}, true, std::nullopt};
    for (int i = 0; i < 250; ++i) pm.matches.push_back({idx(r), idx(r), 0});
    std::vector<Detection> da, db;
    const char* labels[] = {"crack", "corrosion"};
    for (int i = 0; i < 6; ++i) {
      da.push_back({"a" + std::to_string(i), "A", Category::kDefect, labels[i % 2],
                    Polygon(oracle::random_star(r, u(r), u(r), 10, 50, 9)), 1.0});
      db.push_back({"b" + std::to_string(i), "B", Category::kDefect, labels[(i / 2) % 2],
                    Polygon(oracle::random_star(r, u(r), u(r), 10, 50, 9)), 1.0});
    }
    const auto got = count_valid_matches(pm, ka, kb, da, db).counts;
    const auto want = oracle::count_triple_loop(pm, ka, kb, da, db);
    bool same = got.size() == want.size();
    for (const auto& c : got) same = same && want.count(c.detections) && want.at(c.detections) == c.valid_count;
    if (!same) {
      bad.push_back("valid-match counts");
      break;
    }
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 r(seed + 900);
    DefectMatchGraph g;
    for (int i = 0; i < 500; ++i) g.nodes.push_back(fmt("n%03d", i));
    std::uniform_int_distribution<int> pick(0, 499);
    std::set<IdPair> es;
    while (es.size() < 200 + 10 * seed) {
      const int a = pick(r), b = pick(r);
      if (a != b) es.insert(canonical_pair(g.nodes[a], g.nodes[b]));
    }
    std::vector<std::pair<std::string, std::string>> edge_list;
    for (const auto& e : es) {
      g.edges.push_back({e, 1});
      edge_list.push_back({e.first, e.second});
    }
    std::vector<std::vector<std::string>> got;
    for (const auto& c : build_chains(g)) got.push_back(c.members);
    std::sort(got.begin(), got.end());
    if (got != oracle::bfs_components(g.nodes, edge_list)) {
      bad.push_back("connected components");
      break;
    }
  }
  {
    const Vocabulary& v = p.vocabulary();
    const auto& filt = p.filtered();
    const RetrievalIndex& idx = p.index();
    std::size_t n = 0;
    bool ok = true;
    for (std::size_t i = 0; i < filt.size() && ok; ++i) {
      const auto& ds = filt[i].features.descriptors;
      for (const auto& d : ds) {
        ok &= v.nearest_word(d) == oracle::nearest_centroid(d, v.centroids);
        ++n;
      }
      const auto want = oracle::bow_oracle(ds, v);
      const BowVector& b = idx.bow(i);
      ok &= b.entries.size() == want.size();
      for (const auto& [w, x] : b.entries) ok &= want.count(w) && std::abs(want.at(w) - x) < 1e-12;
    }
    if (!ok) bad.push_back("quantization");
  }

  std::string detail = "point-in-polygon 10000, hamming 1000, matcher 20x200x200, counts 20 scenes, "
                       "components 20x500 nodes, quantization on the default survey";
  if (!bad.empty()) {
    detail = "mismatch in";
    for (const auto& b : bad) detail += " " + b;
  }
  report(bad.empty(), "oracle-equivalence", detail);
}

void ruler_filtering() {
  int lower = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    const Fig2Scenario f = plant_fig2_scenario(sc);
    const Dataset with = synth_dataset(f.dataset);
    Dataset without = with;
    std::erase_if(without.detections, [](const Detection& d) { return d.category == Category::kUtility; });
    RunOptions opt;
    opt.loader = synth_loader(f.dataset);
    opt.cache_dir = scratch("ruler_" + std::to_string(seed));
    const PipelineConfig cfg;
    Pipeline a(with, cfg, opt), b(without, cfg, opt);
    const std::size_t ia = *a.index().find(f.trap_a), ib = *a.index().find(f.trap_b);
    const double alpha = a.index().effective_alpha(cfg.retrieval);
    const double filtered = a.index().score(ia, ib, alpha), unfiltered = b.index().score(ia, ib, alpha);
    lower += filtered < unfiltered;
    detail += fmt("%s%.3f<%.3f", detail.empty() ? "" : " ", filtered, unfiltered);
  }
  report(lower == 10, "ruler-filtering", fmt("%d/10 seeds lower with filtering: ", lower) + detail);
}

void determinism(const Survey& s, const ChainReport& single) {
  PipelineConfig cfg;
  cfg.workers = 4;
  const bool big = emitted(single, "det_a") == emitted(run_pipeline(s.dataset, cfg, s.options), "det_b");

  SynthConfig sc;
  sc.seed = 11;
  sc.n_crops = 12;
  sc.n_defects = 4;
  sc.n_utilities = 1;
  const SynthDataset small = generate(sc);
  RunOptions opt;
  opt.loader = synth_loader(small);
  std::string first;
  bool ok = big;
  for (int workers : {1, 2, 3, 8, 0}) {
    PipelineConfig c;
    c.workers = workers;
    const std::string bytes = emitted(run_pipeline(synth_dataset(small), c, opt), "det_w");
    if (first.empty()) first = bytes;
    ok &= bytes == first;
  }
  report(ok, "determinism", "byte-identical reports for workers 1 and 4 on the default survey and 1,2,3,8,all on a second");
}

}  // namespace

int main() {
  try {
    Survey s = default_survey();
    Pipeline p(s.dataset, PipelineConfig{}, s.options);
    const auto t0 = std::chrono::steady_clock::now();
    ChainReport e2e = p.report();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    table_note(e2e);
    synthetic_end_to_end(s, e2e, p, seconds);
    transitivity();
    split_chain();
    hybrid_endpoints();
    oracle_suites(p);
    ruler_filtering();
    determinism(s, e2e);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
