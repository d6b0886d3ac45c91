#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "defectchain/dataset_io.hpp"
#include "defectchain/defect_match.hpp"
#include "defectchain/evaluation.hpp"
#include "defectchain/features.hpp"
#include "defectchain/image.hpp"
#include "defectchain/matching.hpp"
#include "defectchain/retrieval.hpp"
#include "defectchain/synth.hpp"

namespace defectchain {

struct PipelineConfig {
  FeatureConfig features;
  RetrievalConfig retrieval;
  MatchConfig matching;  // matching.seed is replaced by the global seed
  MatchThresholdConfig threshold;
  std::uint64_t seed = 0;
  int workers = 1;  // 0 means one per hardware thread

  // Throws ConfigError.
  void validate() const;

  // Echo form: every field except `workers` and `matching.seed`, which do
  // not influence results. Keys sorted.
  std::string to_json() const;
  // Accepts the echo form plus an optional "workers" key. Unknown keys and
  // wrongly typed values are ConfigErrors. Missing keys keep defaults.
  static PipelineConfig from_json(std::string_view text);

  friend bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
    return a.to_json() == b.to_json();
  }
};

// Runs fn(0..n-1) on up to `workers` threads. If any call throws, the
// exception from the lowest index is rethrown after all calls finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

struct ChainMember {
  std::string image_id;
  std::string detection_id;
  std::string class_label;

  friend bool operator==(const ChainMember&, const ChainMember&) = default;
};

struct ChainEdge {
  IdPair detections;
  int valid_count = 0;

  friend bool operator==(const ChainEdge&, const ChainEdge&) = default;
};

struct ChainRecord {
  std::string chain_id;
  std::vector<ChainMember> members;  // sorted by detection id
  std::vector<ChainEdge> edges;

  friend bool operator==(const ChainRecord&, const ChainRecord&) = default;
};

struct RetrievedPair {
  IdPair images;
  double score = 0.0;
  std::size_t keypoint_matches = 0;
  bool verified = false;
  std::size_t valid_matches = 0;

  friend bool operator==(const RetrievedPair&, const RetrievedPair&) = default;
};

struct ReportStats {
  std::size_t images = 0;
  std::size_t detections = 0;
  std::size_t defect_detections = 0;
  std::size_t keypoints = 0;
  std::size_t keypoints_after_filter = 0;
  std::size_t vocabulary_size = 0;
  std::size_t retrieved_pairs = 0;
  std::size_t verified_pairs = 0;
  std::size_t keypoint_matches = 0;
  std::size_t valid_matches = 0;
  std::size_t multi_pair_matches = 0;
  std::size_t edges = 0;
  std::size_t chains = 0;
  std::size_t singletons = 0;

  friend bool operator==(const ReportStats&, const ReportStats&) = default;
};

struct EvalReport {
  std::string image_type;  // shared acquisition tag, or "All"
  PairwiseResult pairwise;  // on graph edges
  ChainResult chain;

  friend bool operator==(const EvalReport& a, const EvalReport& b) {
    return a.image_type == b.image_type && a.pairwise == b.pairwise && a.chain == b.chain;
  }
};

struct ChainReport {
  PipelineConfig config;
  std::string dataset_id;
  double effective_alpha = 1.0;
  bool embeddings_used = false;
  std::vector<RetrievedPair> retrieval;
  std::vector<ChainRecord> chains;  // two or more members, by chain id
  std::vector<ChainMember> singletons;  // by detection id
  ReportStats stats;
  std::vector<std::string> warnings;
  std::optional<EvalReport> eval;

  std::string to_json() const;
  static ChainReport from_json(std::string_view text);

  friend bool operator==(const ChainReport&, const ChainReport&) = default;
};

using ImageLoader = std::function<GrayImage(const ImageRecord&)>;

struct RunOptions {
  // Feature and vocabulary caches live here when set.
  std::optional<std::filesystem::path> cache_dir;
  // Defaults to read_pnm(record.source_path).
  ImageLoader loader;
};

// Lazy stage runner. Each accessor computes its stage and everything before
// it once. Failures are rethrown as the same error family with the stage
// name prefixed; anything else becomes a StageError.
class Pipeline {
 public:
  Pipeline(const Dataset& dataset, PipelineConfig cfg, RunOptions options = {});
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  const std::vector<FeatureSet>& features();
  const std::vector<FilteredFeatures>& filtered();
  const Vocabulary& vocabulary();
  const RetrievalIndex& index();
  const std::vector<RetrievedPair>& retrieval();
  const std::vector<PairMatches>& matches();  // aligned with retrieval()
  const CountTable& counts();
  const DefectMatchGraph& graph();
  const std::vector<DefectChain>& chains();
  ChainReport report();

 private:
  struct State;
  std::unique_ptr<State> s_;
};

ChainReport run_pipeline(const Dataset& dataset, const PipelineConfig& cfg,
                         const RunOptions& options = {});

// report.json (structured), chains.tsv (one row per chain) and metrics.tsv
// (Image Type, Metric, Precision, Recall as percentages). Throws Error when
// the directory cannot be written.
void emit_report(const ChainReport& report, const std::filesystem::path& dir);

// metrics.tsv contents.
std::string metrics_table(const ChainReport& report);
std::string chains_table(const ChainReport& report);

// In-memory view of a generated survey. The loader serves its pixels and
// must not outlive `synth`.
Dataset synth_dataset(const SynthDataset& synth);
ImageLoader synth_loader(const SynthDataset& synth);

// Converts a generated survey to a Dataset whose images live under `dir`,
// writing the PGMs and the dataset files. Returns the manifest path.
std::filesystem::path write_synth(const SynthDataset& synth, const std::filesystem::path& dir);

}  // namespace defectchain
