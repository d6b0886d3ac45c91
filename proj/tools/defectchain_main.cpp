#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>

#include "defectchain/dataset_io.hpp"
#include "defectchain/error.hpp"
#include "defectchain/pipeline.hpp"
#include "defectchain/synth.hpp"

namespace fs = std::filesystem;
using namespace defectchain;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kRuntime = 4 };

struct Overrides {
  std::optional<std::string> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  std::optional<int> fast_threshold, target_keypoints, pyramid_levels, patch_radius;
  std::optional<double> scale_factor;
  std::optional<std::uint64_t> pattern_seed;

  std::optional<double> alpha, min_score;
  std::optional<int> top_k, vocab_k, vocab_iterations;

  std::optional<double> ratio, ransac_inlier_px;
  std::optional<bool> cross_check, ransac;
  std::optional<int> max_distance, ransac_iters, ransac_min_matches;

  std::optional<int> tau;
};

void add_config_options(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_file, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Global seed");
  app.add_option("--workers", o.workers, "Worker threads (0 = all cores)");

  app.add_option("--fast-threshold", o.fast_threshold)->group("Features");
  app.add_option("--target-keypoints", o.target_keypoints)->group("Features");
  app.add_option("--pyramid-levels", o.pyramid_levels)->group("Features");
  app.add_option("--scale-factor", o.scale_factor)->group("Features");
  app.add_option("--patch-radius", o.patch_radius)->group("Features");
  app.add_option("--pattern-seed", o.pattern_seed)->group("Features");

  app.add_option("--alpha", o.alpha, "Weight of the BoW score")->group("Retrieval");
  app.add_option("--top-k", o.top_k)->group("Retrieval");
  app.add_option("--min-score", o.min_score)->group("Retrieval");
  app.add_option("--vocab-k", o.vocab_k)->group("Retrieval");
  app.add_option("--vocab-iterations", o.vocab_iterations)->group("Retrieval");

  app.add_option("--ratio", o.ratio)->group("Matching");
  app.add_flag("--cross-check,!--no-cross-check", o.cross_check)->group("Matching");
  app.add_option("--max-distance", o.max_distance)->group("Matching");
  app.add_flag("--ransac,!--no-ransac", o.ransac)->group("Matching");
  app.add_option("--ransac-iters", o.ransac_iters)->group("Matching");
  app.add_option("--ransac-inlier-px", o.ransac_inlier_px)->group("Matching");
  app.add_option("--ransac-min-matches", o.ransac_min_matches)->group("Matching");

  app.add_option("--tau", o.tau, "Valid matches needed for a defect edge")->group("Threshold");
}

template <typename T>
void apply(const std::optional<T>& v, T& out) {
  if (v) out = *v;
}

PipelineConfig resolve_config(const Overrides& o) {
  PipelineConfig c;
  if (o.config_file) {
    std::ifstream f(*o.config_file);
    c = PipelineConfig::from_json(std::string(std::istreambuf_iterator<char>(f), {}));
  }
  apply(o.seed, c.seed);
  apply(o.workers, c.workers);
  apply(o.fast_threshold, c.features.fast_threshold);
  apply(o.target_keypoints, c.features.target_keypoints);
  apply(o.pyramid_levels, c.features.pyramid_levels);
  apply(o.scale_factor, c.features.scale_factor);
  apply(o.patch_radius, c.features.patch_radius);
  apply(o.pattern_seed, c.features.descriptor_pattern_seed);
  apply(o.alpha, c.retrieval.alpha);
  apply(o.top_k, c.retrieval.top_k);
  apply(o.min_score, c.retrieval.min_score);
  apply(o.vocab_k, c.retrieval.vocab_k);
  apply(o.vocab_iterations, c.retrieval.vocab_iterations);
  apply(o.ratio, c.matching.ratio);
  apply(o.cross_check, c.matching.cross_check);
  apply(o.max_distance, c.matching.max_distance);
  apply(o.ransac, c.matching.ransac_enabled);
  apply(o.ransac_iters, c.matching.ransac_iters);
  apply(o.ransac_inlier_px, c.matching.ransac_inlier_px);
  apply(o.ransac_min_matches, c.matching.ransac_min_matches);
  apply(o.tau, c.threshold.tau);
  c.matching.seed = c.seed;
  c.validate();
  return c;
}

struct StageArgs {
  std::string manifest;
  std::string cache;
  std::string out;
};

void write_or_print(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Link defect detections across overlapping inspection images."};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  add_config_options(app, o);

  StageArgs sa;
  auto stage = [&](const char* name, const char* help, bool out_dir) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("manifest", sa.manifest, "manifest.jsonl")->required();
    sub->add_option("--cache", sa.cache, "Stage cache directory (default: <manifest dir>/cache)");
    sub->add_option("--out", sa.out, out_dir ? "Output directory" : "Output file (default: stdout)")
        ->required(out_dir);
    return sub;
  };
  CLI::App* extract = stage("extract", "Extract and cache features", false);
  CLI::App* index = stage("index", "Build the vocabulary and BoW index", false);
  CLI::App* retrieve = stage("retrieve", "List retrieved image pairs", false);
  CLI::App* match = stage("match", "Match features of retrieved pairs", false);
  CLI::App* chains = stage("chains", "Build defect chains and write a report", true);
  CLI::App* eval = stage("eval", "Chains plus evaluation against ground truth", true);
  stage("run", "Full pipeline", true);

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic survey");
  std::string synth_out;
  SynthConfig scfg;
  bool ruler_trap = false;
  bool no_embeddings = false;
  int background = 8;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--crops", scfg.n_crops);
  synth->add_option("--defects", scfg.n_defects);
  synth->add_option("--utilities", scfg.n_utilities);
  synth->add_option("--canvas-width", scfg.canvas_width);
  synth->add_option("--canvas-height", scfg.canvas_height);
  synth->add_option("--crop-width", scfg.crop_width);
  synth->add_option("--crop-height", scfg.crop_height);
  synth->add_option("--noise", scfg.noise_sigma);
  synth->add_option("--rotation-jitter", scfg.rotation_jitter_deg, "Degrees");
  synth->add_flag("--no-embeddings", no_embeddings);
  synth->add_flag("--ruler-trap", ruler_trap, "Two disjoint crops sharing a ruler");
  synth->add_option("--background", background, "Extra crops for --ruler-trap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (synth->parsed()) {
      if (o.seed) scfg.seed = *o.seed;
      if (no_embeddings) scfg.embedding_dim = 0;
      scfg.validate();
      const SynthDataset ds = ruler_trap ? plant_fig2_scenario(scfg, background).dataset : generate(scfg);
      const fs::path manifest = write_synth(ds, synth_out);
      std::cout << manifest.string() << "\n";
      return kOk;
    }

    PipelineConfig cfg = resolve_config(o);
    const Dataset ds = load_dataset(sa.manifest);
    RunOptions opts;
    opts.cache_dir = sa.cache.empty() ? fs::absolute(sa.manifest).parent_path() / "cache" : fs::path(sa.cache);
    Pipeline p(ds, cfg, opts);

    if (extract->parsed()) {
      const auto& f = p.features();
      std::string text = "image_id\tkeypoints\n";
      for (std::size_t i = 0; i < f.size(); ++i) {
        text += ds.images[i].image_id + "\t" + std::to_string(f[i].size()) + "\n";
      }
      write_or_print(sa.out, text);
    } else if (index->parsed()) {
      const Vocabulary& v = p.vocabulary();
      p.index();
      if (!sa.out.empty()) {
        write_vocabulary(sa.out, v);
      } else {
        std::cout << "vocabulary\t" << v.size() << " words\n";
      }
    } else if (retrieve->parsed()) {
      std::string text = "image_a\timage_b\tscore\n";
      for (const RetrievedPair& r : p.retrieval()) {
        text += r.images.first + "\t" + r.images.second + "\t" + fixed(r.score) + "\n";
      }
      write_or_print(sa.out, text);
    } else if (match->parsed()) {
      p.counts();
      std::string text = "image_a\timage_b\tmatches\tverified\tvalid_matches\n";
      for (const RetrievedPair& r : p.retrieval()) {
        text += r.images.first + "\t" + r.images.second + "\t" + std::to_string(r.keypoint_matches) + "\t" +
                (r.verified ? "1" : "0") + "\t" + std::to_string(r.valid_matches) + "\n";
      }
      write_or_print(sa.out, text);
    } else {
      if (eval->parsed() && !ds.ground_truth) throw DataError("eval needs a ground-truth file in the manifest");
      ChainReport report = p.report();
      if (chains->parsed()) report.eval.reset();
      emit_report(report, sa.out);
      std::cout << "chains " << report.chains.size() << ", singletons " << report.singletons.size() << "\n";
      if (report.eval) std::cout << metrics_table(report);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
