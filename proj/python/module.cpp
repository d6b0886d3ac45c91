#include <pybind11/numpy.h>
#include <cstring>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "defectchain/dataset_io.hpp"
#include "defectchain/error.hpp"
#include "defectchain/pipeline.hpp"

namespace py = pybind11;
using namespace defectchain;

namespace {

GrayImage to_image(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D uint8 array");
  const auto h = int(a.shape(0)), w = int(a.shape(1));
  return GrayImage(w, h, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

py::array_t<std::uint8_t> to_array(const GrayImage& img) {
  py::array_t<std::uint8_t> out({img.height(), img.width()});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

py::bytes descriptor_bytes(const BinaryDescriptor& d) {
  return py::bytes(reinterpret_cast<const char*>(d.words.data()), sizeof d.words);
}

BinaryDescriptor descriptor_from(const py::bytes& b) {
  const std::string s = b;
  if (s.size() != sizeof(BinaryDescriptor::words)) throw py::value_error("descriptor must be 32 bytes");
  BinaryDescriptor d;
  std::memcpy(d.words.data(), s.data(), s.size());
  return d;
}

// Pairs arrive in any order from Python.
std::set<IdPair> pair_set(const std::vector<std::pair<std::string, std::string>>& v) {
  std::set<IdPair> out;
  for (const auto& [a, b] : v) out.insert(canonical_pair(a, b));
  return out;
}

py::dict ratio_dict(std::size_t tp, std::size_t fp, const Ratio& p, const Ratio& r) {
  py::dict d;
  d["tp"] = tp;
  d["fp"] = fp;
  d["precision"] = p ? py::cast(*p) : py::none();
  d["recall"] = r ? py::cast(*r) : py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(_defectchain, m) {
  m.doc() = "Defect chaining across overlapping inspection images.";

  auto& base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());

  m.def("combined_similarity", &combined_similarity, py::arg("bow"), py::arg("cnn"), py::arg("alpha"));
  m.def(
      "hamming", [](const py::bytes& a, const py::bytes& b) { return hamming(descriptor_from(a), descriptor_from(b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "extract_features",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& img, const std::string& config) {
        PipelineConfig cfg = config.empty() ? PipelineConfig{} : PipelineConfig::from_json(config);
        const FeatureSet f = extract_features(to_image(img), cfg.features);
        py::array_t<double> kps({py::ssize_t(f.size()), py::ssize_t(5)});
        auto k = kps.mutable_unchecked<2>();
        py::list desc;
        for (std::size_t i = 0; i < f.size(); ++i) {
          const Keypoint& p = f.keypoints[i];
          k(i, 0) = p.position.x;
          k(i, 1) = p.position.y;
          k(i, 2) = p.octave;
          k(i, 3) = p.orientation;
          k(i, 4) = p.response;
          desc.append(descriptor_bytes(f.descriptors[i]));
        }
        return py::make_tuple(kps, desc);
      },
      py::arg("image"), py::arg("config") = "",
      "Returns (N x 5 array of x, y, octave, orientation, response; list of 32-byte descriptors).");

  m.def(
      "match_descriptors",
      [](const std::vector<py::bytes>& a, const std::vector<py::bytes>& b, double ratio, bool cross_check,
         int max_distance) {
        std::vector<BinaryDescriptor> da, db;
        for (const auto& x : a) da.push_back(descriptor_from(x));
        for (const auto& x : b) db.push_back(descriptor_from(x));
        MatchConfig cfg;
        cfg.ratio = ratio;
        cfg.cross_check = cross_check;
        cfg.max_distance = max_distance;
        cfg.validate();
        std::vector<std::tuple<std::uint32_t, std::uint32_t, int>> out;
        for (const auto& mt : match_descriptors(da, db, cfg)) out.emplace_back(mt.index_a, mt.index_b, mt.distance);
        return out;
      },
      py::arg("a"), py::arg("b"), py::arg("ratio") = MatchConfig{}.ratio,
      py::arg("cross_check") = MatchConfig{}.cross_check, py::arg("max_distance") = MatchConfig{}.max_distance);

  m.def(
      "build_chains",
      [](const std::vector<std::string>& nodes, const std::vector<std::pair<std::string, std::string>>& edges) {
        DefectMatchGraph g;
        g.nodes = nodes;
        std::sort(g.nodes.begin(), g.nodes.end());
        for (const auto& p : pair_set(edges)) g.edges.push_back({p, 1});
        std::vector<std::vector<std::string>> out;
        for (const auto& c : build_chains(g)) out.push_back(c.members);
        return out;
      },
      py::arg("nodes"), py::arg("edges"));

  m.def(
      "pairwise_metrics",
      [](const std::vector<std::pair<std::string, std::string>>& predicted,
         const std::vector<std::pair<std::string, std::string>>& gt) {
        const PairwiseResult r = pairwise_metrics(pair_set(predicted), pair_set(gt));
        py::dict d = ratio_dict(r.tp, r.fp, r.precision, r.recall);
        d["fn"] = r.fn;
        return d;
      },
      py::arg("predicted"), py::arg("ground_truth"));

  m.def(
      "chain_metrics",
      [](const std::vector<std::vector<std::string>>& predicted, const std::vector<std::vector<std::string>>& gt) {
        std::vector<DefectChain> pred;
        for (auto members : predicted) {
          if (members.empty()) continue;
          std::sort(members.begin(), members.end());
          pred.push_back({members.front(), members});
        }
        const ChainResult r = chain_metrics(pred, gt);
        py::dict d = ratio_dict(r.tp, r.fp, r.precision, r.recall);
        d["matched_gt"] = r.matched_gt;
        return d;
      },
      py::arg("predicted"), py::arg("ground_truth"));

  m.def("default_config", [] { return PipelineConfig{}.to_json(); });

  m.def(
      "synth",
      [](const std::filesystem::path& out, std::uint64_t seed, int crops, int defects, int utilities,
         bool embeddings) {
        SynthConfig c;
        c.seed = seed;
        c.n_crops = crops;
        c.n_defects = defects;
        c.n_utilities = utilities;
        if (!embeddings) c.embedding_dim = 0;
        return write_synth(generate(c), out);
      },
      py::arg("out"), py::arg("seed") = 7, py::arg("crops") = 30, py::arg("defects") = 10, py::arg("utilities") = 2,
      py::arg("embeddings") = true, "Writes a synthetic survey and returns its manifest path.");

  m.def(
      "run",
      [](const std::filesystem::path& manifest, const std::string& config,
         const std::optional<std::filesystem::path>& cache_dir, const std::optional<std::filesystem::path>& out) {
        const PipelineConfig cfg = config.empty() ? PipelineConfig{} : PipelineConfig::from_json(config);
        cfg.validate();
        const Dataset ds = load_dataset(manifest);
        RunOptions opt;
        opt.cache_dir = cache_dir;
        ChainReport r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(ds, cfg, opt);
        }
        if (out) emit_report(r, *out);
        return r.to_json();
      },
      py::arg("manifest"), py::arg("config") = "", py::arg("cache_dir") = py::none(), py::arg("out") = py::none(),
      "Runs the full pipeline and returns the report as JSON text.");

  m.def(
      "read_pgm", [](const std::filesystem::path& p) { return to_array(read_pnm(p)); }, py::arg("path"));
}
