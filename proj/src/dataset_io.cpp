#include "defectchain/dataset_io.hpp"

#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "defectchain/error.hpp"

namespace defectchain {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::ByteReader;
using detail::ByteWriter;

namespace {

constexpr std::string_view kEmbeddingMagic = "DCEMBED1";
constexpr std::string_view kVocabularyMagic = "DCVOCAB1";
constexpr std::string_view kFeatureMagic = "DCFEAT01";

std::string read_all(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// One parsed JSON line with its location for error messages.
struct Record {
  json value;
  std::string where;
};

std::vector<Record> read_jsonl(const fs::path& path, std::string_view schema) {
  std::istringstream in(read_all(path));
  std::vector<Record> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    try {
      out.push_back({json::parse(line), where});
    } catch (const json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError(path.string() + ": empty file");
  const json& header = out.front().value;
  if (!header.is_object() || header.value("schema", "") != schema) {
    throw DataError(out.front().where + ": expected schema '" + std::string(schema) + "'");
  }
  if (header.value("version", 0) != kFormatVersion) {
    throw DataError(out.front().where + ": unsupported version");
  }
  return out;
}

template <typename T>
T field(const Record& r, const char* key) {
  try {
    return r.value.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(r.where + ": missing or invalid field '" + key + "'");
  }
}

std::string jsonl(const json& header, const std::vector<json>& rows) {
  std::string out = header.dump() + "\n";
  for (const json& r : rows) out += r.dump() + "\n";
  return out;
}

std::string path_relative_to(const std::string& path, const fs::path& dir) {
  const fs::path rel = fs::path(path).lexically_relative(fs::absolute(dir).lexically_normal());
  if (rel.empty() || *rel.begin() == "..") return path;
  return rel.generic_string();
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp.string());
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

const ImageRecord* Dataset::image(std::string_view id) const {
  for (const ImageRecord& r : images) {
    if (r.image_id == id) return &r;
  }
  return nullptr;
}

std::vector<Detection> Dataset::detections_of(std::string_view image_id) const {
  std::vector<Detection> out;
  for (const Detection& d : detections) {
    if (d.image_id == image_id) out.push_back(d);
  }
  return out;
}

std::optional<std::vector<EmbeddingVector>> Dataset::normalized_embeddings() const {
  if (!embeddings) return std::nullopt;
  std::vector<EmbeddingVector> out;
  for (const auto& raw : *embeddings) out.push_back(EmbeddingVector::normalized(std::span<const float>(raw)));
  return out;
}

EmbeddingFile read_embeddings(const fs::path& path) {
  const std::string data = read_all(path);
  ByteReader in(data, path.filename().string());
  if (in.raw(kEmbeddingMagic.size()) != kEmbeddingMagic) {
    throw DataError(path.filename().string() + ": bad magic");
  }
  EmbeddingFile f;
  f.dimension = in.u32();
  const std::uint32_t count = in.u32();
  if (f.dimension == 0) throw DataError(path.filename().string() + ": zero dimension");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = in.u16();
    std::string id(in.raw(len));
    std::vector<float> v(f.dimension);
    for (float& x : v) x = in.f32();
    f.rows.emplace_back(std::move(id), std::move(v));
  }
  if (!in.done()) throw DataError(path.filename().string() + ": trailing bytes");
  return f;
}

void write_embeddings(const fs::path& path, const EmbeddingFile& file) {
  ByteWriter out;
  out.raw(kEmbeddingMagic);
  out.u32(file.dimension);
  out.u32(std::uint32_t(file.rows.size()));
  for (const auto& [id, v] : file.rows) {
    if (v.size() != file.dimension) throw DataError("embedding row " + id + " has the wrong dimension");
    out.u16(std::uint16_t(id.size()));
    out.raw(id);
    for (float x : v) out.f32(x);
  }
  write_file_atomic(path, out.bytes());
}

GroundTruth read_ground_truth(const fs::path& path) {
  GroundTruth gt;
  const auto records = read_jsonl(path, "defectchain.ground_truth");
  for (std::size_t i = 1; i < records.size(); ++i) {
    const Record& r = records[i];
    if (r.value.contains("pair")) {
      const auto ids = field<std::vector<std::string>>(r, "pair");
      if (ids.size() != 2) throw DataError(r.where + ": a pair needs exactly two ids");
      try {
        gt.pairwise_matches.insert(canonical_pair(ids[0], ids[1]));
      } catch (const ValidationError& e) {
        throw DataError(r.where + ": " + e.what());
      }
    } else if (r.value.contains("chain")) {
      gt.chains.push_back(field<std::vector<std::string>>(r, "chain"));
    } else {
      throw DataError(r.where + ": expected 'pair' or 'chain'");
    }
  }
  return gt;
}

void write_ground_truth(const fs::path& path, const GroundTruth& gt) {
  std::vector<json> rows;
  for (const IdPair& p : gt.pairwise_matches) rows.push_back({{"pair", {p.first, p.second}}});
  for (const auto& c : gt.chains) rows.push_back({{"chain", c}});
  write_file_atomic(path, jsonl({{"schema", "defectchain.ground_truth"}, {"version", kFormatVersion}}, rows));
}

Dataset load_dataset(const fs::path& manifest) {
  const fs::path root = fs::absolute(manifest).parent_path().lexically_normal();
  auto resolve = [&](const std::string& p) { return (root / p).lexically_normal(); };

  const auto m = read_jsonl(manifest, "defectchain.manifest");
  Dataset ds;
  ds.dataset_id = field<std::string>(m[0], "dataset_id");
  std::set<std::string> ids;
  for (std::size_t i = 1; i < m.size(); ++i) {
    const Record& r = m[i];
    ImageRecord img;
    img.image_id = field<std::string>(r, "image_id");
    img.source_path = resolve(field<std::string>(r, "path")).string();
    img.width = field<int>(r, "width");
    img.height = field<int>(r, "height");
    if (r.value.contains("acquisition_tag") && !r.value["acquisition_tag"].is_null()) {
      img.acquisition_tag = field<std::string>(r, "acquisition_tag");
    }
    if (img.width < 1 || img.height < 1) throw DataError(r.where + ": width and height must be >= 1");
    if (!ids.insert(img.image_id).second) throw DataError(r.where + ": duplicate image_id " + img.image_id);
    ds.images.push_back(std::move(img));
  }

  const fs::path det_path = resolve(field<std::string>(m[0], "detections"));
  const auto d = read_jsonl(det_path, "defectchain.detections");
  if (d[0].value.contains("classes")) {
    for (const auto& [label, cat] : d[0].value["classes"].items()) {
      try {
        ds.classes.declare(label, parse_category(cat.get<std::string>()));
      } catch (const std::exception& e) {
        throw DataError(d[0].where + ": " + e.what());
      }
    }
  }
  std::set<std::string> det_ids;
  for (std::size_t i = 1; i < d.size(); ++i) {
    const Record& r = d[i];
    try {
      std::vector<Point2> ring;
      for (const auto& v : field<json>(r, "region")) ring.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      Detection det{field<std::string>(r, "detection_id"), field<std::string>(r, "image_id"),
                    parse_category(field<std::string>(r, "category")), field<std::string>(r, "class_label"),
                    Polygon(std::move(ring)), r.value.value("confidence", 1.0)};
      const ImageRecord* img = ds.image(det.image_id);
      if (!img) throw DataError("unknown image_id '" + det.image_id + "'");
      if (!det_ids.insert(det.detection_id).second) {
        throw DataError("duplicate detection_id '" + det.detection_id + "'");
      }
      ds.detections.push_back(validate_detection(det, *img, ds.classes));
    } catch (const DataError& e) {
      throw DataError(r.where + ": " + e.what());
    } catch (const json::exception& e) {
      throw DataError(r.where + ": " + e.what());
    }
  }

  if (m[0].value.contains("embeddings") && !m[0].value["embeddings"].is_null()) {
    const EmbeddingFile ef = read_embeddings(resolve(field<std::string>(m[0], "embeddings")));
    std::map<std::string, const std::vector<float>*> by_id;
    for (const auto& [id, v] : ef.rows) {
      if (!ids.contains(id)) throw DataError("embeddings: unknown image_id '" + id + "'");
      if (!by_id.emplace(id, &v).second) throw DataError("embeddings: duplicate row for '" + id + "'");
    }
    ds.embeddings.emplace();
    for (const ImageRecord& img : ds.images) {
      auto it = by_id.find(img.image_id);
      if (it == by_id.end()) throw DataError("embeddings: no vector for image '" + img.image_id + "'");
      try {
        EmbeddingVector::normalized(std::span<const float>(*it->second));
      } catch (const DataError& e) {
        throw DataError("embeddings: image '" + img.image_id + "': " + e.what());
      }
      ds.embeddings->push_back(*it->second);
    }
  }

  if (m[0].value.contains("ground_truth") && !m[0].value["ground_truth"].is_null()) {
    GroundTruth gt = read_ground_truth(resolve(field<std::string>(m[0], "ground_truth")));
    std::set<std::string, std::less<>> known(det_ids.begin(), det_ids.end());
    validate_ground_truth(gt, known);
    ds.ground_truth = std::move(gt);
  }
  return ds;
}

fs::path save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  json header = {{"schema", "defectchain.manifest"},
                 {"version", kFormatVersion},
                 {"dataset_id", ds.dataset_id},
                 {"detections", "detections.jsonl"}};
  if (ds.embeddings) header["embeddings"] = "embeddings.bin";
  if (ds.ground_truth) header["ground_truth"] = "ground_truth.jsonl";

  std::vector<json> images;
  for (const ImageRecord& img : ds.images) {
    json j = {{"image_id", img.image_id},
              {"path", path_relative_to(img.source_path, dir)},
              {"width", img.width},
              {"height", img.height}};
    if (img.acquisition_tag) j["acquisition_tag"] = *img.acquisition_tag;
    images.push_back(std::move(j));
  }
  const fs::path manifest = dir / "manifest.jsonl";

  json classes = json::object();
  for (const auto& [label, cat] : ds.classes.labels()) classes[label] = to_string(cat);
  std::vector<json> dets;
  for (const Detection& d : ds.detections) {
    json ring = json::array();
    for (const Point2& p : d.region.vertices()) ring.push_back({p.x, p.y});
    dets.push_back({{"detection_id", d.detection_id},
                    {"image_id", d.image_id},
                    {"category", to_string(d.category)},
                    {"class_label", d.class_label},
                    {"region", ring},
                    {"confidence", d.confidence}});
  }
  write_file_atomic(dir / "detections.jsonl",
                    jsonl({{"schema", "defectchain.detections"}, {"version", kFormatVersion}, {"classes", classes}},
                          dets));

  if (ds.embeddings) {
    EmbeddingFile ef;
    ef.dimension = ds.embeddings->empty() ? 1 : std::uint32_t(ds.embeddings->front().size());
    for (std::size_t i = 0; i < ds.images.size(); ++i) ef.rows.emplace_back(ds.images[i].image_id, (*ds.embeddings)[i]);
    write_embeddings(dir / "embeddings.bin", ef);
  }
  if (ds.ground_truth) write_ground_truth(dir / "ground_truth.jsonl", *ds.ground_truth);
  write_file_atomic(manifest, jsonl(header, images));
  return manifest;
}

void write_vocabulary(const fs::path& path, const Vocabulary& v) {
  ByteWriter out;
  out.raw(kVocabularyMagic);
  out.u64(v.train_seed);
  out.u32(std::uint32_t(v.size()));
  for (const BinaryDescriptor& c : v.centroids) {
    for (std::uint64_t w : c.words) out.u64(w);
  }
  for (double x : v.idf) out.f64(x);
  write_file_atomic(path, out.bytes());
}

Vocabulary read_vocabulary(const fs::path& path) {
  const std::string data = read_all(path);
  ByteReader in(data, path.filename().string());
  if (in.raw(kVocabularyMagic.size()) != kVocabularyMagic) throw DataError(path.string() + ": bad magic");
  Vocabulary v;
  v.train_seed = in.u64();
  const std::uint32_t k = in.u32();
  v.centroids.resize(k);
  for (BinaryDescriptor& c : v.centroids) {
    for (std::uint64_t& w : c.words) w = in.u64();
  }
  v.idf.resize(k);
  for (double& x : v.idf) x = in.f64();
  if (!in.done()) throw DataError(path.string() + ": trailing bytes");
  return v;
}

void write_feature_cache(const fs::path& path, std::uint64_t key, const FeatureSet& f) {
  ByteWriter out;
  out.raw(kFeatureMagic);
  out.u64(key);
  out.u32(std::uint32_t(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Keypoint& k = f.keypoints[i];
    out.f64(k.position.x);
    out.f64(k.position.y);
    out.i32(k.octave);
    out.f64(k.orientation);
    out.f64(k.response);
    for (std::uint64_t w : f.descriptors[i].words) out.u64(w);
  }
  write_file_atomic(path, out.bytes());
}

std::optional<FeatureSet> read_feature_cache(const fs::path& path, std::uint64_t key) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  try {
    const std::string data = read_all(path);
    ByteReader in(data, path.filename().string());
    if (in.raw(kFeatureMagic.size()) != kFeatureMagic) return std::nullopt;
    if (in.u64() != key) return std::nullopt;
    const std::uint32_t n = in.u32();
    FeatureSet f;
    f.keypoints.resize(n);
    f.descriptors.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      Keypoint& k = f.keypoints[i];
      k.position.x = in.f64();
      k.position.y = in.f64();
      k.octave = in.i32();
      k.orientation = in.f64();
      k.response = in.f64();
      for (std::uint64_t& w : f.descriptors[i].words) w = in.u64();
    }
    if (!in.done()) return std::nullopt;
    return f;
  } catch (const DataError&) {
    return std::nullopt;
  }
}

}  // namespace defectchain
