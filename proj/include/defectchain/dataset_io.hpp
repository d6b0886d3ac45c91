#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "defectchain/features.hpp"
#include "defectchain/model.hpp"
#include "defectchain/retrieval.hpp"

namespace defectchain {

// File formats
// ------------
// manifest.jsonl     line 1: {"schema":"defectchain.manifest","version":1,
//                             "dataset_id":..., "detections":<path>,
//                             "embeddings":<path>?, "ground_truth":<path>?}
//                    then one image per line: {"image_id","path","width",
//                             "height","acquisition_tag"?}
// detections.jsonl   line 1: {"schema":"defectchain.detections","version":1,
//                             "classes":{<label>:<category>,...}}
//                    then one detection per line: {"detection_id",
//                             "image_id","category","class_label",
//                             "region":[[x,y],...],"confidence"}
// ground_truth.jsonl line 1: {"schema":"defectchain.ground_truth","version":1}
//                    then {"pair":[a,b]} or {"chain":[ids...]} per line.
// embeddings.bin     "DCEMBED1", u32 dimension, u32 count, then per image:
//                    u16 id length, id bytes, dimension x f32. All
//                    integers and floats little-endian.
// Relative paths resolve against the manifest's directory.

inline constexpr int kFormatVersion = 1;

struct Dataset {
  std::string dataset_id;
  std::vector<ImageRecord> images;  // source_path absolute
  ClassTable classes;
  std::vector<Detection> detections;  // validated and clipped
  // Raw vectors as stored, aligned with `images`.
  std::optional<std::vector<std::vector<float>>> embeddings;
  std::optional<GroundTruth> ground_truth;

  const ImageRecord* image(std::string_view id) const;
  std::vector<Detection> detections_of(std::string_view image_id) const;
  std::optional<std::vector<EmbeddingVector>> normalized_embeddings() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Throws DataError naming the file and line of the offending record.
Dataset load_dataset(const std::filesystem::path& manifest);

// Writes manifest.jsonl, detections.jsonl and, when present,
// ground_truth.jsonl and embeddings.bin into `dir`. Image paths are written
// relative to `dir`. Pixels are not copied.
std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir);

struct EmbeddingFile {
  std::uint32_t dimension = 0;
  std::vector<std::pair<std::string, std::vector<float>>> rows;

  friend bool operator==(const EmbeddingFile&, const EmbeddingFile&) = default;
};

EmbeddingFile read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingFile& file);

GroundTruth read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);

// Binary vocabulary: "DCVOCAB1", u64 train seed, u32 k, k x 4 u64 words,
// k x f64 idf.
void write_vocabulary(const std::filesystem::path& path, const Vocabulary& v);
Vocabulary read_vocabulary(const std::filesystem::path& path);

// Feature cache: "DCFEAT01", u64 key, u32 count, then per keypoint f64 x,
// f64 y, i32 octave, f64 orientation, f64 response, 4 x u64 descriptor.
void write_feature_cache(const std::filesystem::path& path, std::uint64_t key,
                         const FeatureSet& fs);
// nullopt when the file is missing, unreadable or carries another key.
std::optional<FeatureSet> read_feature_cache(const std::filesystem::path& path,
                                             std::uint64_t key);

// Writes to a sibling temporary and renames, so readers never observe a
// partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace defectchain
