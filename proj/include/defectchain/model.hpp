#pragma once

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "defectchain/geometry.hpp"

namespace defectchain {

enum class Category { kDefect, kElement, kUtility };

std::string_view to_string(Category c);
Category parse_category(std::string_view s);

// Declared (category, class_label) pairs. Every detection must use a label
// from this table with the matching category.
class ClassTable {
 public:
  ClassTable() = default;
  ClassTable(std::initializer_list<std::pair<const std::string, Category>> init)
      : labels_(init) {}

  void declare(const std::string& label, Category category);
  std::optional<Category> category_of(std::string_view label) const;
  const std::map<std::string, Category, std::less<>>& labels() const {
    return labels_;
  }

  // crack, corrosion, exposed_reinforcement / column / ruler
  static ClassTable defaults();

  friend bool operator==(const ClassTable&, const ClassTable&) = default;

 private:
  std::map<std::string, Category, std::less<>> labels_;
};

struct ImageRecord {
  std::string image_id;
  std::string source_path;
  int width = 0;
  int height = 0;
  std::optional<std::string> acquisition_tag;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Detection {
  std::string detection_id;
  std::string image_id;
  Category category = Category::kDefect;
  std::string class_label;
  Polygon region;
  double confidence = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Checks `d` against its image and the class table and returns it with the
// region clipped to [0,width]x[0,height]. The input ring must be simple.
Detection validate_detection(const Detection& d, const ImageRecord& img,
                             const ClassTable& classes);

struct Keypoint {
  Point2 position;
  int octave = 0;
  double orientation = 0.0;  // radians, [0, 2pi)
  double response = 0.0;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

// 256-bit descriptor. Bit i lives in word i/64 at position i%64.
struct BinaryDescriptor {
  static constexpr int kBits = 256;
  std::array<std::uint64_t, 4> words{};

  bool bit(int i) const { return (words[i >> 6] >> (i & 63)) & 1u; }
  void set_bit(int i, bool v) {
    const std::uint64_t m = std::uint64_t{1} << (i & 63);
    words[i >> 6] = v ? (words[i >> 6] | m) : (words[i >> 6] & ~m);
  }
  BinaryDescriptor complement() const {
    return {{~words[0], ~words[1], ~words[2], ~words[3]}};
  }

  friend bool operator==(const BinaryDescriptor&, const BinaryDescriptor&) = default;
  friend auto operator<=>(const BinaryDescriptor&, const BinaryDescriptor&) = default;
};

inline int hamming(const BinaryDescriptor& a, const BinaryDescriptor& b) {
  return std::popcount(a.words[0] ^ b.words[0]) +
         std::popcount(a.words[1] ^ b.words[1]) +
         std::popcount(a.words[2] ^ b.words[2]) +
         std::popcount(a.words[3] ^ b.words[3]);
}

// Unordered pair of distinct ids stored lexicographically.
struct IdPair {
  std::string first;
  std::string second;

  friend auto operator<=>(const IdPair&, const IdPair&) = default;
  friend bool operator==(const IdPair&, const IdPair&) = default;
};

// Throws ValidationError on a self-pair.
IdPair canonical_pair(std::string_view a, std::string_view b);

struct KeypointMatch {
  std::uint32_t index_a = 0;
  std::uint32_t index_b = 0;
  int distance = 0;

  friend auto operator<=>(const KeypointMatch&, const KeypointMatch&) = default;
};

struct GroundTruth {
  std::set<IdPair> pairwise_matches;
  std::vector<std::vector<std::string>> chains;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// Chains pairwise disjoint; every referenced id is a known detection.
void validate_ground_truth(const GroundTruth& gt,
                           const std::set<std::string, std::less<>>& detection_ids);

}  // namespace defectchain
