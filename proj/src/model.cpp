#include "defectchain/model.hpp"

#include <cmath>

#include "defectchain/error.hpp"

namespace defectchain {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kDefect: return "defect";
    case Category::kElement: return "element";
    case Category::kUtility: return "utility";
  }
  return "defect";
}

Category parse_category(std::string_view s) {
  if (s == "defect") return Category::kDefect;
  if (s == "element") return Category::kElement;
  if (s == "utility") return Category::kUtility;
  throw DataError("unknown category '" + std::string(s) + "'");
}

void ClassTable::declare(const std::string& label, Category category) {
  auto [it, inserted] = labels_.emplace(label, category);
  if (!inserted && it->second != category) {
    throw DataError("class '" + label + "' declared under two categories");
  }
}

std::optional<Category> ClassTable::category_of(std::string_view label) const {
  auto it = labels_.find(label);
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

ClassTable ClassTable::defaults() {
  return {{"crack", Category::kDefect},
          {"corrosion", Category::kDefect},
          {"exposed_reinforcement", Category::kDefect},
          {"column", Category::kElement},
          {"ruler", Category::kUtility}};
}

Detection validate_detection(const Detection& d, const ImageRecord& img,
                             const ClassTable& classes) {
  if (d.image_id != img.image_id) {
    throw ValidationError("detection " + d.detection_id + " belongs to image " +
                          d.image_id + ", not " + img.image_id);
  }
  const auto cat = classes.category_of(d.class_label);
  if (!cat) {
    throw ValidationError("detection " + d.detection_id + ": unknown class_label '" +
                          d.class_label + "'");
  }
  if (*cat != d.category) {
    throw ValidationError("detection " + d.detection_id + ": class '" + d.class_label +
                          "' is declared as " + std::string(to_string(*cat)));
  }
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw ValidationError("detection " + d.detection_id + ": confidence outside [0,1]");
  }
  if (!is_simple(d.region.vertices())) {
    throw ValidationError("detection " + d.detection_id + ": region is not simple");
  }

  const BoundingBox& b = d.region.bounds();
  if (b.min_x >= 0.0 && b.min_y >= 0.0 && b.max_x <= img.width &&
      b.max_y <= img.height) {
    return d;
  }
  std::vector<Point2> clipped = clip_to_rect(d.region.vertices(), img.width, img.height);
  if (clipped.size() < 3 || signed_area(clipped) == 0.0) {
    throw ValidationError("detection " + d.detection_id +
                          ": region is empty after clipping to the image");
  }
  Detection out = d;
  try {
    out.region = Polygon(std::move(clipped));
  } catch (const ValidationError&) {
    throw ValidationError("detection " + d.detection_id +
                          ": region collapses after clipping to the image");
  }
  return out;
}

IdPair canonical_pair(std::string_view a, std::string_view b) {
  if (a == b) {
    throw ValidationError("self-pair '" + std::string(a) + "' is not allowed");
  }
  if (b < a) return {std::string(b), std::string(a)};
  return {std::string(a), std::string(b)};
}

void validate_ground_truth(const GroundTruth& gt,
                           const std::set<std::string, std::less<>>& detection_ids) {
  for (const IdPair& p : gt.pairwise_matches) {
    if (!(p.first < p.second)) {
      throw DataError("ground-truth pair (" + p.first + ", " + p.second +
                      ") is not canonical");
    }
    for (const std::string* id : {&p.first, &p.second}) {
      if (!detection_ids.contains(*id)) {
        throw DataError("ground-truth pair references unknown detection " + *id);
      }
    }
  }
  std::set<std::string, std::less<>> seen;
  for (const auto& chain : gt.chains) {
    for (const std::string& id : chain) {
      if (!detection_ids.contains(id)) {
        throw DataError("ground-truth chain references unknown detection " + id);
      }
      if (!seen.insert(id).second) {
        throw DataError("ground-truth chains overlap at detection " + id);
      }
    }
  }
}

}  // namespace defectchain
