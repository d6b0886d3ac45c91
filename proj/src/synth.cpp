#include "defectchain/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "defectchain/error.hpp"
#include "defectchain/rng.hpp"

namespace defectchain {

namespace {

constexpr double kRulerLength = 260.0;
constexpr double kRulerHeight = 40.0;

// Float canvas used while rendering.
struct Canvas {
  int width, height;
  std::vector<float> v;

  Canvas(int w, int h, float fill = 0.0f) : width(w), height(h), v(std::size_t(w) * h, fill) {}
  float& at(int x, int y) { return v[std::size_t(y) * width + x]; }
  float at(int x, int y) const { return v[std::size_t(y) * width + x]; }

  float bilinear(double x, double y) const {
    x = std::clamp(x, 0.0, width - 1.0);
    y = std::clamp(y, 0.0, height - 1.0);
    const int x0 = std::min(int(x), width - 2);
    const int y0 = std::min(int(y), height - 2);
    const double fx = x - x0, fy = y - y0;
    return float((1 - fx) * (1 - fy) * at(x0, y0) + fx * (1 - fy) * at(x0 + 1, y0) +
                 (1 - fx) * fy * at(x0, y0 + 1) + fx * fy * at(x0 + 1, y0 + 1));
  }

  GrayImage to_gray() const {
    GrayImage out(width, height);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        out.at(x, y) = std::uint8_t(std::clamp(std::floor(at(x, y) + 0.5f), 0.0f, 255.0f));
      }
    }
    return out;
  }
};

// Calls fn(x, y) for every pixel centre inside the polygon.
template <typename Fn>
void for_each_pixel_in(const Polygon& poly, int width, int height, Fn fn) {
  const BoundingBox& b = poly.bounds();
  const int x0 = std::max(0, int(std::ceil(b.min_x)));
  const int y0 = std::max(0, int(std::ceil(b.min_y)));
  const int x1 = std::min(width - 1, int(std::floor(b.max_x)));
  const int y1 = std::min(height - 1, int(std::floor(b.max_y)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (point_in_region({double(x), double(y)}, poly)) fn(x, y);
    }
  }
}

void add_value_noise(Canvas& c, Rng& rng, int cell, double amplitude) {
  const int gw = c.width / cell + 2, gh = c.height / cell + 2;
  std::vector<double> grid(std::size_t(gw) * gh);
  for (double& g : grid) g = rng.uniform(-1.0, 1.0);
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  for (int y = 0; y < c.height; ++y) {
    const int gy = y / cell;
    const double ty = smooth(double(y % cell) / cell);
    for (int x = 0; x < c.width; ++x) {
      const int gx = x / cell;
      const double tx = smooth(double(x % cell) / cell);
      auto g = [&](int i, int j) { return grid[std::size_t(j) * gw + i]; };
      const double top = g(gx, gy) * (1 - tx) + g(gx + 1, gy) * tx;
      const double bot = g(gx, gy + 1) * (1 - tx) + g(gx + 1, gy + 1) * tx;
      c.at(x, y) += float(amplitude * (top * (1 - ty) + bot * ty));
    }
  }
}

void scatter_shapes(Canvas& c, Rng& rng, int count) {
  for (int s = 0; s < count; ++s) {
    const double cx = rng.uniform(0.0, c.width);
    const double cy = rng.uniform(0.0, c.height);
    const double size = rng.uniform(3.0, 14.0);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const float value = float(rng.uniform(25.0, 230.0));
    const int kind = int(rng.below(3));
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double aspect = rng.uniform(0.4, 1.0);
    std::array<Point2, 3> tri{};
    if (kind == 2) {
      for (auto& p : tri) {
        const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double r = rng.uniform(0.5, 1.0) * size;
        p = {cx + r * std::cos(t), cy + r * std::sin(t)};
      }
    }
    const int x0 = std::max(0, int(cx - size - 1)), x1 = std::min(c.width - 1, int(cx + size + 1));
    const int y0 = std::max(0, int(cy - size - 1)), y1 = std::min(c.height - 1, int(cy + size + 1));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = dx * ca + dy * sa, v = -dx * sa + dy * ca;
        bool inside = false;
        if (kind == 0) {
          inside = std::abs(u) <= size * 0.7 && std::abs(v) <= size * 0.7 * aspect;
        } else if (kind == 1) {
          const double a = size * 0.8, b = size * 0.8 * aspect;
          inside = (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
        } else {
          auto side = [&](Point2 p, Point2 q) {
            return (q.x - p.x) * (y - p.y) - (q.y - p.y) * (x - p.x);
          };
          const double s0 = side(tri[0], tri[1]), s1 = side(tri[1], tri[2]), s2 = side(tri[2], tri[0]);
          inside = (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
        }
        if (inside) c.at(x, y) = value;
      }
    }
  }
}

// Ruler pattern in local coordinates [0,L]x[0,H]: light body, dark border,
// ticks every 10 units (longer every 50 and 100) and a digit-like block
// code beside each major tick.
float ruler_value(double u, double v) {
  if (u < 2.0 || v < 2.0 || u > kRulerLength - 2.0 || v > kRulerHeight - 2.0) return 20.0f;
  const double t = u - 10.0;
  const int k = int(std::lround(t / 10.0));
  if (std::abs(t - 10.0 * k) < 1.0 && k >= 0) {
    const double len = k % 10 == 0 ? 24.0 : (k % 5 == 0 ? 17.0 : 10.0);
    if (v < len) return 25.0f;
  }
  if (v > 27.0 && v < 36.0) {
    const int major = int(std::floor((u - 10.0) / 50.0));
    const double du = u - 10.0 - 50.0 * major;
    if (major >= 0 && du > 4.0 && du < 16.0) {
      const int code = (major * 37 + 11) & 0x3f;
      const int col = int((du - 4.0) / 4.0);
      const int row = int((v - 27.0) / 4.5);
      if ((code >> (row * 3 + col)) & 1) return 30.0f;
    }
  }
  return 232.0f;
}

struct RulerPlacement {
  Point2 origin;
  double angle;
  double scale;

  Point2 to_world(double u, double v) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {origin.x + scale * (u * c - v * s), origin.y + scale * (u * s + v * c)};
  }
  Polygon region(double pad) const {
    return Polygon({to_world(-pad, -pad), to_world(kRulerLength + pad, -pad),
                    to_world(kRulerLength + pad, kRulerHeight + pad),
                    to_world(-pad, kRulerHeight + pad)});
  }
};

void draw_ruler(Canvas& c, const RulerPlacement& r) {
  const Polygon body = r.region(0.0);
  const double ca = std::cos(r.angle), sa = std::sin(r.angle);
  for_each_pixel_in(body, c.width, c.height, [&](int x, int y) {
    const double dx = x - r.origin.x, dy = y - r.origin.y;
    const double u = (dx * ca + dy * sa) / r.scale;
    const double v = (-dx * sa + dy * ca) / r.scale;
    c.at(x, y) = ruler_value(u, v);
  });
}

Polygon random_convex_blob(Rng& rng, Point2 center, double radius) {
  std::vector<Point2> pts;
  const int n = 12;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double stretch = rng.uniform(0.75, 1.0);
  const double tilt = rng.uniform(0.0, std::numbers::pi);
  for (int i = 0; i < n; ++i) {
    const double t = phase + 2.0 * std::numbers::pi * (i + rng.uniform(-0.3, 0.3)) / n;
    const double r = radius * rng.uniform(0.8, 1.0);
    const double lx = r * std::cos(t), ly = r * std::sin(t) * stretch;
    pts.push_back({center.x + lx * std::cos(tilt) - ly * std::sin(tilt),
                   center.y + lx * std::sin(tilt) + ly * std::cos(tilt)});
  }
  return Polygon(convex_hull(std::move(pts)));
}

void draw_corrosion(Canvas& c, const Polygon& region, Rng& rng) {
  for_each_pixel_in(region, c.width, c.height, [&](int x, int y) {
    c.at(x, y) = c.at(x, y) * 0.55f + 8.0f;
  });
  const BoundingBox& b = region.bounds();
  // Dark pits and pale rust flecks.
  for (int pit = 0; pit < 48; ++pit) {
    const Point2 p{rng.uniform(b.min_x, b.max_x), rng.uniform(b.min_y, b.max_y)};
    if (!point_in_region(p, region)) continue;
    const double r = rng.uniform(1.5, 4.0);
    const float v = pit % 3 == 2 ? 170.0f : 18.0f;
    for (int y = int(p.y - r); y <= int(p.y + r); ++y) {
      for (int x = int(p.x - r); x <= int(p.x + r); ++x) {
        if (x < 0 || y < 0 || x >= c.width || y >= c.height) continue;
        if ((x - p.x) * (x - p.x) + (y - p.y) * (y - p.y) <= r * r) c.at(x, y) = v;
      }
    }
  }
}

void draw_crack(Canvas& c, const Polygon& region, Point2 center, double radius, Rng& rng) {
  for (int strand = 0; strand < 3; ++strand) {
    double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Point2 p{center.x + rng.uniform(-0.3, 0.3) * radius, center.y + rng.uniform(-0.3, 0.3) * radius};
    for (int step = 0; step < 60; ++step) {
      heading += rng.uniform(-0.5, 0.5);
      const Point2 next{p.x + 2.0 * std::cos(heading), p.y + 2.0 * std::sin(heading)};
      if (!point_in_region(next, region)) {
        heading += std::numbers::pi * 0.75;
        continue;
      }
      p = next;
      for (int y = int(p.y) - 1; y <= int(p.y) + 2; ++y) {
        for (int x = int(p.x) - 1; x <= int(p.x) + 2; ++x) {
          if (x < 0 || y < 0 || x >= c.width || y >= c.height) continue;
          if ((x - p.x) * (x - p.x) + (y - p.y) * (y - p.y) <= 1.6) c.at(x, y) = 22.0f;
        }
      }
    }
  }
}

GrayImage render_crop(const Canvas& canvas, const CropTransform& t, double sigma,
                      std::uint64_t seed, const std::vector<RulerPlacement>& local_rulers) {
  Canvas crop(t.width, t.height);
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      const Point2 p = t.to_canvas({double(x), double(y)});
      crop.at(x, y) = canvas.bilinear(p.x, p.y);
    }
  }
  for (const RulerPlacement& r : local_rulers) draw_ruler(crop, r);
  Rng rng(derive_seed(seed, "noise|" + t.image_id));
  if (sigma > 0.0) {
    for (float& v : crop.v) v += float(sigma * rng.normal());
  }
  return crop.to_gray();
}

std::vector<float> location_embedding(Point2 c, int dim, std::uint64_t seed) {
  // Random Fourier features of the crop centre: the cosine of two
  // embeddings decays with the distance between crops.
  constexpr double kLengthScale = 300.0;
  Rng rng(derive_seed(seed, "embedding-basis"));
  std::vector<float> e(dim);
  for (int d = 0; d < dim; ++d) {
    const double wx = rng.normal() / kLengthScale;
    const double wy = rng.normal() / kLengthScale;
    const double b = rng.uniform(0.0, 2.0 * std::numbers::pi);
    e[d] = float(std::cos(wx * c.x + wy * c.y + b));
  }
  return e;
}

double max_half_extent(double along, double across, double max_angle) {
  double best = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double a = max_angle * i / 100.0;
    best = std::max(best, along * std::cos(a) + across * std::sin(a));
  }
  return best;
}

std::string object_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%02d", prefix, i);
  return buf;
}

std::string image_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%03d", i);
  return buf;
}

void add_detections(SynthDataset& ds, const SynthConfig& cfg) {
  for (const CropTransform& crop : ds.truth.crops) {
    for (const PlantedObject& obj : ds.truth.objects) {
      std::vector<Point2> local;
      for (const Point2& p : obj.canvas_region.vertices()) local.push_back(crop.to_crop(p));
      const double full = std::abs(signed_area(local));
      std::vector<Point2> clipped = clip_to_rect(local, crop.width, crop.height);
      if (clipped.size() < 3) continue;
      const double visible = std::abs(signed_area(clipped));
      if (visible < cfg.min_visible_fraction * full) continue;
      const std::string det_id = crop.image_id + "_" + obj.id;
      ds.detections.push_back(
          Detection{det_id, crop.image_id, obj.category, obj.class_label, Polygon(std::move(clipped)), 1.0});
      ds.truth.provenance.emplace_back(det_id, obj.id);
    }
  }
}

void derive_ground_truth(SynthDataset& ds) {
  std::map<std::string, std::vector<std::string>> by_object;
  for (const auto& [det, obj] : ds.truth.provenance) by_object[obj].push_back(det);
  for (const PlantedObject& obj : ds.truth.objects) {
    if (obj.category != Category::kDefect) continue;
    auto it = by_object.find(obj.id);
    if (it == by_object.end()) continue;
    std::vector<std::string> members = it->second;
    std::sort(members.begin(), members.end());
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        ds.ground_truth.pairwise_matches.insert(canonical_pair(members[i], members[j]));
      }
    }
    ds.ground_truth.chains.push_back(std::move(members));
  }
}

ClassTable synth_classes(const SynthConfig& cfg) {
  ClassTable t;
  for (const std::string& c : cfg.defect_classes) t.declare(c, Category::kDefect);
  t.declare("ruler", Category::kUtility);
  return t;
}

}  // namespace

void SynthConfig::validate() const {
  if (canvas_width < 64 || canvas_height < 64) throw ConfigError("canvas is too small");
  if (crop_width < 64 || crop_height < 64) throw ConfigError("crop must be at least 64x64");
  if (crop_width > canvas_width || crop_height > canvas_height) {
    throw ConfigError("crop does not fit in the canvas");
  }
  if (n_crops < 1) throw ConfigError("n_crops must be >= 1");
  if (!(overlap_target >= 0.0 && overlap_target < 1.0)) throw ConfigError("overlap_target must lie in [0,1)");
  if (n_defects < 0 || n_utilities < 0) throw ConfigError("object counts must be >= 0");
  if (n_defects > 0 && defect_classes.empty()) throw ConfigError("defect_classes is empty");
  if (!(rotation_jitter_deg >= 0.0 && rotation_jitter_deg <= 45.0)) {
    throw ConfigError("rotation_jitter_deg must lie in [0,45]");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(defect_radius_min > 0.0 && defect_radius_max >= defect_radius_min)) {
    throw ConfigError("invalid defect radius range");
  }
  if (!(min_visible_fraction > 0.0 && min_visible_fraction <= 1.0)) {
    throw ConfigError("min_visible_fraction must lie in (0,1]");
  }
  if (embedding_dim < 0) throw ConfigError("embedding_dim must be >= 0");
}

Point2 CropTransform::to_canvas(Point2 p) const {
  const double ux = p.x - (width - 1) / 2.0, uy = p.y - (height - 1) / 2.0;
  const double c = std::cos(angle), s = std::sin(angle);
  return {center.x + scale * (c * ux - s * uy), center.y + scale * (s * ux + c * uy)};
}

Point2 CropTransform::to_crop(Point2 p) const {
  const double dx = (p.x - center.x) / scale, dy = (p.y - center.y) / scale;
  const double c = std::cos(angle), s = std::sin(angle);
  return {(width - 1) / 2.0 + c * dx + s * dy, (height - 1) / 2.0 - s * dx + c * dy};
}

std::vector<Point2> CropTransform::footprint() const {
  return {to_canvas({0.0, 0.0}), to_canvas({double(width), 0.0}),
          to_canvas({double(width), double(height)}), to_canvas({0.0, double(height)})};
}

GrayImage render_texture(int width, int height, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "texture"));
  Canvas c(width, height, 128.0f);
  const std::array<std::pair<int, double>, 5> octaves = {{{256, 40}, {128, 30}, {64, 20}, {32, 12}, {16, 8}}};
  for (const auto& [cell, amp] : octaves) add_value_noise(c, rng, cell, amp);
  scatter_shapes(c, rng, width * height / 450);
  return c.to_gray();
}

namespace {

Canvas to_canvas(const GrayImage& g) {
  Canvas c(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) c.at(x, y) = g.at(x, y);
  }
  return c;
}

}  // namespace

SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset ds;
  ds.dataset_id = "synth-" + std::to_string(cfg.seed);
  ds.classes = synth_classes(cfg);

  // Serpentine grid of crop centres.
  const double max_angle = cfg.rotation_jitter_deg * std::numbers::pi / 180.0;
  const double mx = max_half_extent(cfg.crop_width / 2.0, cfg.crop_height / 2.0, max_angle) + 1.0;
  const double my = max_half_extent(cfg.crop_height / 2.0, cfg.crop_width / 2.0, max_angle) + 1.0;
  const double step_x = cfg.crop_width * (1.0 - cfg.overlap_target);
  const double step_y = cfg.crop_height * (1.0 - cfg.overlap_target);
  if (cfg.canvas_width < 2 * mx || cfg.canvas_height < 2 * my) {
    throw ConfigError("rotated crops do not fit in the canvas");
  }
  const int cols = std::min(cfg.n_crops, int(std::floor((cfg.canvas_width - 2 * mx) / step_x)) + 1);
  const int rows = (cfg.n_crops + cols - 1) / cols;
  if ((rows - 1) * step_y + 2 * my > cfg.canvas_height) {
    throw ConfigError("layout of " + std::to_string(cfg.n_crops) + " crops exceeds the canvas");
  }
  const double gx0 = cfg.canvas_width / 2.0 - (cols - 1) * step_x / 2.0;
  const double gy0 = cfg.canvas_height / 2.0 - (rows - 1) * step_y / 2.0;

  Rng layout(derive_seed(cfg.seed, "layout"));
  for (int i = 0; i < cfg.n_crops; ++i) {
    const int row = i / cols;
    const int col = row % 2 == 0 ? i % cols : cols - 1 - i % cols;
    CropTransform t;
    t.image_id = image_id(i);
    t.center = {gx0 + col * step_x, gy0 + row * step_y};
    t.angle = layout.uniform(-max_angle, max_angle);
    t.width = cfg.crop_width;
    t.height = cfg.crop_height;
    ds.truth.crops.push_back(t);
  }

  // Objects go where crops overlap most: the grid of crop centres inset by
  // half a step.
  const double inset_x = cols > 1 ? step_x / 2.0 : 0.0;
  const double inset_y = rows > 1 ? step_y / 2.0 : 0.0;
  const double ox0 = gx0 + inset_x, ox1 = gx0 + (cols - 1) * step_x - inset_x;
  const double oy0 = gy0 + inset_y, oy1 = gy0 + (rows - 1) * step_y - inset_y;
  Rng objects(derive_seed(cfg.seed, "objects"));
  struct Disc {
    Point2 c;
    double r;
  };
  std::vector<Disc> taken;
  auto place = [&](double radius) {
    for (int attempt = 0; attempt < 5000; ++attempt) {
      const Point2 c{ox0 < ox1 ? objects.uniform(ox0, ox1) : (ox0 + ox1) / 2.0,
                     oy0 < oy1 ? objects.uniform(oy0, oy1) : (oy0 + oy1) / 2.0};
      const bool clear = std::all_of(taken.begin(), taken.end(), [&](const Disc& d) {
        return std::hypot(d.c.x - c.x, d.c.y - c.y) >= d.r + radius + 40.0;
      });
      if (clear) {
        taken.push_back({c, radius});
        return c;
      }
    }
    throw ConfigError("cannot place planted objects without overlap; reduce their number");
  };

  GrayImage texture = render_texture(cfg.canvas_width, cfg.canvas_height, cfg.seed);
  Canvas canvas = to_canvas(texture);

  for (int u = 0; u < cfg.n_utilities; ++u) {
    const double half_diag = std::hypot(kRulerLength, kRulerHeight) / 2.0;
    const Point2 c = place(half_diag);
    const double angle = objects.uniform(0.0, std::numbers::pi);
    RulerPlacement r{{0, 0}, angle, 1.0};
    const Point2 mid = r.to_world(kRulerLength / 2.0, kRulerHeight / 2.0);
    r.origin = {c.x - mid.x, c.y - mid.y};
    draw_ruler(canvas, r);
    ds.truth.objects.push_back({object_id("util", u), Category::kUtility, "ruler", r.region(2.0)});
  }
  for (int d = 0; d < cfg.n_defects; ++d) {
    const double radius = objects.uniform(cfg.defect_radius_min, cfg.defect_radius_max);
    const Point2 c = place(radius);
    const std::string& cls = cfg.defect_classes[d % cfg.defect_classes.size()];
    Polygon region = random_convex_blob(objects, c, radius);
    if (cls == "crack") {
      draw_crack(canvas, region, c, radius, objects);
    } else {
      draw_corrosion(canvas, region, objects);
    }
    ds.truth.objects.push_back({object_id("def", d), Category::kDefect, cls, std::move(region)});
  }

  for (const CropTransform& t : ds.truth.crops) {
    ds.pixels.push_back(render_crop(canvas, t, cfg.noise_sigma, cfg.seed, {}));
    ds.images.push_back({t.image_id, "images/" + t.image_id + ".pgm", t.width, t.height, cfg.acquisition_tag});
  }
  if (cfg.embedding_dim > 0) {
    ds.embeddings.emplace();
    for (const CropTransform& t : ds.truth.crops) {
      ds.embeddings->push_back(location_embedding(t.center, cfg.embedding_dim, cfg.seed));
    }
  }
  add_detections(ds, cfg);
  derive_ground_truth(ds);
  return ds;
}

Fig2Scenario plant_fig2_scenario(const SynthConfig& cfg, int background) {
  cfg.validate();
  const int cols = cfg.canvas_width / cfg.crop_width;
  const int rows = cfg.canvas_height / cfg.crop_height;
  if (background < 0 || cols * rows < background + 2) {
    throw ConfigError("canvas holds too few disjoint crops for the scenario");
  }
  Fig2Scenario sc;
  SynthDataset& ds = sc.dataset;
  ds.dataset_id = "ruler-trap-" + std::to_string(cfg.seed);
  ds.classes = synth_classes(cfg);
  Canvas canvas = to_canvas(render_texture(cfg.canvas_width, cfg.canvas_height, cfg.seed));

  // Disjoint windows; the two traps sit in opposite corners of the grid.
  std::vector<int> cells(cols * rows);
  for (int i = 0; i < cols * rows; ++i) cells[i] = i;
  std::rotate(cells.begin() + 1, cells.end() - 1, cells.end());
  const double gap_x = double(cfg.canvas_width - cols * cfg.crop_width) / (cols + 1);
  const double gap_y = double(cfg.canvas_height - rows * cfg.crop_height) / (rows + 1);

  const RulerPlacement local{{(cfg.crop_width - 1.7 * kRulerLength) / 2.0, cfg.crop_height * 0.55}, 0.0, 1.7};
  for (int i = 0; i < background + 2; ++i) {
    const int cell = cells[i];
    CropTransform t;
    t.image_id = image_id(i);
    t.width = cfg.crop_width;
    t.height = cfg.crop_height;
    const double left = gap_x + (cell % cols) * (cfg.crop_width + gap_x);
    const double top = gap_y + (cell / cols) * (cfg.crop_height + gap_y);
    t.center = {std::floor(left) + (t.width - 1) / 2.0, std::floor(top) + (t.height - 1) / 2.0};
    const bool trap = i < 2;
    std::vector<RulerPlacement> rulers;
    if (trap) rulers.push_back(local);
    ds.pixels.push_back(render_crop(canvas, t, cfg.noise_sigma, cfg.seed, rulers));
    ds.images.push_back({t.image_id, "images/" + t.image_id + ".pgm", t.width, t.height, cfg.acquisition_tag});
    if (trap) {
      ds.detections.push_back(Detection{t.image_id + "_util00", t.image_id, Category::kUtility, "ruler",
                                        local.region(2.0), 1.0});
    }
    ds.truth.crops.push_back(t);
  }
  if (cfg.embedding_dim > 0) {
    ds.embeddings.emplace();
    for (const CropTransform& t : ds.truth.crops) {
      ds.embeddings->push_back(location_embedding(t.center, cfg.embedding_dim, cfg.seed));
    }
  }
  sc.trap_a = ds.images[0].image_id;
  sc.trap_b = ds.images[1].image_id;
  return sc;
}

}  // namespace defectchain
