#pragma once

// Top-down 2-D V2I world: rasterization to label maps, pixel/geo mapping and
// LoS plus first-order image-source path tracing.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "wekbp/channel.hpp"
#include "wekbp/error.hpp"
#include "wekbp/geo.hpp"
#include "wekbp/taxonomy.hpp"
#include "wekbp/wek.hpp"

namespace wekbp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Axis-aligned [x0, x1) × [y0, y1) in meters; x runs along image columns,
// y along image rows (downwards).
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  bool contains(Vec2 p) const { return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1; }
  bool overlaps(const Rect& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct SceneObject {
  Rect box;
  CategoryId category = category::kRoad;
  MaterialId material = MaterialId::NONE;
};

struct Scene {
  double width_m = 96.0;
  double height_m = 54.0;
  double pixel_scale = 0.1;  // meters per pixel
  std::size_t image_height = 540;
  std::size_t image_width = 960;

  Vec2 rsu{48.0, 4.0};
  GeoCoord anchor{};  // geographic position of the RSU

  CategoryId ground = category::kRoad;
  std::vector<SceneObject> surfaces;  // ground-level decoration, no propagation effect
  std::vector<SceneObject> buildings;
  std::vector<SceneObject> vegetation;
  std::vector<SceneObject> vehicles;
  std::vector<SceneObject> clutter;  // small objects that neither block nor reflect

  std::optional<std::size_t> rx_vehicle;  // index into vehicles
  Vec2 rx{48.0, 20.0};                    // receiver antenna point
  Vec2 rx_velocity{0.0, 0.0};             // m/s

  void validate() const {
    if (!(pixel_scale > 0.0)) throw InvalidSceneError("pixel scale must be positive");
    if (image_height == 0 || image_width == 0) throw InvalidSceneError("image dimensions must be positive");
    if (!(rx.x >= 0.0 && rx.x <= width_m && rx.y >= 0.0 && rx.y <= height_m)) {
      throw InvalidSceneError("receiver lies outside the scene extent");
    }
    if (rx_vehicle && *rx_vehicle >= vehicles.size()) throw InvalidSceneError("receiver vehicle index out of range");
  }
};

// ---- Rasterization --------------------------------------------------------

namespace detail {
inline void paint(Grid<CategoryId>& g, const Rect& r, double scale, CategoryId value) {
  auto to_index = [scale](double v, std::size_t limit) {
    const double idx = std::ceil(v / scale - 0.5);
    return static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(limit)));
  };
  const auto c0 = to_index(r.x0, g.width()), c1 = to_index(r.x1, g.width());
  const auto r0 = to_index(r.y0, g.height()), r1 = to_index(r.y1, g.height());
  for (auto row = r0; row < r1; ++row) {
    for (auto col = c0; col < c1; ++col) g(row, col) = value;
  }
}
}  // namespace detail

// A pixel takes an object's category when its center lies inside the object.
// Paint order: ground, surfaces, buildings, vegetation, vehicles, clutter.
inline LabelMap render_label_map(const Scene& scene) {
  scene.validate();
  Grid<CategoryId> g(scene.image_height, scene.image_width, scene.ground);
  for (const auto* layer : {&scene.surfaces, &scene.buildings, &scene.vegetation, &scene.vehicles, &scene.clutter}) {
    for (const auto& obj : *layer) detail::paint(g, obj.box, scene.pixel_scale, obj.category);
  }
  return LabelMap{std::move(g)};
}

// ---- Geographic mapping -----------------------------------------------------

struct PixelCoord {
  double row = 0.0;
  double col = 0.0;
};

// Local tangent plane around the anchor: north is -y, east is +x.
inline GeoCoord world_to_geo(const Scene& scene, Vec2 p) {
  const double east = p.x - scene.rsu.x;
  const double north = -(p.y - scene.rsu.y);
  const double lat = scene.anchor.lat + north / kMetersPerDegree;
  const double lon = scene.anchor.lon + east / (kMetersPerDegree * std::cos(deg_to_rad(scene.anchor.lat)));
  return {lat, lon};
}

inline GeoCoord pixel_to_geo(const Scene& scene, PixelCoord p) {
  if (!(p.row >= 0.0 && p.row < static_cast<double>(scene.image_height) && p.col >= 0.0 &&
        p.col < static_cast<double>(scene.image_width))) {
    throw DomainError("pixel (" + std::to_string(p.row) + ", " + std::to_string(p.col) + ") outside the image");
  }
  return world_to_geo(scene, {p.col * scene.pixel_scale, p.row * scene.pixel_scale});
}

// ---- Path tracing -------------------------------------------------------------

struct TraceConfig {
  ArrayConfig array = ArrayConfig::half_wavelength();
  PermittivityTable permittivity{};
  double vegetation_loss_db = 10.0;  // per crossed vegetation rectangle
  int n_samples = 8;
  double sample_period_s = 50e-6;
};

namespace detail {

// Length of the part of segment a→b strictly inside r (Liang-Barsky clip).
inline double clipped_length(Vec2 a, Vec2 b, const Rect& r) {
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = b - a;
  const double p[4] = {-d.x, d.x, -d.y, d.y};
  const double q[4] = {a.x - r.x0, r.x1 - a.x, a.y - r.y0, r.y1 - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] <= 0.0) return 0.0;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 >= t1) return 0.0;
  }
  return (t1 - t0) * norm(d);
}

inline constexpr double kCrossEps = 1e-9;

inline bool crosses(Vec2 a, Vec2 b, const Rect& r) { return clipped_length(a, b, r) > kCrossEps; }

inline bool blocked_by_buildings(const Scene& s, Vec2 a, Vec2 b) {
  return std::any_of(s.buildings.begin(), s.buildings.end(), [&](const SceneObject& o) { return crosses(a, b, o.box); });
}

inline int vegetation_crossings(const Scene& s, Vec2 a, Vec2 b) {
  return static_cast<int>(
      std::count_if(s.vegetation.begin(), s.vegetation.end(), [&](const SceneObject& o) { return crosses(a, b, o.box); }));
}

struct Facet {
  Vec2 p0, p1;   // end points
  Vec2 normal;   // outward unit normal
};

inline std::array<Facet, 4> facets(const Rect& r) {
  return {{{{r.x0, r.y0}, {r.x0, r.y1}, {-1.0, 0.0}},
           {{r.x1, r.y0}, {r.x1, r.y1}, {1.0, 0.0}},
           {{r.x0, r.y0}, {r.x1, r.y0}, {0.0, -1.0}},
           {{r.x0, r.y1}, {r.x1, r.y1}, {0.0, 1.0}}}};
}

struct Bounce {
  Vec2 point;
  double length = 0.0;
  double incidence = 0.0;
};

// Specular point of tx→facet→rx by the image-source construction.
inline std::optional<Bounce> specular(Vec2 tx, Vec2 rx, const Facet& f) {
  const double htx = dot(tx - f.p0, f.normal);
  const double hrx = dot(rx - f.p0, f.normal);
  if (htx <= 0.0 || hrx <= 0.0) return std::nullopt;
  const Vec2 image = tx - (2.0 * htx) * f.normal;
  const Vec2 d = rx - image;
  const double denom = dot(d, f.normal);
  if (denom == 0.0) return std::nullopt;
  const double t = -dot(image - f.p0, f.normal) / denom;
  const Vec2 p = image + t * d;
  const Vec2 edge = f.p1 - f.p0;
  const double s = dot(p - f.p0, edge) / dot(edge, edge);
  if (!(s > 0.0 && s < 1.0)) return std::nullopt;
  const Vec2 in = p - tx;
  const double cos_inc = std::abs(dot(in, f.normal)) / norm(in);
  return Bounce{p, norm(d), std::acos(std::clamp(cos_inc, 0.0, 1.0))};
}

}  // namespace detail

inline double departure_azimuth(Vec2 from, Vec2 to) { return std::atan2(to.x - from.x, to.y - from.y); }

// LoS (unless a building crosses it) plus one first-order reflection per
// unoccluded building facade or vehicle side. Gains are Friis amplitudes,
// times |R| (perpendicular polarization) for bounces and the vegetation
// penetration loss per crossing.
inline Channel trace_paths(const Scene& scene, const TraceConfig& cfg) {
  scene.validate();
  const Vec2 tx = scene.rsu;
  const Vec2 rx = scene.rx;
  for (const auto& b : scene.buildings) {
    if (b.box.contains(rx)) throw InvalidSceneError("receiver lies inside a building");
  }
  const double lambda = cfg.array.wavelength();
  const double veg_amp = std::pow(10.0, -cfg.vegetation_loss_db / 20.0);

  Channel ch;
  ch.n_samples = cfg.n_samples;
  ch.sample_period_s = cfg.sample_period_s;

  auto make_path = [&](double length, double amplitude, Vec2 first, Vec2 last) {
    Path p;
    p.length_m = length;
    p.gain = lambda / (4.0 * std::numbers::pi * length) * amplitude;
    const double cycles = length / lambda;
    p.phase_rad = -2.0 * std::numbers::pi * (cycles - std::floor(cycles));
    p.delay_s = length / kSpeedOfLight;
    p.az_rad = departure_azimuth(tx, first);
    p.el_rad = 0.0;
    const Vec2 toward = last - rx;
    const double n = norm(toward);
    p.doppler_hz = n > 0.0 ? dot(scene.rx_velocity, (1.0 / n) * toward) / lambda : 0.0;
    return p;
  };

  if (detail::blocked_by_buildings(scene, tx, rx)) {
    ch.los_blocked = true;
  } else {
    const double amp = std::pow(veg_amp, detail::vegetation_crossings(scene, tx, rx));
    ch.paths.push_back(make_path(norm(rx - tx), amp, rx, tx));
  }

  auto add_reflections = [&](const SceneObject& obj) {
    for (const auto& f : detail::facets(obj.box)) {
      const auto b = detail::specular(tx, rx, f);
      if (!b) continue;
      if (detail::blocked_by_buildings(scene, tx, b->point) || detail::blocked_by_buildings(scene, b->point, rx)) continue;
      const double r = std::abs(reflection_coeff(cfg.permittivity.eps(obj.material), b->incidence,
                                                 Polarization::HORIZONTAL, FresnelFormula::STANDARD_FRESNEL));
      const int veg = detail::vegetation_crossings(scene, tx, b->point) + detail::vegetation_crossings(scene, b->point, rx);
      Path p = make_path(b->length, r * std::pow(veg_amp, veg), b->point, b->point);
      p.los = false;
      p.bounce_material = obj.material;
      ch.paths.push_back(p);
    }
  };
  for (const auto& b : scene.buildings) add_reflections(b);
  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    if (scene.rx_vehicle && *scene.rx_vehicle == i) continue;
    add_reflections(scene.vehicles[i]);
  }
  return ch;
}

}  // namespace wekbp
