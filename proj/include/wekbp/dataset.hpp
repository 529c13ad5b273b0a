#pragma once

// Seeded synthetic V2I scene generator and the on-disk dataset (label-map
// PGMs, manifest CSV, per-beam rate sidecar).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "wekbp/channel.hpp"
#include "wekbp/csv.hpp"
#include "wekbp/kv_config.hpp"
#include "wekbp/rng.hpp"
#include "wekbp/scene.hpp"
#include "wekbp/taxonomy.hpp"

namespace wekbp {

enum class SceneMode { URBAN, LOS_ONLY };

struct GenConfig {
  std::size_t count = 100;
  SceneMode mode = SceneMode::URBAN;
  std::size_t image_height = 540;
  std::size_t image_width = 960;
  double pixel_scale = 0.1;
  GeoCoord anchor{33.4209, -111.9286};
  TraceConfig trace{};
  double snr_db = 30.0;  // P/σ²
  double speed_min = 5.0;
  double speed_max = 11.2;
  int other_vehicles_min = 0;
  int other_vehicles_max = 2;
  int trees_max = 4;
  int shadows_max = 3;
  int lampposts_max = 4;
  int pedestrians_max = 3;

  double width_m() const { return static_cast<double>(image_width) * pixel_scale; }
  double height_m() const { return static_cast<double>(image_height) * pixel_scale; }

  void validate() const {
    trace.array.validate();
    if (!(pixel_scale > 0.0)) throw ConfigError("pixel_scale must be positive");
    if (width_m() < 40.0 || height_m() < 30.0) {
      throw ConfigError("scene must span at least 40 m x 30 m (image_width*pixel_scale, image_height*pixel_scale)");
    }
    if (speed_min < 0.0 || speed_max < speed_min) throw ConfigError("invalid speed range");
    if (other_vehicles_min < 0 || other_vehicles_max < other_vehicles_min) throw ConfigError("invalid vehicle range");
    if (trace.n_samples < 1) throw ConfigError("n_samples must be >= 1");
  }

  // Keys (all optional): count, mode (urban|los_only), image_height,
  // image_width, pixel_scale, anchor_lat, anchor_lon, n_t, n_beams,
  // carrier_hz, spacing_m (default λ/2), snr_db, vegetation_loss_db,
  // n_samples, sample_period_s, speed_min, speed_max, other_vehicles_min,
  // other_vehicles_max, trees_max, shadows_max, lampposts_max,
  // pedestrians_max.
  static GenConfig from_config(const KvConfig& kv) {
    GenConfig g;
    g.count = static_cast<std::size_t>(kv.get_int("count", static_cast<long long>(g.count)));
    const auto mode = kv.get_string("mode", "urban");
    if (mode == "urban") {
      g.mode = SceneMode::URBAN;
    } else if (mode == "los_only") {
      g.mode = SceneMode::LOS_ONLY;
    } else {
      throw ConfigError("mode must be 'urban' or 'los_only'");
    }
    g.image_height = static_cast<std::size_t>(kv.get_int("image_height", 540));
    g.image_width = static_cast<std::size_t>(kv.get_int("image_width", 960));
    g.pixel_scale = kv.get_double("pixel_scale", g.pixel_scale);
    g.anchor = make_geo(kv.get_double("anchor_lat", g.anchor.lat), kv.get_double("anchor_lon", g.anchor.lon));
    auto array = ArrayConfig::half_wavelength(static_cast<int>(kv.get_int("n_t", 16)), kv.get_double("carrier_hz", 60e9),
                                              static_cast<int>(kv.get_int("n_beams", 64)));
    array.spacing_m = kv.get_double("spacing_m", array.spacing_m);
    g.trace.array = array;
    g.trace.vegetation_loss_db = kv.get_double("vegetation_loss_db", g.trace.vegetation_loss_db);
    g.trace.n_samples = static_cast<int>(kv.get_int("n_samples", g.trace.n_samples));
    g.trace.sample_period_s = kv.get_double("sample_period_s", g.trace.sample_period_s);
    g.snr_db = kv.get_double("snr_db", g.snr_db);
    g.speed_min = kv.get_double("speed_min", g.speed_min);
    g.speed_max = kv.get_double("speed_max", g.speed_max);
    g.other_vehicles_min = static_cast<int>(kv.get_int("other_vehicles_min", g.other_vehicles_min));
    g.other_vehicles_max = static_cast<int>(kv.get_int("other_vehicles_max", g.other_vehicles_max));
    g.trees_max = static_cast<int>(kv.get_int("trees_max", g.trees_max));
    g.shadows_max = static_cast<int>(kv.get_int("shadows_max", g.shadows_max));
    g.lampposts_max = static_cast<int>(kv.get_int("lampposts_max", g.lampposts_max));
    g.pedestrians_max = static_cast<int>(kv.get_int("pedestrians_max", g.pedestrians_max));
    g.validate();
    return g;
  }
};

// Street layout in meters from the top edge of the scene.
struct StreetLayout {
  double rsu_y = 4.0;
  double near_buildings_end = 8.5;
  double near_sidewalk_end = 12.5;
  double road_end = 23.1;  // 10.6 m, two lanes
  double far_sidewalk_end = 27.1;
  double far_buildings_start = 29.0;

  double lane_center(int lane) const {
    const double w = (road_end - near_sidewalk_end) / 2.0;
    return near_sidewalk_end + w * (lane + 0.5);
  }
};

namespace detail {

struct VehicleKind {
  CategoryId category;
  double length, width;
};
inline constexpr VehicleKind kVehicleKinds[] = {
    {category::kCar, 4.6, 1.9}, {category::kCar, 4.2, 1.8}, {category::kTruck, 7.5, 2.5},
    {category::kBus, 11.0, 2.6}, {category::kMotorcycle, 2.2, 0.8}};

inline SceneObject vehicle_at(const VehicleKind& k, double cx, double cy) {
  return {{cx - k.length / 2, cy - k.width / 2, cx + k.length / 2, cy + k.width / 2}, k.category, MaterialId::METAL};
}

// Buildings along a street edge; facades facing the road get a random setback.
inline void add_building_row(Scene& s, Rng& rng, double y0, double y1, double skip_lo, double skip_hi,
                             bool facade_on_top) {
  double x = rng.uniform(0.0, 4.0);
  while (x < s.width_m - 3.0) {
    const double w = rng.uniform(8.0, 22.0);
    const double x1 = std::min(x + w, s.width_m);
    if (x1 <= skip_lo || x >= skip_hi) {
      const double setback = rng.uniform(0.0, 1.5);
      const Rect box = facade_on_top ? Rect{x, y0 + setback, x1, y1} : Rect{x, y0, x1, y1 - setback};
      s.buildings.push_back({box, category::kBuilding, MaterialId::CEMENT});
    }
    x = x1 + rng.uniform(2.0, 8.0);
  }
}

}  // namespace detail

// Randomized street scene for one sample; deterministic in (seed, sample_id).
inline Scene generate_scene(const GenConfig& cfg, std::uint64_t seed, std::uint64_t sample_id) {
  cfg.validate();
  Rng rng(derive_key(seed, "scene", sample_id));
  const StreetLayout lay;
  Scene s;
  s.width_m = cfg.width_m();
  s.height_m = cfg.height_m();
  s.pixel_scale = cfg.pixel_scale;
  s.image_height = cfg.image_height;
  s.image_width = cfg.image_width;
  s.rsu = {s.width_m / 2.0, lay.rsu_y};
  s.anchor = cfg.anchor;
  s.ground = category::kRoad;

  // Sidewalks are always present so the ground class mix is realistic.
  s.surfaces.push_back({{0.0, 0.0, s.width_m, lay.near_sidewalk_end}, category::kSidewalk, MaterialId::ASPHALT});
  s.surfaces.push_back({{0.0, lay.road_end, s.width_m, s.height_m}, category::kSidewalk, MaterialId::ASPHALT});

  const bool urban = cfg.mode == SceneMode::URBAN;
  for (int i = 0, n = rng.uniform_int(0, cfg.shadows_max); i < n; ++i) {
    const double x = rng.uniform(0.0, s.width_m - 6.0);
    const double y = rng.uniform(lay.near_sidewalk_end, lay.road_end - 2.0);
    s.surfaces.push_back({{x, y, x + rng.uniform(2.0, 6.0), y + rng.uniform(1.0, 2.0)}, category::kShadow,
                          MaterialId::ASPHALT});
  }
  if (urban) {
    detail::add_building_row(s, rng, 0.0, lay.near_buildings_end, s.rsu.x - 8.0, s.rsu.x + 8.0, false);
    detail::add_building_row(s, rng, lay.far_buildings_start, s.height_m, -1.0, -1.0, true);
    for (int i = 0, n = rng.uniform_int(0, cfg.trees_max); i < n; ++i) {
      const double size = rng.uniform(2.0, 3.5);
      const bool near_side = rng.bernoulli(0.5);
      const double y = near_side ? rng.uniform(lay.near_buildings_end, lay.near_sidewalk_end - size)
                                 : rng.uniform(lay.road_end, lay.far_sidewalk_end - size);
      const double x = rng.uniform(1.0, s.width_m - size - 1.0);
      s.vegetation.push_back({{x, y, x + size, y + size}, category::kVegetation, MaterialId::WOOD});
    }
  }

  // Receiver vehicle.
  const int rx_lane = rng.uniform_int(0, 1);
  const auto& rx_kind = detail::kVehicleKinds[rng.uniform_int(0, 4)];
  const double rx_x = rng.uniform(s.rsu.x - 32.0, s.rsu.x + 32.0);
  const double rx_y = lay.lane_center(rx_lane) + rng.uniform(-0.5, 0.5);
  s.vehicles.push_back(detail::vehicle_at(rx_kind, rx_x, rx_y));
  s.rx_vehicle = 0;
  s.rx = {rx_x, rx_y};
  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
  s.rx_velocity = {rx_lane == 0 ? speed : -speed, 0.0};

  if (urban) {
    const int others = rng.uniform_int(cfg.other_vehicles_min, cfg.other_vehicles_max);
    for (int i = 0; i < others; ++i) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        const auto& kind = detail::kVehicleKinds[rng.uniform_int(0, 4)];
        const double x = rng.uniform(kind.length / 2 + 1.0, s.width_m - kind.length / 2 - 1.0);
        const double y = lay.lane_center(rng.uniform_int(0, 1)) + rng.uniform(-0.5, 0.5);
        const auto v = detail::vehicle_at(kind, x, y);
        Rect padded{v.box.x0 - 1.0, v.box.y0, v.box.x1 + 1.0, v.box.y1};
        const bool clash = std::any_of(s.vehicles.begin(), s.vehicles.end(),
                                       [&](const SceneObject& o) { return padded.overlaps(o.box); });
        if (!clash) {
          s.vehicles.push_back(v);
          break;
        }
      }
    }
  }

  auto sidewalk_point = [&](double margin) {
    const bool near_side = rng.bernoulli(0.5);
    const double y = near_side ? rng.uniform(lay.near_buildings_end, lay.near_sidewalk_end - margin)
                               : rng.uniform(lay.road_end, lay.far_sidewalk_end - margin);
    return Vec2{rng.uniform(0.5, s.width_m - margin - 0.5), y};
  };
  for (int i = 0, n = rng.uniform_int(0, cfg.lampposts_max); i < n; ++i) {
    const auto p = sidewalk_point(0.5);
    s.clutter.push_back({{p.x, p.y, p.x + 0.5, p.y + 0.5}, category::kLamppost, MaterialId::NONE});
  }
  for (int i = 0, n = rng.uniform_int(0, cfg.pedestrians_max); i < n; ++i) {
    const auto p = sidewalk_point(0.6);
    s.clutter.push_back({{p.x, p.y, p.x + 0.6, p.y + 0.6}, category::kPedestrian, MaterialId::NONE});
  }
  return s;
}

struct DatasetRecord {
  std::uint64_t sample_id = 0;
  std::string labelmap_path;  // relative to the manifest directory
  GeoCoord tx_geo{};
  GeoCoord rx_geo{};
  int beam_label = 0;
  std::vector<double> rates;
};

struct Sample {
  Scene scene;
  LabelMap labelmap;
  Channel channel;
  DatasetRecord record;
};

inline Sample generate_sample(const GenConfig& cfg, const Codebook& codebook, std::uint64_t seed,
                              std::uint64_t sample_id) {
  Sample out;
  out.scene = generate_scene(cfg, seed, sample_id);
  out.labelmap = render_label_map(out.scene);
  out.channel = trace_paths(out.scene, cfg.trace);
  out.record.sample_id = sample_id;
  out.record.tx_geo = world_to_geo(out.scene, out.scene.rsu);
  out.record.rx_geo = world_to_geo(out.scene, out.scene.rx);
  out.record.rates = beam_rates(out.channel, cfg.trace.array, codebook, db_to_linear(cfg.snr_db), 1.0);
  out.record.beam_label = argmax(out.record.rates);
  return out;
}

inline std::string labelmap_filename(std::uint64_t sample_id) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "labelmaps/labelmap_%06llu.pgm", static_cast<unsigned long long>(sample_id));
  return buf;
}

inline constexpr std::string_view kManifestHeader = "sample_id,labelmap,tx_lat,tx_lon,rx_lat,rx_lon,beam_label";

inline std::string encode_manifest(const std::vector<DatasetRecord>& records) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.sample_id) + "," + r.labelmap_path + "," + format_double(r.tx_geo.lat) + "," +
           format_double(r.tx_geo.lon) + "," + format_double(r.rx_geo.lat) + "," + format_double(r.rx_geo.lon) + "," +
           std::to_string(r.beam_label) + "\n";
  }
  return out;
}

inline std::string encode_rates(const std::vector<DatasetRecord>& records, int n_beams) {
  std::string out = "sample_id";
  for (int b = 0; b < n_beams; ++b) out += ",rate_" + std::to_string(b);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.sample_id);
    for (double v : r.rates) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

// Reads manifest.csv (and rates.csv beside it when present).
inline std::vector<DatasetRecord> load_manifest(const std::filesystem::path& manifest) {
  if (!std::filesystem::exists(manifest)) throw MissingArtifactError("manifest not found: " + manifest.string());
  const auto rows = read_csv_rows(manifest);
  if (rows.empty() || rows.front().size() != 7 || rows.front()[0] != "sample_id") {
    throw DatasetError(manifest.string() + ": missing manifest header");
  }
  std::vector<DatasetRecord> out;
  try {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& c = rows[i];
      if (c.size() != 7) throw DatasetError(manifest.string() + ": row " + std::to_string(i) + " has wrong arity");
      DatasetRecord r;
      r.sample_id = static_cast<std::uint64_t>(parse_int(c[0], "sample_id"));
      r.labelmap_path = c[1];
      r.tx_geo = make_geo(parse_double(c[2], "tx_lat"), parse_double(c[3], "tx_lon"));
      r.rx_geo = make_geo(parse_double(c[4], "rx_lat"), parse_double(c[5], "rx_lon"));
      r.beam_label = static_cast<int>(parse_int(c[6], "beam_label"));
      out.push_back(std::move(r));
    }
    const auto rates_path = manifest.parent_path() / "rates.csv";
    if (std::filesystem::exists(rates_path)) {
      const auto rrows = read_csv_rows(rates_path);
      if (rrows.size() != out.size() + 1) throw DatasetError(rates_path.string() + ": row count differs from manifest");
      for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& c = rrows[i + 1];
        if (c.empty() || static_cast<std::uint64_t>(parse_int(c[0], "sample_id")) != out[i].sample_id) {
          throw DatasetError(rates_path.string() + ": sample ids out of step with the manifest");
        }
        for (std::size_t b = 1; b < c.size(); ++b) out[i].rates.push_back(parse_double(c[b], "rate"));
      }
    }
  } catch (const ConfigError& e) {
    throw DatasetError(manifest.string() + ": " + e.what());
  } catch (const DomainError& e) {
    throw DatasetError(manifest.string() + ": " + e.what());
  }
  return out;
}

// Writes labelmaps/*.pgm, manifest.csv and rates.csv under out_dir.
inline std::vector<DatasetRecord> generate_dataset(const GenConfig& cfg, std::uint64_t seed,
                                                   const std::filesystem::path& out_dir) {
  cfg.validate();
  const auto codebook = codebook_gen(cfg.trace.array);
  std::vector<DatasetRecord> records;
  records.reserve(cfg.count);
  for (std::uint64_t id = 0; id < cfg.count; ++id) {
    auto sample = generate_sample(cfg, codebook, seed, id);
    sample.record.labelmap_path = labelmap_filename(id);
    save_label_map(out_dir / sample.record.labelmap_path, sample.labelmap);
    records.push_back(std::move(sample.record));
  }
  write_text_file(out_dir / "manifest.csv", encode_manifest(records));
  write_text_file(out_dir / "rates.csv", encode_rates(records, cfg.trace.array.n_beams));
  return records;
}

}  // namespace wekbp
