#pragma once

// Category registry, keep/merge/drop taxonomy and the PES (propagation
// environment semantics) extraction that turns segmentation labels into
// material labels.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "wekbp/csv.hpp"
#include "wekbp/error.hpp"
#include "wekbp/grid.hpp"
#include "wekbp/kv_config.hpp"

namespace wekbp {

using CategoryId = std::uint8_t;

enum class MaterialId : std::uint8_t { CEMENT = 0, METAL = 1, WOOD = 2, ASPHALT = 3, NONE = 4 };

inline constexpr std::array<MaterialId, 4> kKnownMaterials = {MaterialId::CEMENT, MaterialId::METAL,
                                                              MaterialId::WOOD, MaterialId::ASPHALT};
inline constexpr std::array<MaterialId, 5> kAllMaterials = {MaterialId::CEMENT, MaterialId::METAL,
                                                            MaterialId::WOOD, MaterialId::ASPHALT,
                                                            MaterialId::NONE};

inline constexpr std::size_t material_index(MaterialId m) noexcept { return static_cast<std::size_t>(m); }

inline std::string_view material_name(MaterialId m) {
  switch (m) {
    case MaterialId::CEMENT: return "CEMENT";
    case MaterialId::METAL: return "METAL";
    case MaterialId::WOOD: return "WOOD";
    case MaterialId::ASPHALT: return "ASPHALT";
    case MaterialId::NONE: return "NONE";
  }
  return "?";
}

inline MaterialId parse_material(std::string_view name) {
  for (auto m : kAllMaterials) {
    if (material_name(m) == name) return m;
  }
  throw ConfigError("unknown material '" + std::string(name) + "'");
}

struct LabelMap {
  Grid<CategoryId> labels;

  std::size_t width() const noexcept { return labels.width(); }
  std::size_t height() const noexcept { return labels.height(); }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct MaterialMap {
  Grid<MaterialId> materials;

  std::size_t width() const noexcept { return materials.width(); }
  std::size_t height() const noexcept { return materials.height(); }
  friend bool operator==(const MaterialMap&, const MaterialMap&) = default;
};

class CategoryRegistry {
 public:
  CategoryRegistry() = default;
  explicit CategoryRegistry(std::map<CategoryId, std::string> entries) : entries_(std::move(entries)) {
    std::set<std::string> names;
    for (const auto& [id, name] : entries_) {
      if (!names.insert(name).second) throw ConfigError("duplicate category name '" + name + "'");
    }
  }

  std::size_t count() const noexcept { return entries_.size(); }
  bool contains(CategoryId id) const { return entries_.count(id) != 0; }
  const std::string& name(CategoryId id) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) throw UnknownCategoryError(id);
    return it->second;
  }
  std::optional<CategoryId> id_of(std::string_view name) const {
    for (const auto& [id, n] : entries_) {
      if (n == name) return id;
    }
    return std::nullopt;
  }
  CategoryId require(std::string_view name) const {
    if (auto id = id_of(name)) return *id;
    throw ConfigError("category '" + std::string(name) + "' is not in the registry");
  }
  const std::map<CategoryId, std::string>& entries() const noexcept { return entries_; }

 private:
  std::map<CategoryId, std::string> entries_;
};

// keep / merge / drop partition of a registry, each kept or merged category
// assigned to exactly one material.
class Taxonomy {
 public:
  Taxonomy(CategoryRegistry registry, std::map<CategoryId, MaterialId> keep,
           std::map<CategoryId, MaterialId> merge, std::set<CategoryId> drop)
      : registry_(std::move(registry)), keep_(std::move(keep)), merge_(std::move(merge)), drop_(std::move(drop)) {
    for (const auto& [id, m] : keep_) {
      if (merge_.count(id) || drop_.count(id)) {
        throw TaxonomyError("category " + registry_.name(id) + " appears in more than one of keep/merge/drop");
      }
      if (m == MaterialId::NONE) throw TaxonomyError("kept category " + registry_.name(id) + " mapped to NONE");
    }
    for (const auto& [id, m] : merge_) {
      if (drop_.count(id)) {
        throw TaxonomyError("category " + registry_.name(id) + " appears in more than one of keep/merge/drop");
      }
      if (m == MaterialId::NONE) throw TaxonomyError("merged category " + registry_.name(id) + " mapped to NONE");
    }
    for (const auto& [id, name] : registry_.entries()) {
      if (!keep_.count(id) && !merge_.count(id) && !drop_.count(id)) {
        throw TaxonomyError("category " + name + " is not covered by keep, merge or drop");
      }
    }
    for (CategoryId id = 0;; ++id) {
      if (auto it = keep_.find(id); it != keep_.end()) {
        lut_[id] = it->second;
      } else if (auto jt = merge_.find(id); jt != merge_.end()) {
        lut_[id] = jt->second;
      } else if (drop_.count(id)) {
        lut_[id] = MaterialId::NONE;
      }
      if (id == 255) break;
    }
  }

  const CategoryRegistry& registry() const noexcept { return registry_; }
  const std::map<CategoryId, MaterialId>& keep() const noexcept { return keep_; }
  const std::map<CategoryId, MaterialId>& merge() const noexcept { return merge_; }
  const std::set<CategoryId>& drop() const noexcept { return drop_; }

  std::optional<MaterialId> material_of(CategoryId id) const { return lut_[id]; }

  // Distinct non-NONE materials this taxonomy can emit.
  std::size_t output_material_count() const {
    std::set<MaterialId> out;
    for (const auto& kv : keep_) out.insert(kv.second);
    for (const auto& kv : merge_) out.insert(kv.second);
    return out.size();
  }

  // Config schema:
  //   category.<id> = <name>         registry entry
  //   keep.<name>   = <MATERIAL>     kept category and its material
  //   merge.<name>  = <MATERIAL>     merged category and its target material
  //   drop          = <name>, <name>, ...
  static Taxonomy parse(const KvConfig& cfg) {
    std::map<CategoryId, std::string> entries;
    for (const auto& [key, value] : cfg.with_prefix("category.")) {
      const auto id = parse_int(key, "category id");
      if (id < 0 || id > 255) throw ConfigError("category id out of range: " + key);
      entries[static_cast<CategoryId>(id)] = value;
    }
    if (entries.empty()) throw ConfigError("taxonomy config has no category.<id> entries");
    CategoryRegistry registry(std::move(entries));

    std::map<CategoryId, MaterialId> keep;
    for (const auto& [name, mat] : cfg.with_prefix("keep.")) keep[registry.require(name)] = parse_material(mat);
    std::map<CategoryId, MaterialId> merge;
    for (const auto& [name, mat] : cfg.with_prefix("merge.")) merge[registry.require(name)] = parse_material(mat);
    std::set<CategoryId> drop;
    if (auto list = cfg.find("drop")) {
      for (const auto& name : split(*list, ',')) {
        const auto n = trim(name);
        if (!n.empty()) drop.insert(registry.require(n));
      }
    }
    return Taxonomy(std::move(registry), std::move(keep), std::move(merge), std::move(drop));
  }

  static Taxonomy load(const std::filesystem::path& path) { return parse(KvConfig::load(path)); }

 private:
  CategoryRegistry registry_;
  std::map<CategoryId, MaterialId> keep_;
  std::map<CategoryId, MaterialId> merge_;
  std::set<CategoryId> drop_;
  std::array<std::optional<MaterialId>, 256> lut_{};
};

// Registry used by the synthetic scene renderer. The shipped
// configs/taxonomy.cfg mirrors this text.
inline constexpr std::string_view kDefaultTaxonomyText = R"(# Default vehicular-scene category registry and EM taxonomy.
category.0 = road
category.1 = sidewalk
category.2 = shadow
category.3 = building
category.4 = vegetation
category.5 = car
category.6 = truck
category.7 = bus
category.8 = motorcycle
category.9 = lamppost
category.10 = pedestrian
category.11 = sky
category.12 = pole
category.13 = traffic_sign
category.14 = rider

keep.building = CEMENT
keep.vegetation = WOOD

merge.road = ASPHALT
merge.sidewalk = ASPHALT
merge.shadow = ASPHALT
merge.car = METAL
merge.truck = METAL
merge.bus = METAL
merge.motorcycle = METAL

drop = lamppost, pedestrian, sky, pole, traffic_sign, rider
)";

inline const Taxonomy& default_taxonomy() {
  static const Taxonomy tax = Taxonomy::parse(KvConfig::parse(kDefaultTaxonomyText, "<default taxonomy>"));
  return tax;
}

// Category ids of the default registry, used by the scene renderer.
namespace category {
inline constexpr CategoryId kRoad = 0;
inline constexpr CategoryId kSidewalk = 1;
inline constexpr CategoryId kShadow = 2;
inline constexpr CategoryId kBuilding = 3;
inline constexpr CategoryId kVegetation = 4;
inline constexpr CategoryId kCar = 5;
inline constexpr CategoryId kTruck = 6;
inline constexpr CategoryId kBus = 7;
inline constexpr CategoryId kMotorcycle = 8;
inline constexpr CategoryId kLamppost = 9;
inline constexpr CategoryId kPedestrian = 10;
}  // namespace category

inline MaterialMap extract_pes(const LabelMap& map, const Taxonomy& tax) {
  Grid<MaterialId> out(map.height(), map.width(), MaterialId::NONE);
  const auto src = map.labels.cells();
  auto dst = out.cells();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto m = tax.material_of(src[i]);
    if (!m) throw TaxonomyError("category " + std::to_string(src[i]) + " is not covered by the taxonomy");
    dst[i] = *m;
  }
  return MaterialMap{std::move(out)};
}

// Percentage reduction in category count, (1 - C_p/C_o)·100.
inline double ecr3(std::size_t original_categories, std::size_t pes_categories) {
  if (original_categories == 0) throw DomainError("ecr3: original category count is zero");
  if (pes_categories > original_categories) throw DomainError("ecr3: PES category count exceeds original");
  return (1.0 - static_cast<double>(pes_categories) / static_cast<double>(original_categories)) * 100.0;
}

inline std::size_t distinct_categories(const LabelMap& map) {
  std::array<bool, 256> seen{};
  for (auto c : map.labels.cells()) seen[c] = true;
  return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true));
}

inline std::size_t distinct_materials(const MaterialMap& map) {
  std::array<bool, 5> seen{};
  for (auto m : map.materials.cells()) seen[material_index(m)] = true;
  seen[material_index(MaterialId::NONE)] = false;
  return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true));
}

inline LabelMap binary_mask(const MaterialMap& map, MaterialId target) {
  Grid<CategoryId> out(map.height(), map.width(), 0);
  const auto src = map.materials.cells();
  auto dst = out.cells();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == target ? 255 : 0;
  return LabelMap{std::move(out)};
}

// ---- PGM (P5, 8-bit) I/O -------------------------------------------------

namespace detail {

class PgmReader {
 public:
  explicit PgmReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* field) {
    skip_space_and_comments();
    const auto start = pos_;
    std::size_t v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (v > (1u << 30)) throw ParseError(std::string("PGM ") + field + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("PGM header: expected ") + field, pos_);
    return v;
  }

  std::size_t pos_ = 0;
  std::string_view bytes_;
};

}  // namespace detail

// Parses a binary P5 PGM with maxval <= 255. No registry check.
inline LabelMap parse_pgm(std::string_view bytes) {
  detail::PgmReader r(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw ParseError("PGM header: missing P5 magic", 0);
  r.pos_ = 2;
  const auto width = r.read_uint("width");
  const auto height = r.read_uint("height");
  const auto maxval = r.read_uint("maxval");
  if (width == 0 || height == 0) throw ParseError("PGM header: zero dimension", r.pos_);
  if (maxval == 0 || maxval > 255) throw ParseError("PGM header: maxval must be in 1..255", r.pos_);
  if (r.pos_ >= bytes.size()) throw ParseError("PGM header: truncated before pixel data", r.pos_);
  ++r.pos_;  // single whitespace after maxval
  const std::size_t n = width * height;
  if (bytes.size() - r.pos_ < n) throw ParseError("PGM pixel data truncated", bytes.size());
  std::vector<CategoryId> cells(n);
  for (std::size_t i = 0; i < n; ++i) cells[i] = static_cast<CategoryId>(bytes[r.pos_ + i]);
  return LabelMap{Grid<CategoryId>(height, width, std::move(cells))};
}

inline void validate_categories(const LabelMap& map, const CategoryRegistry& registry) {
  std::array<bool, 256> seen{};
  for (auto c : map.labels.cells()) seen[c] = true;
  for (int c = 0; c < 256; ++c) {
    if (seen[c] && !registry.contains(static_cast<CategoryId>(c))) throw UnknownCategoryError(c);
  }
}

inline LabelMap load_label_map(const std::filesystem::path& path, const CategoryRegistry& registry) {
  auto map = parse_pgm(read_text_file(path));
  validate_categories(map, registry);
  return map;
}

inline std::string encode_pgm(const LabelMap& map) {
  std::string out = "P5\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n255\n";
  const auto cells = map.labels.cells();
  out.append(reinterpret_cast<const char*>(cells.data()), cells.size());
  return out;
}

inline void save_label_map(const std::filesystem::path& path, const LabelMap& map) {
  write_text_file(path, encode_pgm(map));
}

}  // namespace wekbp
