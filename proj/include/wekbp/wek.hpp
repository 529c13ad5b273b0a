#pragma once

// Material- and location-aware wireless environment knowledge (WEK):
// block partition of a material map, permittivity-weighted block values,
// Tx-Rx distance, and Fresnel reflection coefficients used by the channel
// simulator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "wekbp/csv.hpp"
#include "wekbp/error.hpp"
#include "wekbp/geo.hpp"
#include "wekbp/grid.hpp"
#include "wekbp/kv_config.hpp"
#include "wekbp/rng.hpp"
#include "wekbp/taxonomy.hpp"

namespace wekbp {

class PermittivityTable {
 public:
  // Upper bound of the U(0, other_max) draw for pixels of unknown material.
  static constexpr double kOtherMax = 0.1;

  // Point values picked inside the reference ranges: cement 1.5-2.1,
  // chrome 7.7-8.0, dry wood 2-6, asphalt 2.6.
  PermittivityTable() : eps_{1.8, 7.85, 4.0, 2.6} {}

  PermittivityTable(double cement, double metal, double wood, double asphalt) : eps_{cement, metal, wood, asphalt} {
    for (auto m : kKnownMaterials) {
      if (!(eps_[material_index(m)] > 1.0)) {
        throw ConfigError("relative permittivity of " + std::string(material_name(m)) + " must exceed 1");
      }
    }
  }

  double eps(MaterialId m) const {
    if (m == MaterialId::NONE) throw DomainError("NONE has no permittivity");
    return eps_[material_index(m)];
  }
  double min_eps() const { return std::min(std::min(eps_[0], eps_[1]), std::min(eps_[2], eps_[3])); }
  double max_eps() const { return std::max(std::max(eps_[0], eps_[1]), std::max(eps_[2], eps_[3])); }

  // Schema: one `<MATERIAL> = <eps_r>` line per known material; missing
  // materials keep their default.
  static PermittivityTable parse(const KvConfig& cfg) {
    const PermittivityTable def;
    for (const auto& [key, value] : cfg.entries()) {
      const auto m = parse_material(key);
      if (m == MaterialId::NONE) throw ConfigError("NONE cannot be given a permittivity");
      (void)value;
    }
    return PermittivityTable(cfg.get_double("CEMENT", def.eps_[0]), cfg.get_double("METAL", def.eps_[1]),
                             cfg.get_double("WOOD", def.eps_[2]), cfg.get_double("ASPHALT", def.eps_[3]));
  }
  static PermittivityTable load(const std::filesystem::path& path) { return parse(KvConfig::load(path)); }

 private:
  std::array<double, 4> eps_;
};

struct BlockGrid {
  std::size_t block = 0;
  std::size_t ny = 0;
  std::size_t nx = 0;
  friend bool operator==(const BlockGrid&, const BlockGrid&) = default;
};

// Floor division: trailing partial rows/columns are discarded.
inline BlockGrid partition(std::size_t height, std::size_t width, std::size_t block) {
  if (block == 0) throw DomainError("block size must be positive");
  if (block > std::min(height, width)) {
    throw DomainError("block size " + std::to_string(block) + " exceeds image " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  return {block, height / block, width / block};
}

struct BlockCounts {
  std::array<std::size_t, 4> known{};  // indexed by material_index
  std::size_t other = 0;               // NONE pixels

  std::size_t total() const { return known[0] + known[1] + known[2] + known[3] + other; }
  std::size_t count(MaterialId m) const { return m == MaterialId::NONE ? other : known[material_index(m)]; }
};

inline BlockCounts block_counts(const MaterialMap& map, const BlockGrid& grid, std::size_t i, std::size_t j) {
  if (i >= grid.ny || j >= grid.nx) {
    throw DomainError("block index (" + std::to_string(i) + "," + std::to_string(j) + ") outside " +
                      std::to_string(grid.ny) + "x" + std::to_string(grid.nx));
  }
  BlockCounts c;
  const std::size_t b = grid.block;
  for (std::size_t r = i * b; r < (i + 1) * b; ++r) {
    const auto row = map.materials.row(r);
    for (std::size_t col = j * b; col < (j + 1) * b; ++col) {
      const auto m = row[col];
      if (m == MaterialId::NONE) {
        ++c.other;
      } else {
        ++c.known[material_index(m)];
      }
    }
  }
  return c;
}

// V = Σ_k (C_k/total)·ε_k + (C_other/total)·r
inline double block_value(const BlockCounts& counts, std::size_t total, const PermittivityTable& eps, double r) {
  if (total == 0) throw DomainError("block_value: empty block");
  if (counts.total() != total) throw DomainError("block_value: counts do not sum to the block size");
  const double t = static_cast<double>(total);
  double v = 0.0;
  for (auto m : kKnownMaterials) v += static_cast<double>(counts.known[material_index(m)]) / t * eps.eps(m);
  v += static_cast<double>(counts.other) / t * r;
  return v;
}

// The per-block U(0, 0.1) draw, keyed by (seed, i, j).
inline double block_draw(std::uint64_t seed, std::size_t i, std::size_t j) {
  return PermittivityTable::kOtherMax * to_unit(splitmix64(derive_key(seed, "wek-block", i, j)));
}

struct WekMatrix {
  Grid<double> values;  // ny × nx
  double distance_m = 0.0;
  std::size_t block = 0;
  std::size_t source_height = 0;
  std::size_t source_width = 0;
  std::uint64_t seed = 0;

  std::size_t ny() const noexcept { return values.height(); }
  std::size_t nx() const noexcept { return values.width(); }
  friend bool operator==(const WekMatrix&, const WekMatrix&) = default;
};

inline WekMatrix build_wek(const MaterialMap& map, std::size_t block, const PermittivityTable& eps,
                           const GeoCoord& tx, const GeoCoord& rx, std::uint64_t seed) {
  const auto grid = partition(map.height(), map.width(), block);
  WekMatrix w;
  w.values = Grid<double>(grid.ny, grid.nx, 0.0);
  const std::size_t total = block * block;
  for (std::size_t i = 0; i < grid.ny; ++i) {
    for (std::size_t j = 0; j < grid.nx; ++j) {
      const auto counts = block_counts(map, grid, i, j);
      w.values(i, j) = block_value(counts, total, eps, block_draw(seed, i, j));
    }
  }
  w.distance_m = haversine(tx, rx);
  w.block = block;
  w.source_height = map.height();
  w.source_width = map.width();
  w.seed = seed;
  return w;
}

// Percentage of pixels removed by the block representation.
inline double eir3(std::size_t height, std::size_t width, const BlockGrid& grid) {
  if (height == 0 || width == 0) throw DomainError("eir3: empty image");
  return (1.0 - static_cast<double>(grid.ny * grid.nx) / static_cast<double>(height * width)) * 100.0;
}

// ---- Reflection coefficients -------------------------------------------

enum class Polarization { HORIZONTAL, VERTICAL };
enum class FresnelFormula { STANDARD_FRESNEL, AS_PRINTED };

struct ReflectionQuery {
  MaterialId material = MaterialId::ASPHALT;
  double theta_zod = 0.0;  // incidence angle from the surface normal, radians
  Polarization polarization = Polarization::HORIZONTAL;
  FresnelFormula formula = FresnelFormula::STANDARD_FRESNEL;
};

// STANDARD_FRESNEL: HORIZONTAL is the perpendicular (TE) coefficient,
// VERTICAL the parallel (TM) one. AS_PRINTED evaluates the 38.901-style
// expressions exactly as typeset: a sum for HORIZONTAL and an inverted
// ratio for VERTICAL.
inline double reflection_coeff(double eps_r, double theta, Polarization pol,
                               FresnelFormula formula = FresnelFormula::STANDARD_FRESNEL) {
  if (!(theta >= 0.0 && theta < std::numbers::pi / 2.0)) {
    throw DomainError("incidence angle must lie in [0, pi/2): " + std::to_string(theta));
  }
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double root = std::sqrt(eps_r - s * s);
  if (formula == FresnelFormula::STANDARD_FRESNEL) {
    if (pol == Polarization::HORIZONTAL) return (c - root) / (c + root);
    return (eps_r * c - root) / (eps_r * c + root);
  }
  if (pol == Polarization::HORIZONTAL) return eps_r * c + root;
  return (c + root) / (c - root);
}

inline double reflection_coeff(const ReflectionQuery& q, const PermittivityTable& eps) {
  return reflection_coeff(eps.eps(q.material), q.theta_zod, q.polarization, q.formula);
}

// ---- WEK CSV ---------------------------------------------------------------
// Line 1: `ny,nx,B,H,W,distance_m,seed`; line 2: those values; then ny rows
// of nx values, all doubles in shortest round-trip form.

inline std::string encode_wek_csv(const WekMatrix& w) {
  std::string out = "ny,nx,B,H,W,distance_m,seed\n";
  out += std::to_string(w.ny()) + "," + std::to_string(w.nx()) + "," + std::to_string(w.block) + "," +
         std::to_string(w.source_height) + "," + std::to_string(w.source_width) + "," +
         format_double(w.distance_m) + "," + std::to_string(w.seed) + "\n";
  for (std::size_t i = 0; i < w.ny(); ++i) {
    for (std::size_t j = 0; j < w.nx(); ++j) {
      if (j) out += ',';
      out += format_double(w.values(i, j));
    }
    out += '\n';
  }
  return out;
}

inline WekMatrix decode_wek_csv(std::string_view text, const std::string& origin = "<wek>") {
  const auto lines = split(text, '\n');
  auto bad = [&](const std::string& why) { return DatasetError(origin + ": " + why); };
  if (lines.size() < 2 || trim(lines[0]) != "ny,nx,B,H,W,distance_m,seed") throw bad("missing WEK header");
  const auto meta = split(trim(lines[1]), ',');
  if (meta.size() != 7) throw bad("malformed WEK metadata line");
  WekMatrix w;
  try {
    const auto ny = static_cast<std::size_t>(parse_int(meta[0], "ny"));
    const auto nx = static_cast<std::size_t>(parse_int(meta[1], "nx"));
    w.block = static_cast<std::size_t>(parse_int(meta[2], "B"));
    w.source_height = static_cast<std::size_t>(parse_int(meta[3], "H"));
    w.source_width = static_cast<std::size_t>(parse_int(meta[4], "W"));
    w.distance_m = parse_double(meta[5], "distance_m");
    w.seed = static_cast<std::uint64_t>(std::stoull(std::string(trim(meta[6]))));
    if (lines.size() < 2 + ny) throw bad("expected " + std::to_string(ny) + " value rows");
    w.values = Grid<double>(ny, nx, 0.0);
    for (std::size_t i = 0; i < ny; ++i) {
      const auto cells = split(trim(lines[2 + i]), ',');
      if (cells.size() != nx) throw bad("row " + std::to_string(i) + " has " + std::to_string(cells.size()) + " values");
      for (std::size_t j = 0; j < nx; ++j) w.values(i, j) = parse_double(cells[j], "WEK value");
    }
  } catch (const ConfigError& e) {
    throw bad(e.what());
  } catch (const std::logic_error& e) {
    throw bad(std::string("bad seed field: ") + e.what());
  }
  return w;
}

inline void save_wek(const std::filesystem::path& path, const WekMatrix& w) { write_text_file(path, encode_wek_csv(w)); }
inline WekMatrix load_wek(const std::filesystem::path& path) {
  return decode_wek_csv(read_text_file(path), path.string());
}

}  // namespace wekbp
