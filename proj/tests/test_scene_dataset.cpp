#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "wekbp/dataset.hpp"

using namespace wekbp;

namespace {

Scene empty_scene() {
  Scene s;
  s.anchor = make_geo(33.4209, -111.9286);
  s.rsu = {48.0, 4.0};
  s.rx = {60.0, 20.0};
  return s;
}

const TraceConfig kTrace{};

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("wekbp_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(TracePaths, EmptySceneHasFriisLos) {
  const auto s = empty_scene();
  const auto ch = trace_paths(s, kTrace);
  ASSERT_EQ(ch.paths.size(), 1u);
  const double d = norm(s.rx - s.rsu);
  const double lambda = kTrace.array.wavelength();
  EXPECT_TRUE(ch.paths[0].los);
  EXPECT_NEAR(ch.paths[0].gain, lambda / (4 * std::numbers::pi * d), 1e-18);
  EXPECT_NEAR(ch.paths[0].az_rad, std::atan2(12.0, 16.0), 1e-15);
  EXPECT_FALSE(ch.los_blocked);
}

TEST(TracePaths, ParallelWallAddsImageSourcePath) {
  auto s = empty_scene();
  s.rsu = {20.0, 10.0};
  s.rx = {70.0, 10.0};
  s.buildings.push_back({{10.0, 30.0, 80.0, 40.0}, category::kBuilding, MaterialId::CEMENT});
  const auto ch = trace_paths(s, kTrace);
  ASSERT_EQ(ch.paths.size(), 2u);
  const auto& refl = ch.paths[1];
  EXPECT_FALSE(refl.los);
  EXPECT_EQ(refl.bounce_material, MaterialId::CEMENT);
  const Vec2 image{20.0, 50.0};  // mirror of the RSU in y = 30
  EXPECT_NEAR(refl.length_m, norm(s.rx - image), 1e-12);
  const double inc = std::atan2(25.0, 20.0);  // from the wall normal
  const double r = std::abs(reflection_coeff(1.8, inc, Polarization::HORIZONTAL));
  EXPECT_NEAR(refl.gain, kTrace.array.wavelength() / (4 * std::numbers::pi * refl.length_m) * r, 1e-18);
}

TEST(TracePaths, WallBetweenTxAndRxIsNlos) {
  auto s = empty_scene();
  s.rsu = {50.0, 4.0};
  s.rx = {50.0, 20.0};
  s.buildings.push_back({{40.0, 10.0, 60.0, 11.0}, category::kBuilding, MaterialId::CEMENT});
  const auto ch = trace_paths(s, kTrace);
  EXPECT_TRUE(ch.los_blocked);
  for (const auto& p : ch.paths) EXPECT_FALSE(p.los);
  EXPECT_TRUE(detail::crosses(s.rsu, s.rx, s.buildings[0].box));
}

TEST(TracePaths, VegetationAttenuatesLos) {
  auto s = empty_scene();
  s.vegetation.push_back({{52.0, 8.0, 56.0, 14.0}, category::kVegetation, MaterialId::WOOD});
  ASSERT_TRUE(detail::crosses(s.rsu, s.rx, s.vegetation[0].box));
  const auto free = trace_paths(empty_scene(), kTrace);
  const auto ch = trace_paths(s, kTrace);
  ASSERT_EQ(ch.paths.size(), 1u);
  EXPECT_NEAR(ch.paths[0].gain / free.paths[0].gain, std::pow(10.0, -10.0 / 20.0), 1e-12);
}

TEST(TracePaths, RxInsideBuildingIsInvalid) {
  auto s = empty_scene();
  s.buildings.push_back({{55.0, 15.0, 65.0, 25.0}, category::kBuilding, MaterialId::CEMENT});
  EXPECT_THROW(trace_paths(s, kTrace), InvalidSceneError);
}

TEST(TracePaths, DopplerFromReceiverVelocity) {
  auto s = empty_scene();
  s.rx = {48.0, 20.0};
  s.rx_velocity = {0.0, 10.0};  // moving straight away from the RSU
  const auto ch = trace_paths(s, kTrace);
  EXPECT_NEAR(ch.paths[0].doppler_hz, -10.0 / kTrace.array.wavelength(), 1e-9);
}

TEST(Render, EmptySceneIsGround) {
  const auto map = render_label_map(empty_scene());
  for (auto c : map.labels.cells()) ASSERT_EQ(c, category::kRoad);
}

TEST(Render, VehicleAreaInPixels) {
  auto s = empty_scene();
  s.vehicles.push_back({{30.0, 15.0, 34.0, 17.0}, category::kCar, MaterialId::METAL});
  const auto map = render_label_map(s);
  std::size_t n = 0;
  for (auto c : map.labels.cells()) n += c == category::kCar;
  EXPECT_EQ(n, 40u * 20u);
}

TEST(Render, MaterialFractionsMatchGeometry) {
  const GenConfig cfg;
  for (std::uint64_t id = 0; id < 5; ++id) {
    const auto s = generate_scene(cfg, 13, id);
    const auto mats = extract_pes(render_label_map(s), default_taxonomy());
    std::size_t metal = 0;
    for (auto m : mats.materials.cells()) metal += m == MaterialId::METAL;
    // Visible vehicle area, with one pixel of slack per edge.
    double area = 0.0, perimeter = 0.0;
    for (const auto& v : s.vehicles) {
      const double w = v.box.x1 - v.box.x0, h = v.box.y1 - v.box.y0;
      area += w * h;
      perimeter += 2 * (w + h);
    }
    double clutter_overlap = 0.0;
    for (const auto& c : s.clutter) {
      for (const auto& v : s.vehicles) {
        const double ox = std::max(0.0, std::min(c.box.x1, v.box.x1) - std::max(c.box.x0, v.box.x0));
        const double oy = std::max(0.0, std::min(c.box.y1, v.box.y1) - std::max(c.box.y0, v.box.y0));
        clutter_overlap += ox * oy;
      }
    }
    const double px = s.pixel_scale * s.pixel_scale;
    EXPECT_NEAR(static_cast<double>(metal) * px, area - clutter_overlap, perimeter * s.pixel_scale + 1e-9) << id;
  }
}

TEST(PixelToGeo, AnchorAndEastShift) {
  auto s = empty_scene();
  const PixelCoord anchor{s.rsu.y / s.pixel_scale, s.rsu.x / s.pixel_scale};
  const auto g = pixel_to_geo(s, anchor);
  EXPECT_NEAR(g.lat, s.anchor.lat, 1e-12);
  EXPECT_NEAR(g.lon, s.anchor.lon, 1e-12);

  s.anchor = make_geo(0.0, 10.0);
  const auto east = pixel_to_geo(s, {anchor.row, anchor.col + 100});
  EXPECT_NEAR(east.lon - 10.0, 10.0 / kMetersPerDegree, 1e-15);
  EXPECT_NEAR(east.lon - 10.0, 10.0 / 111320.0, 2e-7);
  EXPECT_THROW(pixel_to_geo(s, {-1.0, 0.0}), DomainError);
  EXPECT_THROW(pixel_to_geo(s, {0.0, 960.0}), DomainError);
}

TEST(PixelToGeo, HaversineMatchesEuclidean) {
  const auto s = generate_scene(GenConfig{}, 1, 0);
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const PixelCoord a{rng.uniform(0, 539), rng.uniform(0, 959)};
    const PixelCoord b{rng.uniform(0, 539), rng.uniform(0, 959)};
    const double eu = std::hypot(a.row - b.row, a.col - b.col) * s.pixel_scale;
    if (eu < 1.0) continue;
    const double hv = haversine(pixel_to_geo(s, a), pixel_to_geo(s, b));
    ASSERT_NEAR(hv / eu, 1.0, 1e-3);
  }
}

TEST(GenerateScene, DeterministicAndValid) {
  const GenConfig cfg;
  for (std::uint64_t id = 0; id < 50; ++id) {
    const auto a = generate_scene(cfg, 21, id);
    const auto b = generate_scene(cfg, 21, id);
    ASSERT_EQ(a.rx, b.rx);
    ASSERT_EQ(a.vehicles.size(), b.vehicles.size());
    ASSERT_NO_THROW(a.validate());
    ASSERT_TRUE(a.rx_vehicle.has_value());
    for (const auto& bld : a.buildings) ASSERT_FALSE(bld.box.contains(a.rx));
  }
}

TEST(GenerateSample, StoredRatesAgreeWithRecomputation) {
  const GenConfig cfg;
  const auto cb = codebook_gen(cfg.trace.array);
  for (std::uint64_t id = 0; id < 40; ++id) {
    const auto s = generate_sample(cfg, cb, 3, id);
    const int again = optimal_beam(s.channel, cfg.trace.array, cb, db_to_linear(cfg.snr_db), 1.0);
    ASSERT_EQ(s.record.beam_label, again);
    ASSERT_EQ(s.record.beam_label, argmax(s.record.rates));
    for (double r : s.record.rates) ASSERT_GE(r, 0.0);
    ASSERT_GE(s.record.beam_label, 0);
    ASSERT_LT(s.record.beam_label, cfg.trace.array.n_beams);
    if (s.channel.los_blocked) {
      bool crossed = false;
      for (const auto& b : s.scene.buildings) crossed |= detail::crosses(s.scene.rsu, s.scene.rx, b.box);
      ASSERT_TRUE(crossed);
    }
  }
}

TEST(GenerateDataset, EmptyCountWritesHeaderOnly) {
  GenConfig cfg;
  cfg.count = 0;
  const auto dir = temp_dir("ds_empty");
  const auto recs = generate_dataset(cfg, 1, dir);
  EXPECT_TRUE(recs.empty());
  EXPECT_EQ(read_text_file(dir / "manifest.csv"), std::string(kManifestHeader) + "\n");
  EXPECT_TRUE(load_manifest(dir / "manifest.csv").empty());
}

TEST(GenerateDataset, SameSeedSameBytes) {
  GenConfig cfg;
  cfg.count = 6;
  const auto a = temp_dir("ds_a"), b = temp_dir("ds_b");
  generate_dataset(cfg, 77, a);
  generate_dataset(cfg, 77, b);
  EXPECT_EQ(read_text_file(a / "manifest.csv"), read_text_file(b / "manifest.csv"));
  EXPECT_EQ(read_text_file(a / "rates.csv"), read_text_file(b / "rates.csv"));
  for (std::uint64_t id = 0; id < 6; ++id) {
    EXPECT_EQ(read_text_file(a / labelmap_filename(id)), read_text_file(b / labelmap_filename(id)));
  }
  const auto loaded = load_manifest(a / "manifest.csv");
  ASSERT_EQ(loaded.size(), 6u);
  EXPECT_EQ(loaded[2].rates.size(), 64u);
  EXPECT_EQ(loaded[2].beam_label, argmax(loaded[2].rates));
}

TEST(GenerateDataset, MissingManifest) {
  EXPECT_THROW(load_manifest(temp_dir("ds_missing") / "manifest.csv"), MissingArtifactError);
}

TEST(GenerateDataset, LabelDiversity) {
  const GenConfig cfg;
  const auto cb = codebook_gen(cfg.trace.array);
  std::set<int> labels;
  for (std::uint64_t id = 0; id < 1000; ++id) {
    const auto scene = generate_scene(cfg, 5, id);
    labels.insert(optimal_beam(trace_paths(scene, cfg.trace), cfg.trace.array, cb, db_to_linear(cfg.snr_db), 1.0));
  }
  EXPECT_GT(labels.size(), 10u);
}

TEST(GenConfig, ParsesKeysAndRejectsBadValues) {
  const auto g = GenConfig::from_config(KvConfig::parse("count = 12\nmode = los_only\nn_t = 8\nn_beams = 32\n"));
  EXPECT_EQ(g.count, 12u);
  EXPECT_EQ(g.mode, SceneMode::LOS_ONLY);
  EXPECT_EQ(g.trace.array.n_t, 8);
  EXPECT_EQ(g.trace.array.n_beams, 32);
  EXPECT_THROW(GenConfig::from_config(KvConfig::parse("mode = sideways\n")), ConfigError);
  EXPECT_THROW(GenConfig::from_config(KvConfig::parse("image_width = 100\n")), ConfigError);
  EXPECT_THROW(GenConfig::from_config(KvConfig::parse("speed_min = 5\nspeed_max = 1\n")), ConfigError);
}
