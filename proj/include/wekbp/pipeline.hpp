#pragma once

// End-to-end commands over a work directory:
//
//   <workdir>/dataset/manifest.csv, rates.csv, labelmaps/*.pgm
//   <workdir>/wek/B<B>/wek_<id>.csv
//   <workdir>/runs/B<B>/model.bin, loss_curve.csv, train_timing.csv,
//                       train_summary.cfg, eval.csv, test_timing.csv
//   <workdir>/report.csv (or --out)

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wekbp/csv.hpp"
#include "wekbp/dataset.hpp"
#include "wekbp/error.hpp"
#include "wekbp/kv_config.hpp"
#include "wekbp/metrics.hpp"
#include "wekbp/nn/train.hpp"
#include "wekbp/taxonomy.hpp"
#include "wekbp/wek.hpp"

namespace wekbp {

inline constexpr const char* kWorkdirEnv = "WEKBP_WORKDIR";

inline std::vector<std::size_t> parse_size_list(std::string_view text, std::string_view what) {
  std::vector<std::size_t> out;
  for (const auto& item : split(text, ',')) {
    const auto t = trim(item);
    if (t.empty()) continue;
    const auto v = parse_int(t, what);
    if (v < 0) throw ConfigError(std::string(what) + ": negative value");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

inline KvConfig section(const KvConfig& kv, std::string_view prefix) {
  KvConfig out;
  for (auto& [k, v] : kv.with_prefix(prefix)) out.set(k, v);
  return out;
}

// Keys: workdir, seed, taxonomy, permittivity, blocks, alpha, sigma_mode
// (cv|std), eval.repeats, eval.k, gen.* (see GenConfig::from_config),
// net.{conv, fc, head, attn_hidden, dist_hidden, kernel, dropout,
// coord_channels}, train.{batch_size, learning_rate, epochs}.
struct RunConfig {
  std::filesystem::path workdir = "work";
  std::optional<std::filesystem::path> taxonomy_path;
  std::optional<std::filesystem::path> permittivity_path;
  std::uint64_t seed = 0;
  GenConfig gen;
  std::vector<std::size_t> blocks{20, 30, 40, 50};
  nn::BeamNetConfig net;
  nn::TrainConfig train;
  double alpha = 0.5;
  SigmaMode sigma_mode = SigmaMode::CV;
  std::size_t eval_repeats = 3;
  std::size_t eval_k = 5;

  static RunConfig from_kv(const KvConfig& kv, const std::filesystem::path& base_dir = {}) {
    RunConfig c;
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    c.workdir = kv.get_string("workdir", c.workdir.string());
    if (auto t = kv.find("taxonomy")) c.taxonomy_path = resolve(*t);
    if (auto p = kv.find("permittivity")) c.permittivity_path = resolve(*p);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    c.gen = GenConfig::from_config(section(kv, "gen."));
    if (auto b = kv.find("blocks")) c.blocks = parse_size_list(*b, "blocks");
    c.alpha = kv.get_double("alpha", c.alpha);
    const auto mode = kv.get_string("sigma_mode", "cv");
    if (mode == "cv") {
      c.sigma_mode = SigmaMode::CV;
    } else if (mode == "std") {
      c.sigma_mode = SigmaMode::STD;
    } else {
      throw ConfigError("sigma_mode must be 'cv' or 'std'");
    }
    c.eval_repeats = static_cast<std::size_t>(kv.get_int("eval.repeats", 3));
    c.eval_k = static_cast<std::size_t>(kv.get_int("eval.k", 5));

    const auto n = section(kv, "net.");
    if (auto v = n.find("conv")) c.net.conv_channels = parse_size_list(*v, "net.conv");
    if (auto v = n.find("fc")) c.net.fc_widths = parse_size_list(*v, "net.fc");
    if (auto v = n.find("head")) c.net.head_widths = parse_size_list(*v, "net.head");
    c.net.attn_hidden = static_cast<std::size_t>(n.get_int("attn_hidden", 64));
    c.net.dist_hidden = static_cast<std::size_t>(n.get_int("dist_hidden", 16));
    c.net.kernel = static_cast<std::size_t>(n.get_int("kernel", 3));
    c.net.dropout = n.get_double("dropout", c.net.dropout);
    c.net.coord_channels = n.get_bool("coord_channels", true);
    c.net.n_beams = static_cast<std::size_t>(c.gen.trace.array.n_beams);

    const auto t = section(kv, "train.");
    c.train.batch_size = static_cast<std::size_t>(t.get_int("batch_size", 32));
    c.train.learning_rate = t.get_double("learning_rate", c.train.learning_rate);
    c.train.epochs = static_cast<std::size_t>(t.get_int("epochs", 30));
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    return from_kv(KvConfig::load(path), path.parent_path());
  }

  // WEKBP_WORKDIR overrides the configured work directory.
  void apply_env() {
    if (const char* w = std::getenv(kWorkdirEnv); w != nullptr && *w != '\0') workdir = w;
  }

  void validate() const {
    gen.validate();
    if (blocks.empty()) throw ConfigError("blocks must list at least one block size");
    const auto limit = std::min(gen.image_height, gen.image_width);
    for (auto b : blocks) {
      if (b == 0 || b > limit) {
        throw ConfigError("block size " + std::to_string(b) + " must lie in [1, " + std::to_string(limit) + "]");
      }
    }
    for (const auto* p : {&taxonomy_path, &permittivity_path}) {
      if (*p && !std::filesystem::exists(**p)) throw ConfigError("referenced file not found: " + (*p)->string());
    }
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
    if (eval_repeats < 1) throw ConfigError("eval.repeats must be at least 1");
    if (eval_k < 1 || eval_k > net.n_beams) throw ConfigError("k must lie in [1, n_beams]");
    train.validate();
    net.validate();
  }

  Taxonomy taxonomy() const { return taxonomy_path ? Taxonomy::load(*taxonomy_path) : default_taxonomy(); }
  PermittivityTable permittivity() const {
    return permittivity_path ? PermittivityTable::load(*permittivity_path) : PermittivityTable{};
  }

  std::filesystem::path dataset_dir() const { return workdir / "dataset"; }
  std::filesystem::path manifest_path() const { return dataset_dir() / "manifest.csv"; }
  std::filesystem::path wek_dir(std::size_t b) const { return workdir / "wek" / ("B" + std::to_string(b)); }
  std::filesystem::path run_dir(std::size_t b) const { return workdir / "runs" / ("B" + std::to_string(b)); }
};

inline std::string wek_filename(std::uint64_t sample_id) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "wek_%06llu.csv", static_cast<unsigned long long>(sample_id));
  return buf;
}

// 80/20 split keyed by (seed, sample id).
inline bool is_test_sample(std::uint64_t seed, std::uint64_t sample_id) {
  return to_unit(splitmix64(derive_key(seed, "split", sample_id))) >= 0.8;
}

inline std::uint64_t wek_seed(std::uint64_t seed, std::uint64_t sample_id) { return derive_key(seed, "wek", sample_id); }

inline WekMatrix sample_wek(const LabelMap& labels, const Taxonomy& tax, const PermittivityTable& eps, std::size_t block,
                            const DatasetRecord& rec, std::uint64_t seed) {
  return build_wek(extract_pes(labels, tax), block, eps, rec.tx_geo, rec.rx_geo, wek_seed(seed, rec.sample_id));
}

// ---- Commands -------------------------------------------------------------

inline std::vector<DatasetRecord> cmd_gen_scenes(const RunConfig& cfg, std::ostream& out) {
  cfg.gen.validate();
  const auto records = generate_dataset(cfg.gen, cfg.seed, cfg.dataset_dir());
  out << "manifest: " << cfg.manifest_path().string() << "\n";
  out << "samples: " << records.size() << "\n";
  if (!records.empty()) {
    std::map<int, std::size_t> hist;
    for (const auto& r : records) ++hist[r.beam_label];
    auto top = hist.begin();
    for (auto it = hist.begin(); it != hist.end(); ++it) {
      if (it->second > top->second) top = it;
    }
    out << "beam labels: " << hist.size() << " of " << cfg.gen.trace.array.n_beams << " beams used; most frequent "
        << top->first << " (" << top->second << " samples, "
        << format_fixed(100.0 * static_cast<double>(top->second) / static_cast<double>(records.size()), 1) << "%)\n";
  }
  return records;
}

inline void cmd_build_wek(const RunConfig& cfg, std::size_t block, std::ostream& out) {
  const auto tax = cfg.taxonomy();
  const auto eps = cfg.permittivity();
  const auto grid = partition(cfg.gen.image_height, cfg.gen.image_width, block);
  const auto records = load_manifest(cfg.manifest_path());
  const auto dir = cfg.wek_dir(block);
  std::filesystem::create_directories(dir);
  for (const auto& rec : records) {
    const auto path = cfg.dataset_dir() / rec.labelmap_path;
    if (!std::filesystem::exists(path)) throw MissingArtifactError("label map not found: " + path.string());
    const auto labels = load_label_map(path, tax.registry());
    if (labels.height() != cfg.gen.image_height || labels.width() != cfg.gen.image_width) {
      throw DatasetError(path.string() + ": label map size differs from the configured image size");
    }
    save_wek(dir / wek_filename(rec.sample_id), sample_wek(labels, tax, eps, block, rec, cfg.seed));
  }
  out << grid.ny << "x" << grid.nx << ", EIR3="
      << format_fixed(eir3(cfg.gen.image_height, cfg.gen.image_width, grid), 2) << "%\n";
}

struct SplitData {
  nn::WekDataset train;
  nn::WekDataset test;
};

inline SplitData load_split(const RunConfig& cfg, std::size_t block) {
  const auto records = load_manifest(cfg.manifest_path());
  const auto dir = cfg.wek_dir(block);
  SplitData s;
  for (const auto& rec : records) {
    const auto path = dir / wek_filename(rec.sample_id);
    if (!std::filesystem::exists(path)) throw MissingArtifactError("WEK file not found: " + path.string());
    (is_test_sample(cfg.seed, rec.sample_id) ? s.test : s.train).add(load_wek(path), rec.beam_label);
  }
  return s;
}

inline nn::TrainResult cmd_train(const RunConfig& cfg, std::size_t block, std::ostream& out) {
  const auto data = load_split(cfg, block);
  if (data.train.size() == 0) throw DatasetError("training split is empty");
  auto net_cfg = cfg.net;
  net_cfg.in_h = data.train.ny();
  net_cfg.in_w = data.train.nx();
  auto tc = cfg.train;
  tc.seed = cfg.seed;
  auto res = nn::train(data.train, net_cfg, tc);

  const auto dir = cfg.run_dir(block);
  res.net.save(dir / "model.bin");
  std::string loss = "epoch,loss\n", timing = "epoch,seconds\n";
  for (std::size_t e = 0; e < res.loss_curve.size(); ++e) {
    loss += std::to_string(e + 1) + "," + format_double(res.loss_curve[e]) + "\n";
    timing += std::to_string(e + 1) + "," + format_double(res.timing.samples_s[e]) + "\n";
  }
  write_text_file(dir / "loss_curve.csv", loss);
  write_text_file(dir / "train_timing.csv", timing);
  const double min_loss =
      res.loss_curve.empty() ? 0.0 : *std::min_element(res.loss_curve.begin(), res.loss_curve.end());
  const double top1 = res.topk_train.count(1) ? res.topk_train.at(1) : 0.0;
  write_text_file(dir / "train_summary.cfg",
                  "block = " + std::to_string(block) + "\nny = " + std::to_string(net_cfg.in_h) +
                      "\nnx = " + std::to_string(net_cfg.in_w) + "\nepochs = " + std::to_string(tc.epochs) +
                      "\ntrain_samples = " + std::to_string(data.train.size()) + "\nmin_loss = " +
                      format_double(min_loss) + "\ntop1_train = " + format_double(top1 / 100.0) + "\n");
  out << "B=" << block << ": trained on " << data.train.size() << " samples, " << tc.epochs
      << " epochs, min loss " << format_fixed(min_loss, 4) << ", train Top-1 " << format_fixed(top1, 2) << "%\n";
  return res;
}

inline nn::EvalResult cmd_eval(const RunConfig& cfg, std::size_t block, std::ostream& out) {
  const auto dir = cfg.run_dir(block);
  auto net = nn::BeamNet::load(dir / "model.bin");
  const auto data = load_split(cfg, block);
  if (data.test.size() == 0) throw DatasetError("test split is empty");
  if (data.test.ny() != net.config().in_h || data.test.nx() != net.config().in_w) {
    throw DatasetError("checkpoint input dims differ from the WEK files for B=" + std::to_string(block));
  }
  std::vector<std::size_t> ks(cfg.eval_k);
  std::iota(ks.begin(), ks.end(), 1);
  nn::EvalResult res;
  std::vector<double> times;
  for (std::size_t r = 0; r < cfg.eval_repeats; ++r) {
    Stopwatch sw;
    res = nn::evaluate(net, data.test, ks);
    times.push_back(sw.seconds());
  }
  std::string acc = "k,accuracy\n", timing = "run,seconds\n";
  for (auto k : ks) acc += std::to_string(k) + "," + format_double(res.topk.at(k) / 100.0) + "\n";
  for (std::size_t r = 0; r < times.size(); ++r) timing += std::to_string(r + 1) + "," + format_double(times[r]) + "\n";
  write_text_file(dir / "eval.csv", acc);
  write_text_file(dir / "test_timing.csv", timing);

  TimingRecord rec{TimingPhase::TEST, times, 0.0};
  rec.total_s = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
  const auto pc = pcei_report(res.topk.at(1) / 100.0, rec, cfg.alpha, cfg.sigma_mode);
  out << "B=" << block << ": " << data.test.size() << " test samples;";
  for (auto k : ks) out << " Top-" << k << " " << format_fixed(res.topk.at(k), 2) << "%";
  out << "; PCEI " << format_fixed(pc.score, 4) << "\n";
  return res;
}

namespace detail {
inline std::vector<std::vector<std::string>> require_rows(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw MissingArtifactError("missing artifact: " + p.string());
  return read_csv_rows(p);
}
}  // namespace detail

inline RunArtifacts load_run_artifacts(const RunConfig& cfg, std::size_t block) {
  const auto dir = cfg.run_dir(block);
  RunArtifacts run;
  run.config = "B" + std::to_string(block);

  const auto summary_path = dir / "train_summary.cfg";
  if (!std::filesystem::exists(summary_path)) throw MissingArtifactError("missing artifact: " + summary_path.string());
  const auto kv = KvConfig::load(summary_path);
  TrainSummary tr;
  tr.block = static_cast<std::size_t>(kv.get_int("block", static_cast<long long>(block)));
  tr.ny = static_cast<std::size_t>(kv.get_int("ny", 0));
  tr.nx = static_cast<std::size_t>(kv.get_int("nx", 0));
  tr.iters = static_cast<std::size_t>(kv.get_int("epochs", 0));
  tr.min_loss = kv.get_double("min_loss", 0.0);
  tr.top1_train = kv.get_double("top1_train", 0.0);
  tr.timing.phase = TimingPhase::TRAIN;
  const auto trows = detail::require_rows(dir / "train_timing.csv");
  for (std::size_t i = 1; i < trows.size(); ++i) tr.timing.samples_s.push_back(parse_double(trows[i].at(1), "seconds"));
  tr.timing.total_s = std::accumulate(tr.timing.samples_s.begin(), tr.timing.samples_s.end(), 0.0);
  run.train = tr;

  EvalSummary ev;
  const auto erows = detail::require_rows(dir / "eval.csv");
  for (std::size_t i = 1; i < erows.size(); ++i) ev.topk.push_back(parse_double(erows[i].at(1), "accuracy"));
  ev.timing.phase = TimingPhase::TEST;
  const auto xrows = detail::require_rows(dir / "test_timing.csv");
  for (std::size_t i = 1; i < xrows.size(); ++i) ev.timing.samples_s.push_back(parse_double(xrows[i].at(1), "seconds"));
  if (ev.timing.samples_s.empty()) throw MissingArtifactError("no test timings in " + (dir / "test_timing.csv").string());
  ev.timing.total_s = std::accumulate(ev.timing.samples_s.begin(), ev.timing.samples_s.end(), 0.0) /
                      static_cast<double>(ev.timing.samples_s.size());
  run.eval = ev;
  return run;
}

inline std::vector<ReportRow> cmd_report(const RunConfig& cfg, const std::filesystem::path& out_path,
                                         std::ostream& out) {
  std::vector<RunArtifacts> runs;
  for (auto b : cfg.blocks) runs.push_back(load_run_artifacts(cfg, b));
  const auto rows = build_report(runs, cfg.alpha, cfg.sigma_mode);
  write_text_file(out_path, encode_report(rows));
  out << "report: " << out_path.string() << " (" << rows.size() << " rows)\n";
  return rows;
}

// Exit codes: 0 success, 2 config, 3 I/O or malformed data, 4 taxonomy,
// 5 missing artifact, 1 anything else.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const MissingArtifactError*>(&e)) return 5;
  if (dynamic_cast<const TaxonomyError*>(&e) || dynamic_cast<const UnknownCategoryError*>(&e)) return 4;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const DatasetError*>(&e) || dynamic_cast<const std::filesystem::filesystem_error*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e)) {
    return 2;
  }
  return 1;
}

}  // namespace wekbp
