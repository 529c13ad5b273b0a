// wekbp: scene generation, WEK construction, training, evaluation and
// reporting over a work directory.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "wekbp/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> count;
  std::optional<std::size_t> block;
  std::optional<double> alpha;
  std::optional<std::size_t> k;
  std::string out;
};

wekbp::RunConfig resolve(const Options& o) {
  auto cfg = o.config.empty() ? wekbp::RunConfig::from_kv(wekbp::KvConfig{}) : wekbp::RunConfig::load(o.config);
  cfg.apply_env();
  if (o.seed) cfg.seed = *o.seed;
  if (o.count) cfg.gen.count = *o.count;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.k) cfg.eval_k = *o.k;
  if (o.block) cfg.blocks = {*o.block};
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WEK-based mmWave beam prediction pipeline"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "top-level seed");
  };
  auto* gen = app.add_subcommand("gen-scenes", "generate synthetic scenes, label maps and beam labels");
  add_common(gen);
  gen->add_option("--count", o.count, "number of samples");

  auto* wek = app.add_subcommand("build-wek", "build WEK matrices from the label maps");
  add_common(wek);
  wek->add_option("--block-size", o.block, "block size B (default: every configured B)");

  auto* train = app.add_subcommand("train", "train a beam predictor per block size");
  add_common(train);
  train->add_option("--block-size", o.block, "block size B (default: every configured B)");

  auto* eval = app.add_subcommand("eval", "evaluate Top-K accuracy on the test split");
  add_common(eval);
  eval->add_option("--block-size", o.block, "block size B (default: every configured B)");
  eval->add_option("--k", o.k, "largest K reported");
  eval->add_option("--alpha", o.alpha, "PCEI stability penalty");

  auto* report = app.add_subcommand("report", "merge run artifacts into a report CSV");
  add_common(report);
  report->add_option("--alpha", o.alpha, "PCEI stability penalty");
  report->add_option("--out", o.out, "report path (default: <workdir>/report.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(o);
    if (gen->parsed()) {
      wekbp::cmd_gen_scenes(cfg, std::cout);
    } else if (wek->parsed()) {
      for (auto b : cfg.blocks) wekbp::cmd_build_wek(cfg, b, std::cout);
    } else if (train->parsed()) {
      for (auto b : cfg.blocks) wekbp::cmd_train(cfg, b, std::cout);
    } else if (eval->parsed()) {
      for (auto b : cfg.blocks) wekbp::cmd_eval(cfg, b, std::cout);
    } else if (report->parsed()) {
      wekbp::cmd_report(cfg, o.out.empty() ? cfg.workdir / "report.csv" : std::filesystem::path(o.out), std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return wekbp::exit_code_for(e);
  }
  return 0;
}
