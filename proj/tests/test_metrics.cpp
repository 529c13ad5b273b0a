#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "wekbp/metrics.hpp"
#include "wekbp/rng.hpp"

using namespace wekbp;

namespace {

RunArtifacts fake_run(std::size_t block, double top1) {
  RunArtifacts r;
  r.config = "B" + std::to_string(block);
  TrainSummary t;
  t.block = block;
  t.ny = 540 / block;
  t.nx = 960 / block;
  t.iters = 3;
  t.min_loss = 2.5;
  t.top1_train = 0.4;
  t.timing = {TimingPhase::TRAIN, {1.0, 1.2, 0.9}, 3.1};
  r.train = t;
  EvalSummary e;
  e.topk = {top1, top1 + 0.1, top1 + 0.2, top1 + 0.25, top1 + 0.3};
  e.timing = {TimingPhase::TEST, {0.02, 0.03, 0.025}, 0.025};
  r.eval = e;
  return r;
}

}  // namespace

TEST(SigmaT, Examples) {
  const std::vector<double> flat{1, 1, 1, 1}, two{1, 3};
  EXPECT_EQ(sigma_t(flat, SigmaMode::STD), 0.0);
  EXPECT_EQ(sigma_t(flat, SigmaMode::CV), 0.0);
  EXPECT_DOUBLE_EQ(sigma_t(two, SigmaMode::STD), 1.0);
  EXPECT_DOUBLE_EQ(sigma_t(two, SigmaMode::CV), 0.5);
  EXPECT_THROW(sigma_t(std::vector<double>{}, SigmaMode::STD), DomainError);
  EXPECT_THROW(sigma_t(std::vector<double>{0.0, 0.0}, SigmaMode::CV), DomainError);
}

TEST(SigmaT, ScaleBehaviour) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> t(8), s(8);
    const double c = rng.uniform(0.1, 10.0);
    for (std::size_t i = 0; i < 8; ++i) {
      t[i] = rng.uniform(0.5, 2.0);
      s[i] = c * t[i];
    }
    ASSERT_NEAR(sigma_t(s, SigmaMode::STD), c * sigma_t(t, SigmaMode::STD), 1e-12);
    ASSERT_NEAR(sigma_t(s, SigmaMode::CV), sigma_t(t, SigmaMode::CV), 1e-12);
  }
}

TEST(Pcei, Examples) {
  EXPECT_NEAR(pcei(0.6368, 1.19, 0.5, 0.0), 0.8123, 5e-5);
  EXPECT_NEAR(pcei(0.6368, 1.19, 0.5, 0.0451), 0.7942, 5e-5);
  EXPECT_EQ(pcei(0.5, 2.0, 0.0, 0.0), pcei(0.5, 2.0, 0.0, 3.0));
  EXPECT_THROW(pcei(0.5, 0.0, 0.5, 0.0), DomainError);
  EXPECT_THROW(pcei(1.5, 1.0, 0.5, 0.0), DomainError);
  EXPECT_THROW(pcei(0.5, 1.0, -0.1, 0.0), DomainError);
  EXPECT_THROW(pcei(0.5, 1.0, 0.5, -0.1), DomainError);
}

TEST(Pcei, MonotoneAndLinear) {
  double prev = pcei(0.7, 0.1, 0.5, 0.1);
  for (double t = 0.2; t < 100.0; t *= 1.5) {
    const double s = pcei(0.7, t, 0.5, 0.1);
    ASSERT_LT(s, prev);
    prev = s;
  }
  prev = pcei(0.7, 2.0, 0.5, 0.0);
  for (double sg = 0.05; sg < 5.0; sg += 0.05) {
    const double s = pcei(0.7, 2.0, 0.5, sg);
    ASSERT_LT(s, prev);
    prev = s;
  }
  for (double p = 0.0; p <= 0.5; p += 0.05) ASSERT_NEAR(pcei(2 * p, 3.0, 0.5, 0.2), 2 * pcei(p, 3.0, 0.5, 0.2), 1e-15);
}

TEST(Pcei, ReportMatchesFormula) {
  const TimingRecord t{TimingPhase::TRAIN, {1.0, 3.0}, 4.0};
  const auto r = pcei_report(0.6, t, 0.5, SigmaMode::CV);
  EXPECT_DOUBLE_EQ(r.sigma_t, 0.5);
  EXPECT_NEAR(r.score, 0.6 / std::log(5.0) * std::exp(-0.25), 1e-12);
}

TEST(Report, SingleRowRoundTrip) {
  const auto rows = build_report({fake_run(50, 0.3)}, 0.5);
  ASSERT_EQ(rows.size(), 1u);
  const auto text = encode_report(rows);
  EXPECT_EQ(text.rfind(std::string(kReportVersionLine) + "\n" + std::string(kReportHeader) + "\n", 0), 0u);
  const auto path = std::filesystem::temp_directory_path() / "wekbp_report_test.csv";
  write_text_file(path, text);
  const auto back = decode_report(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].block, 50u);
  EXPECT_EQ(back[0].ny, 10u);
}

TEST(Report, RowsSortedByBlockAndSelfConsistent) {
  const auto rows = build_report({fake_run(40, 0.2), fake_run(20, 0.5), fake_run(50, 0.1), fake_run(30, 0.3)}, 0.5);
  ASSERT_EQ(rows.size(), 4u);
  const auto path = std::filesystem::temp_directory_path() / "wekbp_report_four.csv";
  write_text_file(path, encode_report(rows));
  const auto back = decode_report(path);
  std::size_t prev = 0;
  for (const auto& r : back) {
    EXPECT_GT(r.block, prev);
    prev = r.block;
    EXPECT_NEAR(pcei(r.top1_train, r.train_s, r.alpha, r.sigma_train), r.pcei_train, 1e-9);
    EXPECT_NEAR(pcei(r.topk[0], r.test_s, r.alpha, r.sigma_test), r.pcei_test, 1e-9);
  }
}

TEST(Report, MissingArtifactNamesTheRun) {
  auto run = fake_run(30, 0.2);
  run.eval.reset();
  try {
    build_report({fake_run(20, 0.1), run}, 0.5);
    FAIL() << "expected MissingArtifactError";
  } catch (const MissingArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("B30"), std::string::npos);
  }
}
