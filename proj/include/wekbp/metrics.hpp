#pragma once

// Timing capture, the PCEI accuracy/efficiency index and the run report.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wekbp/csv.hpp"
#include "wekbp/error.hpp"

namespace wekbp {

enum class TimingPhase { TRAIN, TEST };

struct TimingRecord {
  TimingPhase phase = TimingPhase::TRAIN;
  std::vector<double> samples_s;  // per epoch (TRAIN) or per repeated run (TEST)
  double total_s = 0.0;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

enum class SigmaMode { STD, CV };

// Population standard deviation of the samples (STD) or that divided by the
// mean (CV).
inline double sigma_t(std::span<const double> times, SigmaMode mode) {
  if (times.empty()) throw DomainError("sigma_t: no timing samples");
  double mean = 0.0;
  for (double t : times) mean += t;
  mean /= static_cast<double>(times.size());
  double ss = 0.0;
  for (double t : times) ss += (t - mean) * (t - mean);
  const double sd = std::sqrt(ss / static_cast<double>(times.size()));
  if (mode == SigmaMode::STD) return sd;
  if (!(mean > 0.0)) throw DomainError("sigma_t: CV needs a positive mean");
  return sd / mean;
}

// P / ln(T + 1) · exp(-α·σ_T)
inline double pcei(double accuracy, double total_s, double alpha, double sigma) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw DomainError("pcei: accuracy must be a fraction in [0, 1]");
  if (!(total_s > 0.0)) throw DomainError("pcei: time must be positive");
  if (!(alpha >= 0.0)) throw DomainError("pcei: alpha must be non-negative");
  if (!(sigma >= 0.0)) throw DomainError("pcei: sigma must be non-negative");
  return accuracy / std::log(total_s + 1.0) * std::exp(-alpha * sigma);
}

struct PceiReport {
  double accuracy_p = 0.0;
  double total_s = 0.0;
  double alpha = 0.5;
  double sigma_t = 0.0;
  double score = 0.0;
};

inline PceiReport pcei_report(double accuracy, const TimingRecord& timing, double alpha,
                              SigmaMode mode = SigmaMode::CV) {
  PceiReport r;
  r.accuracy_p = accuracy;
  r.total_s = timing.total_s;
  r.alpha = alpha;
  r.sigma_t = sigma_t(timing.samples_s, mode);
  r.score = pcei(accuracy, timing.total_s, alpha, r.sigma_t);
  return r;
}

// ---- Report -----------------------------------------------------------------

inline constexpr std::string_view kReportVersionLine = "# wekbp-report v1";
inline constexpr std::string_view kReportHeader =
    "config,B,ny,nx,iters,min_loss,top1_train,train_s,pcei_train,test_s,top1,top2,top3,top4,top5,pcei_test,"
    "sigma_train,sigma_test,alpha";

struct TrainSummary {
  std::size_t block = 0;
  std::size_t ny = 0, nx = 0;
  std::size_t iters = 0;  // epochs
  double min_loss = 0.0;  // per-sample mean
  double top1_train = 0.0;  // fraction
  TimingRecord timing;
};

struct EvalSummary {
  std::vector<double> topk;  // fractions for K = 1..5
  TimingRecord timing;
};

struct RunArtifacts {
  std::string config;
  std::optional<TrainSummary> train;
  std::optional<EvalSummary> eval;
};

struct ReportRow {
  std::string config;
  std::size_t block = 0, ny = 0, nx = 0, iters = 0;
  double min_loss = 0.0, top1_train = 0.0, train_s = 0.0, pcei_train = 0.0, test_s = 0.0;
  double topk[5] = {0, 0, 0, 0, 0};
  double pcei_test = 0.0, sigma_train = 0.0, sigma_test = 0.0, alpha = 0.5;
};

inline std::vector<ReportRow> build_report(const std::vector<RunArtifacts>& runs, double alpha,
                                           SigmaMode mode = SigmaMode::CV) {
  std::vector<ReportRow> rows;
  for (const auto& run : runs) {
    if (!run.train) throw MissingArtifactError("report: run '" + run.config + "' has no training artifacts");
    if (!run.eval) throw MissingArtifactError("report: run '" + run.config + "' has no evaluation artifacts");
    if (run.eval->topk.size() < 5) throw MissingArtifactError("report: run '" + run.config + "' lacks Top-1..5");
    const auto& tr = *run.train;
    const auto& ev = *run.eval;
    ReportRow r;
    r.config = run.config;
    r.block = tr.block;
    r.ny = tr.ny;
    r.nx = tr.nx;
    r.iters = tr.iters;
    r.min_loss = tr.min_loss;
    r.top1_train = tr.top1_train;
    const auto ptr = pcei_report(tr.top1_train, tr.timing, alpha, mode);
    r.train_s = ptr.total_s;
    r.pcei_train = ptr.score;
    r.sigma_train = ptr.sigma_t;
    const auto pte = pcei_report(ev.topk[0], ev.timing, alpha, mode);
    r.test_s = pte.total_s;
    r.pcei_test = pte.score;
    r.sigma_test = pte.sigma_t;
    for (int k = 0; k < 5; ++k) r.topk[k] = ev.topk[static_cast<std::size_t>(k)];
    r.alpha = alpha;
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.block < b.block; });
  return rows;
}

inline std::string encode_report(const std::vector<ReportRow>& rows) {
  std::string out(kReportVersionLine);
  out += '\n';
  out += kReportHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += r.config + "," + std::to_string(r.block) + "," + std::to_string(r.ny) + "," + std::to_string(r.nx) + "," +
           std::to_string(r.iters) + "," + format_double(r.min_loss) + "," + format_double(r.top1_train) + "," +
           format_double(r.train_s) + "," + format_double(r.pcei_train) + "," + format_double(r.test_s);
    for (double a : r.topk) out += "," + format_double(a);
    out += "," + format_double(r.pcei_test) + "," + format_double(r.sigma_train) + "," + format_double(r.sigma_test) +
           "," + format_double(r.alpha) + "\n";
  }
  return out;
}

inline std::vector<ReportRow> decode_report(const std::filesystem::path& path) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw DatasetError(path.string() + ": empty report");
  std::vector<ReportRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& c = rows[i];
    if (c.size() != 19) throw DatasetError(path.string() + ": report row with " + std::to_string(c.size()) + " columns");
    ReportRow r;
    r.config = c[0];
    r.block = static_cast<std::size_t>(parse_int(c[1], "B"));
    r.ny = static_cast<std::size_t>(parse_int(c[2], "ny"));
    r.nx = static_cast<std::size_t>(parse_int(c[3], "nx"));
    r.iters = static_cast<std::size_t>(parse_int(c[4], "iters"));
    r.min_loss = parse_double(c[5], "min_loss");
    r.top1_train = parse_double(c[6], "top1_train");
    r.train_s = parse_double(c[7], "train_s");
    r.pcei_train = parse_double(c[8], "pcei_train");
    r.test_s = parse_double(c[9], "test_s");
    for (int k = 0; k < 5; ++k) r.topk[k] = parse_double(c[10 + static_cast<std::size_t>(k)], "topk");
    r.pcei_test = parse_double(c[15], "pcei_test");
    r.sigma_train = parse_double(c[16], "sigma_train");
    r.sigma_test = parse_double(c[17], "sigma_test");
    r.alpha = parse_double(c[18], "alpha");
    out.push_back(r);
  }
  return out;
}

}  // namespace wekbp
