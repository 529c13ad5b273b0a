#pragma once

// Mini-batch SGD over an in-memory WEK dataset, plus Top-K evaluation.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "wekbp/error.hpp"
#include "wekbp/metrics.hpp"
#include "wekbp/nn/beamnet.hpp"
#include "wekbp/rng.hpp"
#include "wekbp/wek.hpp"

namespace wekbp::nn {

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  std::vector<std::size_t> k_list{1, 2, 3, 4, 5};

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (k_list.empty()) throw ConfigError("k_list must not be empty");
  }
};

// Samples sharing one WEK shape, stored flat for batching.
class WekDataset {
 public:
  WekDataset() = default;
  explicit WekDataset(const std::vector<WekMatrix>& weks, const std::vector<int>& labels) {
    if (weks.size() != labels.size()) throw DatasetError("WEK and label counts differ");
    for (std::size_t i = 0; i < weks.size(); ++i) add(weks[i], labels[i]);
  }

  void add(const WekMatrix& w, int label) {
    if (size() == 0) {
      ny_ = w.ny();
      nx_ = w.nx();
    } else if (w.ny() != ny_ || w.nx() != nx_) {
      throw DatasetError("sample " + std::to_string(size()) + " has WEK dims " + std::to_string(w.ny()) + "x" +
                         std::to_string(w.nx()) + ", expected " + std::to_string(ny_) + "x" + std::to_string(nx_));
    }
    values_.insert(values_.end(), w.values.cells().begin(), w.values.cells().end());
    distance_.push_back(w.distance_m);
    labels_.push_back(label);
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t ny() const noexcept { return ny_; }
  std::size_t nx() const noexcept { return nx_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<double>& distances() const noexcept { return distance_; }

  Batch batch(std::span<const std::size_t> idx) const {
    Batch b;
    b.n = idx.size();
    const std::size_t P = ny_ * nx_;
    b.wek.reserve(idx.size() * P);
    for (auto i : idx) {
      b.wek.insert(b.wek.end(), values_.begin() + static_cast<std::ptrdiff_t>(i * P),
                   values_.begin() + static_cast<std::ptrdiff_t>((i + 1) * P));
      b.distance_m.push_back(distance_[i]);
    }
    return b;
  }

  std::vector<int> labels_of(std::span<const std::size_t> idx) const {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(labels_[i]);
    return out;
  }

  // Copy with every WEK value set to zero (distance-only ablation).
  WekDataset without_wek() const {
    WekDataset d = *this;
    std::fill(d.values_.begin(), d.values_.end(), 0.0);
    return d;
  }

 private:
  std::size_t ny_ = 0, nx_ = 0;
  std::vector<double> values_;
  std::vector<double> distance_;
  std::vector<int> labels_;
};

struct TrainResult {
  BeamNet net;
  std::vector<double> loss_curve;  // per-sample mean loss per epoch
  TimingRecord timing;
  std::map<std::size_t, double> topk_train;  // K → percentage
};

struct EvalResult {
  std::vector<std::vector<int>> ranked;      // top-max(K) indices per sample
  std::map<std::size_t, double> topk;        // K → percentage
};

inline EvalResult evaluate(BeamNet& net, const WekDataset& data, const std::vector<std::size_t>& k_list,
                           std::size_t batch_size = 256) {
  if (data.size() == 0) throw DatasetError("cannot evaluate on an empty dataset");
  const std::size_t M = net.config().n_beams;
  const std::size_t kmax = *std::max_element(k_list.begin(), k_list.end());
  if (kmax > M) throw DomainError("K must lie in [1, " + std::to_string(M) + "]");
  EvalResult r;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t s = 0; s < idx.size(); s += batch_size) {
    const std::span<const std::size_t> chunk(idx.data() + s, std::min(batch_size, idx.size() - s));
    const auto logits = net.forward(data.batch(chunk), Mode::EVAL);
    for (std::size_t n = 0; n < chunk.size(); ++n) {
      r.ranked.push_back(predict_topk(std::span<const double>(logits.data.data() + n * M, M), kmax));
    }
  }
  for (auto k : k_list) r.topk[k] = topk_accuracy(r.ranked, data.labels(), k);
  return r;
}

inline TrainResult train(const WekDataset& data, const BeamNetConfig& net_cfg, const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw DatasetError("training set is empty");
  if (data.ny() != net_cfg.in_h || data.nx() != net_cfg.in_w) {
    throw DatasetError("dataset WEK dims " + std::to_string(data.ny()) + "x" + std::to_string(data.nx()) +
                       " differ from network input " + std::to_string(net_cfg.in_h) + "x" +
                       std::to_string(net_cfg.in_w));
  }
  TrainResult res{BeamNet(net_cfg, derive_key(cfg.seed, "net")), {}, {}, {}};
  BeamNet& net = res.net;

  const auto& d = data.distances();
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  net.set_distance_normalization(mean, std::sqrt(ss / static_cast<double>(d.size())));

  res.timing.phase = TimingPhase::TRAIN;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dlogits;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Stopwatch sw;
    Rng shuffle_rng(derive_key(cfg.seed, "shuffle", epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i - 1)))]);
    }
    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size, ++batch_no) {
      const std::span<const std::size_t> idx(order.data() + s, std::min(cfg.batch_size, order.size() - s));
      const auto labels = data.labels_of(idx);
      const auto logits = net.forward(data.batch(idx), Mode::TRAIN, derive_key(cfg.seed, "dropout", epoch, batch_no));
      dlogits.assign(logits.size(), 0.0);
      epoch_loss += cross_entropy(logits, labels, dlogits);
      net.backward(dlogits);
      for (auto& p : net.params()) {
        if (!p.trainable) continue;
        for (std::size_t i = 0; i < p.value.data.size(); ++i) p.value.data[i] -= cfg.learning_rate * p.grad[i];
      }
    }
    res.loss_curve.push_back(epoch_loss / static_cast<double>(data.size()));
    res.timing.samples_s.push_back(sw.seconds());
  }
  res.timing.total_s = std::accumulate(res.timing.samples_s.begin(), res.timing.samples_s.end(), 0.0);
  std::vector<std::size_t> ks;  // K above the codebook size is skipped
  for (auto k : cfg.k_list)
    if (k >= 1 && k <= net_cfg.n_beams) ks.push_back(k);
  if (!ks.empty()) res.topk_train = evaluate(net, data, ks).topk;
  return res;
}

}  // namespace wekbp::nn
