#pragma once

// Lightweight CNN + additive-attention beam predictor:
//   [Conv-BN-ReLU] × L → flatten to positions → [FC-BN-ReLU (Dropout)] × M
//   → attention pooling → concat(context, linear(distance)) → FC head → logits

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wekbp/error.hpp"
#include "wekbp/nn/layers.hpp"
#include "wekbp/rng.hpp"
#include "wekbp/wek.hpp"

namespace wekbp::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)) {
    data.assign(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), fill);
  }
  std::size_t size() const noexcept { return data.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

struct Param {
  std::string name;
  Tensor value;
  std::vector<double> grad;
  bool trainable = true;  // BN running statistics are buffers
};

struct BeamNetConfig {
  std::size_t in_h = 10;
  std::size_t in_w = 19;
  bool coord_channels = true;  // append normalized row/column planes to the input
  std::size_t kernel = 3;
  std::vector<std::size_t> conv_channels{16, 32};
  std::vector<std::size_t> fc_widths{128, 128};
  std::size_t attn_hidden = 64;
  std::size_t dist_hidden = 16;
  std::vector<std::size_t> head_widths{64};
  std::size_t n_beams = 64;
  double dropout = 0.3;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  std::size_t input_channels() const { return coord_channels ? 3 : 1; }
  std::size_t positions() const { return in_h * in_w; }

  void validate() const {
    if (in_h == 0 || in_w == 0) throw ShapeError("input dimensions must be positive");
    if (kernel % 2 == 0) throw ShapeError("kernel size must be odd");
    if (conv_channels.empty() || fc_widths.empty()) throw ShapeError("need at least one conv and one FC layer");
    for (auto c : conv_channels) if (c == 0) throw ShapeError("zero-width conv layer");
    for (auto c : fc_widths) if (c == 0) throw ShapeError("zero-width FC layer");
    for (auto c : head_widths) if (c == 0) throw ShapeError("zero-width head layer");
    if (attn_hidden == 0 || dist_hidden == 0 || n_beams == 0) throw ShapeError("zero-width layer");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
  }
  friend bool operator==(const BeamNetConfig&, const BeamNetConfig&) = default;
};

enum class Mode { TRAIN, EVAL };

// N samples of WEK values (row-major ny×nx each) with raw distances in meters.
struct Batch {
  std::size_t n = 0;
  std::vector<double> wek;
  std::vector<double> distance_m;

  static Batch single(const WekMatrix& w) {
    Batch b;
    b.n = 1;
    b.wek.assign(w.values.cells().begin(), w.values.cells().end());
    b.distance_m = {w.distance_m};
    return b;
  }
};

class BeamNet {
 public:
  BeamNet(BeamNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build();
    initialize(seed);
  }

  const BeamNetConfig& config() const noexcept { return cfg_; }
  std::vector<Param>& params() noexcept { return params_; }
  const std::vector<Param>& params() const noexcept { return params_; }
  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) if (p.trainable) n += p.value.size();
    return n;
  }

  void set_distance_normalization(double mean, double stddev) {
    dist_mean_ = mean;
    dist_std_ = stddev > 0.0 ? stddev : 1.0;
  }
  double distance_mean() const noexcept { return dist_mean_; }
  double distance_std() const noexcept { return dist_std_; }

  // Logits [N, n_beams]. TRAIN mode uses batch statistics, applies dropout
  // with masks keyed by `dropout_key`, updates BN running stats and caches
  // activations for backward(). EVAL mode is a pure function of parameters
  // and input.
  Tensor forward(const Batch& batch, Mode mode, std::uint64_t dropout_key = 0);

  Tensor forward(const WekMatrix& w) { return forward(Batch::single(w), Mode::EVAL); }

  // Attention weights [N, P] from the most recent forward call.
  const std::vector<double>& last_attention() const noexcept { return last_attention_; }

  // Overwrites every gradient with d(loss)/d(param) given d(loss)/d(logits).
  void backward(std::span<const double> dlogits);

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }

  void save(const std::filesystem::path& path) const;
  static BeamNet load(const std::filesystem::path& path);

 private:
  struct ConvLayer { std::size_t w, b, gamma, beta, rmean, rvar, c_in, c_out; };
  struct FcLayer { std::size_t w, b, gamma, beta, rmean, rvar, in, out; };
  struct DenseLayer { std::size_t w, b, in, out; };

  struct Cache {
    std::size_t n = 0;
    std::vector<double> input;                  // [N, Cin, H, W]
    std::vector<std::vector<double>> conv_in;   // per layer
    std::vector<BnCache> conv_bn;
    std::vector<std::vector<double>> conv_out;  // post-ReLU
    std::vector<std::vector<double>> fc_in;
    std::vector<BnCache> fc_bn;
    std::vector<std::vector<double>> fc_relu;   // post-ReLU, pre-dropout
    std::vector<double> dropout_mask;
    std::vector<double> attn_in;                // [N, P, F]
    std::vector<AttentionCache> attn;
    std::vector<double> dist_norm;              // [N]
    std::vector<std::vector<double>> head_in;   // per head layer
  };

  std::size_t add_param(std::string name, std::vector<std::size_t> shape, bool trainable = true, double fill = 0.0) {
    Param p;
    p.name = std::move(name);
    p.value = Tensor(std::move(shape), fill);
    p.grad.assign(p.value.size(), 0.0);
    p.trainable = trainable;
    params_.push_back(std::move(p));
    return params_.size() - 1;
  }

  void build();
  void initialize(std::uint64_t seed);
  std::span<double> v(std::size_t i) { return params_[i].value.data; }
  std::span<const double> cv(std::size_t i) const { return params_[i].value.data; }
  std::span<double> g(std::size_t i) { return params_[i].grad; }

  BeamNetConfig cfg_;
  std::vector<Param> params_;
  std::vector<ConvLayer> convs_;
  std::vector<FcLayer> fcs_;
  std::size_t attn_w_ = 0, attn_u_ = 0, attn_v_ = 0;
  DenseLayer dist_{};
  std::vector<DenseLayer> head_;
  double dist_mean_ = 0.0;
  double dist_std_ = 1.0;
  std::optional<Cache> cache_;
  std::vector<double> last_attention_;
};

inline void BeamNet::build() {
  std::size_t c_in = cfg_.input_channels();
  const std::size_t k = cfg_.kernel;
  for (std::size_t l = 0; l < cfg_.conv_channels.size(); ++l) {
    const std::size_t c_out = cfg_.conv_channels[l];
    const std::string p = "conv" + std::to_string(l + 1) + ".";
    ConvLayer L{};
    L.w = add_param(p + "weight", {c_out, c_in, k, k});
    L.b = add_param(p + "bias", {c_out});
    L.gamma = add_param(p + "bn.gamma", {c_out}, true, 1.0);
    L.beta = add_param(p + "bn.beta", {c_out});
    L.rmean = add_param(p + "bn.running_mean", {c_out}, false, 0.0);
    L.rvar = add_param(p + "bn.running_var", {c_out}, false, 1.0);
    L.c_in = c_in;
    L.c_out = c_out;
    convs_.push_back(L);
    c_in = c_out;
  }
  std::size_t in = c_in;
  for (std::size_t l = 0; l < cfg_.fc_widths.size(); ++l) {
    const std::size_t out = cfg_.fc_widths[l];
    const std::string p = "fc" + std::to_string(l + 1) + ".";
    FcLayer L{};
    L.w = add_param(p + "weight", {out, in});
    L.b = add_param(p + "bias", {out});
    L.gamma = add_param(p + "bn.gamma", {out}, true, 1.0);
    L.beta = add_param(p + "bn.beta", {out});
    L.rmean = add_param(p + "bn.running_mean", {out}, false, 0.0);
    L.rvar = add_param(p + "bn.running_var", {out}, false, 1.0);
    L.in = in;
    L.out = out;
    fcs_.push_back(L);
    in = out;
  }
  const std::size_t feat = in;
  attn_w_ = add_param("attention.W_a", {cfg_.attn_hidden, feat});
  attn_u_ = add_param("attention.U_a", {cfg_.attn_hidden, feat});
  attn_v_ = add_param("attention.V_a", {1, cfg_.attn_hidden});
  dist_.w = add_param("distance.weight", {cfg_.dist_hidden, 1});
  dist_.b = add_param("distance.bias", {cfg_.dist_hidden});
  dist_.in = 1;
  dist_.out = cfg_.dist_hidden;
  in = feat + cfg_.dist_hidden;
  for (std::size_t l = 0; l <= cfg_.head_widths.size(); ++l) {
    const std::size_t out = l < cfg_.head_widths.size() ? cfg_.head_widths[l] : cfg_.n_beams;
    const std::string p = "head" + std::to_string(l + 1) + ".";
    DenseLayer L{};
    L.w = add_param(p + "weight", {out, in});
    L.b = add_param(p + "bias", {out});
    L.in = in;
    L.out = out;
    head_.push_back(L);
    in = out;
  }
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases; BN
// γ = 1, β = 0.
inline void BeamNet::initialize(std::uint64_t seed) {
  auto fill = [&](std::size_t idx, std::size_t fan_in) {
    Rng rng(derive_key(seed, "init", idx));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : params_[idx].value.data) x = rng.uniform(-bound, bound);
  };
  const std::size_t kk = cfg_.kernel * cfg_.kernel;
  for (const auto& L : convs_) {
    fill(L.w, L.c_in * kk);
    fill(L.b, L.c_in * kk);
  }
  for (const auto& L : fcs_) {
    fill(L.w, L.in);
    fill(L.b, L.in);
  }
  fill(attn_w_, params_[attn_w_].value.shape[1]);
  fill(attn_u_, params_[attn_u_].value.shape[1]);
  fill(attn_v_, cfg_.attn_hidden);
  fill(dist_.w, 1);
  fill(dist_.b, 1);
  for (const auto& L : head_) {
    fill(L.w, L.in);
    fill(L.b, L.in);
  }
}

inline Tensor BeamNet::forward(const Batch& batch, Mode mode, std::uint64_t dropout_key) {
  const std::size_t N = batch.n;
  const std::size_t H = cfg_.in_h, W = cfg_.in_w, P = H * W;
  if (N == 0) throw ShapeError("empty batch");
  if (batch.wek.size() != N * P || batch.distance_m.size() != N) {
    throw ShapeError("batch of " + std::to_string(N) + " with " + std::to_string(batch.wek.size()) +
                     " WEK values does not match network input " + shape_str({N, H, W}));
  }
  const bool train = mode == Mode::TRAIN;
  Cache c;
  c.n = N;

  // Input planes.
  const std::size_t cin = cfg_.input_channels();
  std::vector<double> x(N * cin * P, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(batch.wek.begin() + static_cast<std::ptrdiff_t>(n * P), P, x.begin() + static_cast<std::ptrdiff_t>(n * cin * P));
    if (cfg_.coord_channels) {
      for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t q = 0; q < W; ++q) {
          x[(n * cin + 1) * P + r * W + q] = H > 1 ? 2.0 * static_cast<double>(r) / static_cast<double>(H - 1) - 1.0 : 0.0;
          x[(n * cin + 2) * P + r * W + q] = W > 1 ? 2.0 * static_cast<double>(q) / static_cast<double>(W - 1) - 1.0 : 0.0;
        }
      }
    }
  }

  for (const auto& L : convs_) {
    ConvShape s{N, L.c_in, L.c_out, H, W, cfg_.kernel};
    std::vector<double> z(N * L.c_out * P);
    conv2d_forward(s, x, cv(L.w), cv(L.b), z);
    BnShape bs{N, L.c_out, P};
    std::vector<double> y(z.size());
    BnCache bc;
    if (train) {
      batchnorm_train_forward(bs, z, cv(L.gamma), cv(L.beta), cfg_.bn_eps, cfg_.bn_momentum, v(L.rmean), v(L.rvar), y, bc);
    } else {
      batchnorm_eval_forward(bs, z, cv(L.gamma), cv(L.beta), cfg_.bn_eps, cv(L.rmean), cv(L.rvar), y);
    }
    relu_inplace(y);
    if (train) {
      c.conv_in.push_back(std::move(x));
      c.conv_bn.push_back(std::move(bc));
      c.conv_out.push_back(y);
    }
    x = std::move(y);
  }

  // [N, C, P] → [N, P, C]
  const std::size_t C = convs_.back().c_out;
  std::vector<double> rows(N * P * C);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t ch = 0; ch < C; ++ch)
      for (std::size_t p = 0; p < P; ++p) rows[(n * P + p) * C + ch] = x[(n * C + ch) * P + p];

  const std::size_t R = N * P;
  for (std::size_t l = 0; l < fcs_.size(); ++l) {
    const auto& L = fcs_[l];
    std::vector<double> z(R * L.out);
    linear_forward(R, L.in, L.out, rows, cv(L.w), cv(L.b), z);
    BnShape bs{R, L.out, 1};
    std::vector<double> y(z.size());
    BnCache bc;
    if (train) {
      batchnorm_train_forward(bs, z, cv(L.gamma), cv(L.beta), cfg_.bn_eps, cfg_.bn_momentum, v(L.rmean), v(L.rvar), y, bc);
    } else {
      batchnorm_eval_forward(bs, z, cv(L.gamma), cv(L.beta), cfg_.bn_eps, cv(L.rmean), cv(L.rvar), y);
    }
    relu_inplace(y);
    if (train) {
      c.fc_in.push_back(std::move(rows));
      c.fc_bn.push_back(std::move(bc));
      c.fc_relu.push_back(y);
    }
    if (l == 0 && train && cfg_.dropout > 0.0) {
      Rng rng(derive_key(dropout_key, "dropout"));
      const double keep = 1.0 - cfg_.dropout;
      c.dropout_mask.resize(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) {
        c.dropout_mask[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
        y[i] *= c.dropout_mask[i];
      }
    }
    rows = std::move(y);
  }

  const std::size_t F = fcs_.back().out;
  const std::size_t A = cfg_.attn_hidden;
  const std::size_t D = cfg_.dist_hidden;
  std::vector<double> head_x(N * (F + D));
  last_attention_.assign(N * P, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    AttentionCache ac;
    std::span<const double> xs(rows.data() + n * P * F, P * F);
    attention_forward(P, F, A, xs, cv(attn_w_), cv(attn_u_), cv(attn_v_),
                      std::span<double>(head_x.data() + n * (F + D), F), ac);
    std::copy(ac.alpha.begin(), ac.alpha.end(), last_attention_.begin() + static_cast<std::ptrdiff_t>(n * P));
    if (train) c.attn.push_back(std::move(ac));
  }
  std::vector<double> dnorm(N);
  for (std::size_t n = 0; n < N; ++n) {
    dnorm[n] = (batch.distance_m[n] - dist_mean_) / dist_std_;
    for (std::size_t j = 0; j < D; ++j) head_x[n * (F + D) + F + j] = cv(dist_.w)[j] * dnorm[n] + cv(dist_.b)[j];
  }
  if (train) {
    c.attn_in = std::move(rows);
    c.dist_norm = dnorm;
  }

  std::vector<double> h = std::move(head_x);
  for (std::size_t l = 0; l < head_.size(); ++l) {
    const auto& L = head_[l];
    std::vector<double> z(N * L.out);
    linear_forward(N, L.in, L.out, h, cv(L.w), cv(L.b), z);
    if (l + 1 < head_.size()) relu_inplace(z);
    if (train) c.head_in.push_back(std::move(h));
    h = std::move(z);
  }

  if (train) {
    cache_ = std::move(c);
  } else {
    cache_.reset();
  }
  Tensor out({N, cfg_.n_beams});
  out.data = std::move(h);
  return out;
}

inline void BeamNet::backward(std::span<const double> dlogits) {
  if (!cache_) throw StateError("backward() needs a preceding TRAIN-mode forward()");
  const Cache& c = *cache_;
  const std::size_t N = c.n;
  const std::size_t H = cfg_.in_h, W = cfg_.in_w, P = H * W;
  if (dlogits.size() != N * cfg_.n_beams) {
    throw ShapeError("logit gradient " + shape_str({dlogits.size()}) + " vs " + shape_str({N, cfg_.n_beams}));
  }
  zero_grad();

  std::vector<double> d(dlogits.begin(), dlogits.end());
  for (std::size_t l = head_.size(); l-- > 0;) {
    const auto& L = head_[l];
    std::vector<double> dx(N * L.in);
    linear_backward(N, L.in, L.out, c.head_in[l], cv(L.w), d, g(L.w), g(L.b), dx);
    if (l > 0) relu_backward_inplace(c.head_in[l], dx);
    d = std::move(dx);
  }

  const std::size_t F = fcs_.back().out;
  const std::size_t A = cfg_.attn_hidden;
  const std::size_t D = cfg_.dist_hidden;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t j = 0; j < D; ++j) {
      const double gj = d[n * (F + D) + F + j];
      g(dist_.w)[j] += gj * c.dist_norm[n];
      g(dist_.b)[j] += gj;
    }
  }
  std::vector<double> drows(N * P * F);
  for (std::size_t n = 0; n < N; ++n) {
    attention_backward(P, F, A, std::span<const double>(c.attn_in.data() + n * P * F, P * F), cv(attn_w_), cv(attn_u_),
                       cv(attn_v_), c.attn[n], std::span<const double>(d.data() + n * (F + D), F), g(attn_w_),
                       g(attn_u_), g(attn_v_), std::span<double>(drows.data() + n * P * F, P * F));
  }

  const std::size_t R = N * P;
  for (std::size_t l = fcs_.size(); l-- > 0;) {
    const auto& L = fcs_[l];
    if (l == 0 && !c.dropout_mask.empty()) {
      for (std::size_t i = 0; i < drows.size(); ++i) drows[i] *= c.dropout_mask[i];
    }
    relu_backward_inplace(c.fc_relu[l], drows);
    std::vector<double> dz(R * L.out);
    batchnorm_backward({R, L.out, 1}, c.fc_bn[l], cv(L.gamma), drows, g(L.gamma), g(L.beta), dz);
    std::vector<double> dx(R * L.in);
    linear_backward(R, L.in, L.out, c.fc_in[l], cv(L.w), dz, g(L.w), g(L.b), dx);
    drows = std::move(dx);
  }

  const std::size_t C = convs_.back().c_out;
  std::vector<double> dx(N * C * P);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t ch = 0; ch < C; ++ch)
      for (std::size_t p = 0; p < P; ++p) dx[(n * C + ch) * P + p] = drows[(n * P + p) * C + ch];

  for (std::size_t l = convs_.size(); l-- > 0;) {
    const auto& L = convs_[l];
    relu_backward_inplace(c.conv_out[l], dx);
    std::vector<double> dz(dx.size());
    batchnorm_backward({N, L.c_out, P}, c.conv_bn[l], cv(L.gamma), dx, g(L.gamma), g(L.beta), dz);
    std::vector<double> dprev;
    if (l > 0) dprev.assign(N * L.c_in * P, 0.0);
    conv2d_backward({N, L.c_in, L.c_out, H, W, cfg_.kernel}, c.conv_in[l], cv(L.w), dz, g(L.w), g(L.b), dprev);
    dx = std::move(dprev);
  }
}

// ---- Loss and prediction -------------------------------------------------

// Σ_n -log softmax(logits_n)[label_n]; fills dlogits when non-empty.
inline double cross_entropy(const Tensor& logits, std::span<const int> labels, std::span<double> dlogits = {}) {
  if (logits.shape.size() != 2) throw ShapeError("logits must be [N, n_beams], got " + shape_str(logits.shape));
  const std::size_t N = logits.shape[0], M = logits.shape[1];
  if (labels.size() != N) throw ShapeError("label count does not match batch size");
  double loss = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const int y = labels[n];
    if (y < 0 || static_cast<std::size_t>(y) >= M) throw DomainError("label " + std::to_string(y) + " out of range");
    const double* z = logits.data.data() + n * M;
    const double mx = *std::max_element(z, z + M);
    double sum = 0.0;
    for (std::size_t m = 0; m < M; ++m) sum += std::exp(z[m] - mx);
    const double lse = mx + std::log(sum);
    loss += lse - z[y];
    if (!dlogits.empty()) {
      for (std::size_t m = 0; m < M; ++m) dlogits[n * M + m] = std::exp(z[m] - lse);
      dlogits[n * M + static_cast<std::size_t>(y)] -= 1.0;
    }
  }
  return loss;
}

// Indices of the K largest entries, descending; ties broken by lower index.
inline std::vector<int> predict_topk(std::span<const double> logits, std::size_t k) {
  if (k < 1 || k > logits.size()) throw DomainError("K must lie in [1, " + std::to_string(logits.size()) + "]");
  std::vector<int> idx(logits.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](int a, int b) {
    const double la = logits[static_cast<std::size_t>(a)], lb = logits[static_cast<std::size_t>(b)];
    return la > lb || (la == lb && a < b);
  });
  idx.resize(k);
  return idx;
}

inline std::vector<int> predict_topk(BeamNet& net, const WekMatrix& wek, std::size_t k) {
  const auto logits = net.forward(wek);
  return predict_topk(logits.data, k);
}

// Percentage of samples whose label is among the first K entries of its
// ranked prediction list.
inline double topk_accuracy(const std::vector<std::vector<int>>& ranked, std::span<const int> labels, std::size_t k) {
  if (ranked.size() != labels.size()) throw DomainError("prediction and label counts differ");
  if (ranked.empty()) throw DomainError("no samples");
  std::size_t hits = 0;
  for (std::size_t n = 0; n < ranked.size(); ++n) {
    if (ranked[n].size() < k) throw DomainError("ranked list shorter than K");
    if (std::find(ranked[n].begin(), ranked[n].begin() + static_cast<std::ptrdiff_t>(k), labels[n]) !=
        ranked[n].begin() + static_cast<std::ptrdiff_t>(k)) {
      ++hits;
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranked.size());
}

// ---- Checkpoint ----------------------------------------------------------
// Layout (all integers u64, all reals f64, little-endian):
//   "WEKBPNN\0" | u32 version=1 | config block | u64 tensor_count |
//   per tensor: u64 ndim, ndim × u64 dims, values
// Config block: in_h, in_w, coord_channels, kernel, n_conv, conv widths,
// n_fc, fc widths, attn_hidden, dist_hidden, n_head, head widths, n_beams,
// then f64 dropout, bn_eps, bn_momentum, distance_mean, distance_std.

namespace detail {
inline constexpr char kMagic[8] = {'W', 'E', 'K', 'B', 'P', 'N', 'N', '\0'};
inline constexpr std::uint32_t kVersion = 1;

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(std::string bytes, std::string origin) : bytes_(std::move(bytes)), origin_(std::move(origin)) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<std::size_t> list() {
    const auto n = u64();
    if (n > 1024) throw ParseError(origin_ + ": implausible list length", pos_);
    std::vector<std::size_t> out(n);
    for (auto& x : out) x = u64();
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }
  const std::string& origin() const { return origin_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParseError(origin_ + ": truncated checkpoint", pos_);
  }
  std::string bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};
}  // namespace detail

inline void BeamNet::save(const std::filesystem::path& path) const {
  std::string out(detail::kMagic, 8);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((detail::kVersion >> (8 * i)) & 0xFF));
  auto put_list = [&](const std::vector<std::size_t>& l) {
    detail::put_u64(out, l.size());
    for (auto x : l) detail::put_u64(out, x);
  };
  detail::put_u64(out, cfg_.in_h);
  detail::put_u64(out, cfg_.in_w);
  detail::put_u64(out, cfg_.coord_channels ? 1 : 0);
  detail::put_u64(out, cfg_.kernel);
  put_list(cfg_.conv_channels);
  put_list(cfg_.fc_widths);
  detail::put_u64(out, cfg_.attn_hidden);
  detail::put_u64(out, cfg_.dist_hidden);
  put_list(cfg_.head_widths);
  detail::put_u64(out, cfg_.n_beams);
  detail::put_f64(out, cfg_.dropout);
  detail::put_f64(out, cfg_.bn_eps);
  detail::put_f64(out, cfg_.bn_momentum);
  detail::put_f64(out, dist_mean_);
  detail::put_f64(out, dist_std_);
  detail::put_u64(out, params_.size());
  for (const auto& p : params_) {
    put_list(p.value.shape);
    for (double x : p.value.data) detail::put_f64(out, x);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

inline BeamNet BeamNet::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifactError("checkpoint not found: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  detail::Reader r(std::move(bytes), path.string());
  if (r.raw(8) != std::string(detail::kMagic, 8)) throw ParseError(path.string() + ": bad checkpoint magic", 0);
  if (const auto ver = r.u32(); ver != detail::kVersion) {
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(ver), 8);
  }
  BeamNetConfig cfg;
  cfg.in_h = r.u64();
  cfg.in_w = r.u64();
  cfg.coord_channels = r.u64() != 0;
  cfg.kernel = r.u64();
  cfg.conv_channels = r.list();
  cfg.fc_widths = r.list();
  cfg.attn_hidden = r.u64();
  cfg.dist_hidden = r.u64();
  cfg.head_widths = r.list();
  cfg.n_beams = r.u64();
  cfg.dropout = r.f64();
  cfg.bn_eps = r.f64();
  cfg.bn_momentum = r.f64();
  const double mean = r.f64();
  const double sd = r.f64();
  BeamNet net(cfg, 0);
  net.set_distance_normalization(mean, sd);
  if (r.u64() != net.params_.size()) throw ParseError(path.string() + ": tensor count mismatch", r.pos());
  for (auto& p : net.params_) {
    const auto shape = r.list();
    if (shape != p.value.shape) {
      throw ParseError(path.string() + ": tensor " + p.name + " has shape " + shape_str(shape) + ", expected " +
                           shape_str(p.value.shape),
                       r.pos());
    }
    for (auto& x : p.value.data) x = r.f64();
  }
  if (!r.done()) throw ParseError(path.string() + ": trailing bytes after last tensor", r.pos());
  return net;
}

}  // namespace wekbp::nn
