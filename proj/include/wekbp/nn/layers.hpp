#pragma once

// Batched primitive layers on flat row-major buffers. Each forward has a
// matching backward that accumulates into gradient buffers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace wekbp::nn {

struct ConvShape {
  std::size_t n = 0, c_in = 0, c_out = 0, h = 0, w = 0, k = 3;
};

// Same-padded, stride-1 cross-correlation plus bias.
inline void conv2d_forward(const ConvShape& s, std::span<const double> x, std::span<const double> weight,
                           std::span<const double> bias, std::span<double> z) {
  const auto pad = static_cast<std::ptrdiff_t>(s.k / 2);
  const auto H = static_cast<std::ptrdiff_t>(s.h), W = static_cast<std::ptrdiff_t>(s.w);
  const std::size_t plane = s.h * s.w;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < s.c_out; ++o) {
      double* zp = z.data() + (n * s.c_out + o) * plane;
      std::fill(zp, zp + plane, bias[o]);
      for (std::size_t i = 0; i < s.c_in; ++i) {
        const double* xp = x.data() + (n * s.c_in + i) * plane;
        for (std::size_t kh = 0; kh < s.k; ++kh) {
          for (std::size_t kw = 0; kw < s.k; ++kw) {
            const double wv = weight[((o * s.c_in + i) * s.k + kh) * s.k + kw];
            const auto dh = static_cast<std::ptrdiff_t>(kh) - pad, dw = static_cast<std::ptrdiff_t>(kw) - pad;
            const auto h0 = std::max<std::ptrdiff_t>(0, -dh), h1 = std::min(H, H - dh);
            const auto w0 = std::max<std::ptrdiff_t>(0, -dw), w1 = std::min(W, W - dw);
            for (auto hh = h0; hh < h1; ++hh) {
              double* zr = zp + hh * W;
              const double* xr = xp + (hh + dh) * W + dw;
              for (auto ww = w0; ww < w1; ++ww) zr[ww] += wv * xr[ww];
            }
          }
        }
      }
    }
  }
}

// dx may be empty when the input gradient is not needed.
inline void conv2d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> weight,
                            std::span<const double> dz, std::span<double> dweight, std::span<double> dbias,
                            std::span<double> dx) {
  const auto pad = static_cast<std::ptrdiff_t>(s.k / 2);
  const auto H = static_cast<std::ptrdiff_t>(s.h), W = static_cast<std::ptrdiff_t>(s.w);
  const std::size_t plane = s.h * s.w;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < s.c_out; ++o) {
      const double* gp = dz.data() + (n * s.c_out + o) * plane;
      double db = 0.0;
      for (std::size_t p = 0; p < plane; ++p) db += gp[p];
      dbias[o] += db;
      for (std::size_t i = 0; i < s.c_in; ++i) {
        const double* xp = x.data() + (n * s.c_in + i) * plane;
        double* dxp = dx.empty() ? nullptr : dx.data() + (n * s.c_in + i) * plane;
        for (std::size_t kh = 0; kh < s.k; ++kh) {
          for (std::size_t kw = 0; kw < s.k; ++kw) {
            const std::size_t widx = ((o * s.c_in + i) * s.k + kh) * s.k + kw;
            const double wv = weight[widx];
            const auto dh = static_cast<std::ptrdiff_t>(kh) - pad, dw = static_cast<std::ptrdiff_t>(kw) - pad;
            const auto h0 = std::max<std::ptrdiff_t>(0, -dh), h1 = std::min(H, H - dh);
            const auto w0 = std::max<std::ptrdiff_t>(0, -dw), w1 = std::min(W, W - dw);
            double acc = 0.0;
            for (auto hh = h0; hh < h1; ++hh) {
              const double* gr = gp + hh * W;
              const double* xr = xp + (hh + dh) * W + dw;
              for (auto ww = w0; ww < w1; ++ww) acc += gr[ww] * xr[ww];
              if (dxp) {
                double* dxr = dxp + (hh + dh) * W + dw;
                for (auto ww = w0; ww < w1; ++ww) dxr[ww] += gr[ww] * wv;
              }
            }
            dweight[widx] += acc;
          }
        }
      }
    }
  }
}

// Batch normalization over a tensor laid out as [outer, C, inner]; statistics
// are per channel over outer × inner.
struct BnShape {
  std::size_t outer = 0, c = 0, inner = 1;
  std::size_t count() const { return outer * inner; }
};

struct BnCache {
  std::vector<double> xhat;
  std::vector<double> invstd;
};

inline void batchnorm_train_forward(const BnShape& s, std::span<const double> x, std::span<const double> gamma,
                                    std::span<const double> beta, double eps, double momentum,
                                    std::span<double> running_mean, std::span<double> running_var,
                                    std::span<double> y, BnCache& cache) {
  const double m = static_cast<double>(s.count());
  std::vector<double> mean(s.c, 0.0), var(s.c, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* p = x.data() + (o * s.c + c) * s.inner;
      double acc = 0.0;
      for (std::size_t i = 0; i < s.inner; ++i) acc += p[i];
      mean[c] += acc;
    }
  }
  for (auto& v : mean) v /= m;
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* p = x.data() + (o * s.c + c) * s.inner;
      double acc = 0.0;
      for (std::size_t i = 0; i < s.inner; ++i) acc += (p[i] - mean[c]) * (p[i] - mean[c]);
      var[c] += acc;
    }
  }
  cache.invstd.assign(s.c, 0.0);
  for (std::size_t c = 0; c < s.c; ++c) {
    var[c] /= m;
    cache.invstd[c] = 1.0 / std::sqrt(var[c] + eps);
    running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean[c];
    const double unbiased = m > 1.0 ? var[c] * m / (m - 1.0) : var[c];
    running_var[c] = (1.0 - momentum) * running_var[c] + momentum * unbiased;
  }
  cache.xhat.resize(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (o * s.c + c) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double xh = (x[base + i] - mean[c]) * cache.invstd[c];
        cache.xhat[base + i] = xh;
        y[base + i] = gamma[c] * xh + beta[c];
      }
    }
  }
}

inline void batchnorm_eval_forward(const BnShape& s, std::span<const double> x, std::span<const double> gamma,
                                   std::span<const double> beta, double eps, std::span<const double> running_mean,
                                   std::span<const double> running_var, std::span<double> y) {
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double scale = gamma[c] / std::sqrt(running_var[c] + eps);
      const double shift = beta[c] - running_mean[c] * scale;
      const std::size_t base = (o * s.c + c) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) y[base + i] = x[base + i] * scale + shift;
    }
  }
}

inline void batchnorm_backward(const BnShape& s, const BnCache& cache, std::span<const double> gamma,
                               std::span<const double> dy, std::span<double> dgamma, std::span<double> dbeta,
                               std::span<double> dx) {
  const double m = static_cast<double>(s.count());
  std::vector<double> sum_dy(s.c, 0.0), sum_dy_xhat(s.c, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (o * s.c + c) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) {
        sum_dy[c] += dy[base + i];
        sum_dy_xhat[c] += dy[base + i] * cache.xhat[base + i];
      }
    }
  }
  for (std::size_t c = 0; c < s.c; ++c) {
    dgamma[c] += sum_dy_xhat[c];
    dbeta[c] += sum_dy[c];
  }
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double k = gamma[c] * cache.invstd[c] / m;
      const std::size_t base = (o * s.c + c) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) {
        dx[base + i] = k * (m * dy[base + i] - sum_dy[c] - cache.xhat[base + i] * sum_dy_xhat[c]);
      }
    }
  }
}

// y[r, :] = W x[r, :] + b, W is [out, in].
inline void linear_forward(std::size_t rows, std::size_t in, std::size_t out, std::span<const double> x,
                           std::span<const double> weight, std::span<const double> bias, std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * in;
    double* yr = y.data() + r * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = weight.data() + o * in;
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }
}

inline void linear_backward(std::size_t rows, std::size_t in, std::size_t out, std::span<const double> x,
                            std::span<const double> weight, std::span<const double> dy, std::span<double> dweight,
                            std::span<double> dbias, std::span<double> dx) {
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * in;
    const double* gr = dy.data() + r * out;
    double* dxr = dx.empty() ? nullptr : dx.data() + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = gr[o];
      if (g == 0.0) continue;
      dbias[o] += g;
      double* dwr = dweight.data() + o * in;
      const double* wr = weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) dwr[i] += g * xr[i];
      if (dxr) {
        for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wr[i];
      }
    }
  }
}

inline void relu_inplace(std::span<double> v) {
  for (auto& x : v) x = x > 0.0 ? x : 0.0;
}

// dz = dy where the ReLU output was positive.
inline void relu_backward_inplace(std::span<const double> y, std::span<double> d) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(y[i] > 0.0)) d[i] = 0.0;
  }
}

// Additive attention over the P rows of one sample x [P, F]:
//   s_p = v · tanh((W_a + U_a) x_p),  α = softmax(s),  context = Σ_p α_p x_p.
struct AttentionCache {
  std::vector<double> t;      // [P, h] tanh activations
  std::vector<double> alpha;  // [P]
};

inline void attention_forward(std::size_t P, std::size_t F, std::size_t h, std::span<const double> x,
                              std::span<const double> wa, std::span<const double> ua, std::span<const double> va,
                              std::span<double> context, AttentionCache& cache) {
  std::vector<double> wsum(h * F);
  for (std::size_t i = 0; i < wsum.size(); ++i) wsum[i] = wa[i] + ua[i];
  cache.t.assign(P * h, 0.0);
  cache.alpha.assign(P, 0.0);
  double smax = -INFINITY;
  for (std::size_t p = 0; p < P; ++p) {
    const double* xp = x.data() + p * F;
    double s = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      const double* wr = wsum.data() + j * F;
      double u = 0.0;
      for (std::size_t f = 0; f < F; ++f) u += wr[f] * xp[f];
      const double t = std::tanh(u);
      cache.t[p * h + j] = t;
      s += va[j] * t;
    }
    cache.alpha[p] = s;
    smax = std::max(smax, s);
  }
  double z = 0.0;
  for (auto& a : cache.alpha) {
    a = std::exp(a - smax);
    z += a;
  }
  for (auto& a : cache.alpha) a /= z;
  std::fill(context.begin(), context.end(), 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    const double* xp = x.data() + p * F;
    for (std::size_t f = 0; f < F; ++f) context[f] += cache.alpha[p] * xp[f];
  }
}

// Accumulates into dwa/dua/dva and overwrites dx [P, F].
inline void attention_backward(std::size_t P, std::size_t F, std::size_t h, std::span<const double> x,
                               std::span<const double> wa, std::span<const double> ua, std::span<const double> va,
                               const AttentionCache& cache, std::span<const double> dcontext, std::span<double> dwa,
                               std::span<double> dua, std::span<double> dva, std::span<double> dx) {
  std::vector<double> dalpha(P);
  double mean = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    const double* xp = x.data() + p * F;
    double acc = 0.0;
    for (std::size_t f = 0; f < F; ++f) acc += dcontext[f] * xp[f];
    dalpha[p] = acc;
    mean += cache.alpha[p] * acc;
  }
  std::vector<double> du(h);
  for (std::size_t p = 0; p < P; ++p) {
    const double* xp = x.data() + p * F;
    double* dxp = dx.data() + p * F;
    const double a = cache.alpha[p];
    for (std::size_t f = 0; f < F; ++f) dxp[f] = a * dcontext[f];
    const double ds = a * (dalpha[p] - mean);
    const double* tp = cache.t.data() + p * h;
    for (std::size_t j = 0; j < h; ++j) {
      dva[j] += ds * tp[j];
      du[j] = ds * va[j] * (1.0 - tp[j] * tp[j]);
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double g = du[j];
      if (g == 0.0) continue;
      double* dwr = dwa.data() + j * F;
      double* dur = dua.data() + j * F;
      const double* war = wa.data() + j * F;
      const double* uar = ua.data() + j * F;
      for (std::size_t f = 0; f < F; ++f) {
        dwr[f] += g * xp[f];
        dur[f] += g * xp[f];
        dxp[f] += g * (war[f] + uar[f]);
      }
    }
  }
}

}  // namespace wekbp::nn
