// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "smru/errors.hpp"
#include "smru/rng.hpp"
#include "smru/tensor.hpp"

namespace smru {

// ---------------------------------------------------------------------------
// Deterministic initialization
// ---------------------------------------------------------------------------

enum class InitScheme { UniformFanIn, Zeros, Ones };

// Values come from SplitMix64 (documented constants in rng.hpp), drawn in
// row-major order, so the same (shape, seed, scheme) reproduces bit-exactly
// everywhere. fan_in = numel / shape[0]; weights are stored [out, in...].
inline Tensor seeded_init(std::vector<std::size_t> shape, uint64_t seed,
                          InitScheme scheme) {
  Tensor t(std::move(shape));
  switch (scheme) {
    case InitScheme::Zeros:
      return t;
    case InitScheme::Ones:
      for (auto& v : t.data) v = 1.0f;
      return t;
    case InitScheme::UniformFanIn: {
      const std::size_t fan_in = t.shape.empty() ? 1 : t.numel() / t.shape[0];
      const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in ? fan_in : 1));
      SplitMix64 rng(seed);
      for (auto& v : t.data) v = rng.uniform(-bound, bound);
      return t;
    }
  }
  throw ConfigError("seeded_init: unknown scheme");
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

// x: [Cin, T, F], kernel: [Cout, Cin, kt, kf], explicit zero padding
// (pt0/pt1 before/after on the time axis, pf0/pf1 on the frequency axis).
// out[co, ot, of] accumulates over (ci, it, if) in fixed order.
inline Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                     std::size_t stride_t, std::size_t stride_f, std::size_t pt0,
                     std::size_t pt1, std::size_t pf0, std::size_t pf1) {
  if (x.rank() != 3 || kernel.rank() != 4) throw ShapeError("conv2d: bad ranks");
  if (stride_t == 0 || stride_f == 0) throw ShapeError("conv2d: stride must be > 0");
  const std::size_t cin = x.dim(0), T = x.dim(1), F = x.dim(2);
  const std::size_t cout = kernel.dim(0), kt = kernel.dim(2), kf = kernel.dim(3);
  if (kernel.dim(1) != cin) throw ShapeError("conv2d: channel mismatch");
  if (bias.numel() != 0 && bias.numel() != cout)
    throw ShapeError("conv2d: bias length mismatch");
  const std::size_t padded_t = T + pt0 + pt1, padded_f = F + pf0 + pf1;
  if (kt > padded_t || kf > padded_f)
    throw ShapeError("conv2d: kernel larger than padded input");
  const std::size_t out_t = (padded_t - kt) / stride_t + 1;
  const std::size_t out_f = (padded_f - kf) / stride_f + 1;

  Tensor out({cout, out_t, out_f});
  for (std::size_t co = 0; co < cout; ++co) {
    const float b = bias.numel() ? bias(co) : 0.0f;
    for (std::size_t ot = 0; ot < out_t; ++ot) {
      for (std::size_t of = 0; of < out_f; ++of) {
        float acc = b;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t it = 0; it < kt; ++it) {
            const std::size_t t_pad = ot * stride_t + it;
            if (t_pad < pt0 || t_pad >= pt0 + T) continue;
            for (std::size_t jf = 0; jf < kf; ++jf) {
              const std::size_t f_pad = of * stride_f + jf;
              if (f_pad < pf0 || f_pad >= pf0 + F) continue;
              acc += kernel(co, ci, it, jf) * x(ci, t_pad - pt0, f_pad - pf0);
            }
          }
        }
        out(co, ot, of) = acc;
      }
    }
  }
  return out;
}

// Non-overlapped causal conv over time, one filter per channel.
// x: [C, T], weights: [C, k], k == s. Output frame j sees input frames
// [j*s, j*s + k), so T' = floor(T/s) and causality holds by construction.
inline Tensor causal_conv1d_time(const Tensor& x, const Tensor& weights,
                                 const Tensor& bias, std::size_t k, std::size_t s) {
  if (x.rank() != 2 || weights.rank() != 2) throw ShapeError("causal_conv1d: bad ranks");
  if (k != s) throw ConfigError("causal_conv1d: kernel must equal stride");
  if (s == 0) throw ShapeError("causal_conv1d: stride must be > 0");
  const std::size_t C = x.dim(0), T = x.dim(1);
  if (weights.dim(0) != C || weights.dim(1) != k)
    throw ShapeError("causal_conv1d: weight shape mismatch");
  if (bias.numel() != 0 && bias.numel() != C)
    throw ShapeError("causal_conv1d: bias length mismatch");
  const std::size_t out_t = T / s;
  Tensor out({C, out_t});
  for (std::size_t c = 0; c < C; ++c) {
    const float b = bias.numel() ? bias(c) : 0.0f;
    for (std::size_t j = 0; j < out_t; ++j) {
      float acc = b;
      for (std::size_t i = 0; i < k; ++i) acc += weights(c, i) * x(c, j * s + i);
      out(c, j) = acc;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Affine + normalization
// ---------------------------------------------------------------------------

// y = W x + b with W: [out, in].
inline void linear(const float* x, const Tensor& w, const Tensor& b, float* y) {
  const std::size_t out = w.dim(0), in = w.dim(1);
  if (b.numel() != 0 && b.numel() != out) throw ShapeError("linear: bias mismatch");
  for (std::size_t o = 0; o < out; ++o) {
    float acc = b.numel() ? b(o) : 0.0f;
    const float* row = w.data.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

inline std::vector<float> linear(const std::vector<float>& x, const Tensor& w,
                                 const Tensor& b) {
  if (w.rank() != 2 || w.dim(1) != x.size()) throw ShapeError("linear: input mismatch");
  std::vector<float> y(w.dim(0));
  linear(x.data(), w, b, y.data());
  return y;
}

struct LayerNormParams {
  Tensor gain;  // [dim]
  Tensor bias;  // [dim]
  std::size_t dim() const { return gain.numel(); }
};

inline constexpr float kLayerNormEps = 1e-5f;

// Zero-mean unit-variance over `dim` values in place, then affine.
inline void layer_norm(const LayerNormParams& p, float* x, std::size_t n) {
  if (n != p.dim()) throw ShapeError("layer_norm: dim mismatch");
  float mean = 0.0f;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<float>(n);
  float var = 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    const float d = x[i] - mean;
    var += d * d;
  }
  var /= static_cast<float>(n);
  const float inv = 1.0f / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = (x[i] - mean) * inv * p.gain(i) + p.bias(i);
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor wz, wr, wn;  // [hidden, input]
  Tensor uz, ur, un;  // [hidden, hidden]
  Tensor bz, br, bn;  // [hidden]

  void check() const {
    const std::vector<std::size_t> wi{hidden_dim, input_dim};
    const std::vector<std::size_t> wh{hidden_dim, hidden_dim};
    require_shape(wz, wi, "gru.wz");
    require_shape(wr, wi, "gru.wr");
    require_shape(wn, wi, "gru.wn");
    require_shape(uz, wh, "gru.uz");
    require_shape(ur, wh, "gru.ur");
    require_shape(un, wh, "gru.un");
    if (bz.numel() != hidden_dim || br.numel() != hidden_dim || bn.numel() != hidden_dim)
      throw ShapeError("gru: bias length mismatch");
  }
};

inline float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br),
// n = tanh(Wn x + r .* (Un h) + bn), h' = z .* h + (1 - z) .* n.
inline void gru_step(const GruParams& p, const float* x, float* h) {
  const std::size_t H = p.hidden_dim, I = p.input_dim;
  std::vector<float> z(H), r(H), n(H);
  for (std::size_t o = 0; o < H; ++o) {
    float az = p.bz(o), ar = p.br(o);
    const float* wzr = p.wz.data.data() + o * I;
    const float* wrr = p.wr.data.data() + o * I;
    for (std::size_t i = 0; i < I; ++i) {
      az += wzr[i] * x[i];
      ar += wrr[i] * x[i];
    }
    const float* uzr = p.uz.data.data() + o * H;
    const float* urr = p.ur.data.data() + o * H;
    for (std::size_t i = 0; i < H; ++i) {
      az += uzr[i] * h[i];
      ar += urr[i] * h[i];
    }
    z[o] = sigmoidf(az);
    r[o] = sigmoidf(ar);
  }
  for (std::size_t o = 0; o < H; ++o) {
    float an = p.bn(o);
    const float* wnr = p.wn.data.data() + o * I;
    for (std::size_t i = 0; i < I; ++i) an += wnr[i] * x[i];
    float uh = 0.0f;
    const float* unr = p.un.data.data() + o * H;
    for (std::size_t i = 0; i < H; ++i) uh += unr[i] * h[i];
    n[o] = std::tanh(an + r[o] * uh);
  }
  for (std::size_t o = 0; o < H; ++o) h[o] = z[o] * h[o] + (1.0f - z[o]) * n[o];
}

// Full sequence; x is [T, input_dim] flattened, returns [T, hidden_dim].
inline std::vector<float> gru_forward(const GruParams& p, const float* x, std::size_t T,
                                      const std::vector<float>& h0) {
  p.check();
  if (h0.size() != p.hidden_dim) throw ShapeError("gru_forward: h0 length mismatch");
  std::vector<float> h = h0;
  std::vector<float> out(T * p.hidden_dim);
  for (std::size_t t = 0; t < T; ++t) {
    gru_step(p, x + t * p.input_dim, h.data());
    for (std::size_t o = 0; o < p.hidden_dim; ++o) out[t * p.hidden_dim + o] = h[o];
  }
  return out;
}

}  // namespace smru
