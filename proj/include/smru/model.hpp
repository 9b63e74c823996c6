// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "smru/config.hpp"
#include "smru/errors.hpp"
#include "smru/nn.hpp"
#include "smru/stft.hpp"
#include "smru/weights.hpp"

namespace smru {

// ---------------------------------------------------------------------------
// Input stacking: real/imag planes of {d, x, e, y} on the channel axis.
// Channel order: d_re, d_im, x_re, x_im, e_re, e_im, y_re, y_im.
// ---------------------------------------------------------------------------

inline Tensor make_input_stack(const Spectrogram& d, const Spectrogram& x,
                               const Spectrogram& e, const Spectrogram& y) {
  if (d.T != x.T || d.T != e.T || d.T != y.T || d.F != x.F || d.F != e.F || d.F != y.F)
    throw ShapeError("input stack: spectrogram shapes differ");
  Tensor I({8, d.T, d.F});
  const Spectrogram* src[4] = {&d, &x, &e, &y};
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t t = 0; t < d.T; ++t)
      for (std::size_t f = 0; f < d.F; ++f) {
        const cfloat v = src[s]->at(t, f);
        I(2 * s, t, f) = v.real();
        I(2 * s + 1, t, f) = v.imag();
      }
  return I;
}

// ---------------------------------------------------------------------------
// Compiled weights: tensors pulled out of the store and organized per module.
// ---------------------------------------------------------------------------

struct VrBlockWeights {
  int lambda = 1;
  LayerNormParams norm_in;  // cross-scale input norm, full frame rate
  Tensor ds_w, ds_b;        // [Q*E, lambda], [Q*E]
  LayerNormParams rnn_norm;
  GruParams gru;
  Tensor fc_w, fc_b;  // [E, E], [E]
  Tensor mlp_in_w, mlp_in_b;  // [2E, E], [2E]
  LayerNormParams mlp_norm;
  Tensor band_w, band_b;      // [Q, Q], [Q]
  Tensor mlp_out_w, mlp_out_b;  // [E, E], [E]
  Tensor us_w, us_b, us_h0;   // [Q*E, E], [Q*E], [Q*E]
};

struct MergeBandWeights {
  LayerNormParams norm;
  Tensor l1_w, l1_b;  // [hid, E]
  Tensor l2_w, l2_b;  // [8*w_q, hid]
  int width = 0;
  int bin_base = 0;
};

struct PostnetWeights {
  Tensor in_w, in_b;
  std::vector<GruParams> grus;
  struct Group {
    Tensor w, b;
    int width = 0;
    int bin_base = 0;
  };
  std::vector<Group> out;
};

struct CompiledModel {
  ModelConfig cfg;
  BandLayout layout;
  int E = 0, Q = 0, F = 0;

  Tensor stem_w, stem_b;
  std::vector<std::vector<Tensor>> split_w, split_b;  // [region][scale]
  Tensor reduce_w, reduce_b;
  LayerNormParams split_norm;
  std::vector<VrBlockWeights> blocks;
  std::vector<MergeBandWeights> merge;
  PostnetWeights postnet;
};

inline CompiledModel compile_model(const ModelConfig& cfg, const WeightStore& store) {
  cfg.validate();
  CompiledModel m;
  m.cfg = cfg;
  m.layout = compute_band_layout(cfg);
  m.E = cfg.embedding;
  m.Q = m.layout.Q();
  m.F = cfg.freq_bins();

  enumerate_parameters(cfg, [&](const ParamSpec& p) {
    if (!store.has(p.name)) throw ConfigError("weights missing tensor '" + p.name + "'");
    if (store.get(p.name).shape != p.shape)
      throw ShapeError("weights: shape mismatch for '" + p.name + "'");
  });

  auto get = [&](const std::string& n) { return store.get(n); };
  auto get_norm = [&](const std::string& base) {
    LayerNormParams p;
    p.gain = get(base + ".gain");
    p.bias = get(base + ".bias");
    return p;
  };

  m.stem_w = get("stem.w");
  m.stem_b = get("stem.b");
  m.split_w.resize(cfg.regions);
  m.split_b.resize(cfg.regions);
  for (int p = 0; p < cfg.regions; ++p)
    for (int s = 0; s < cfg.active_scales(); ++s) {
      const std::string base = "split.r" + std::to_string(p) + ".s" + std::to_string(s);
      m.split_w[p].push_back(get(base + ".w"));
      m.split_b[p].push_back(get(base + ".b"));
    }
  m.reduce_w = get("split.reduce.w");
  m.reduce_b = get("split.reduce.b");
  m.split_norm = get_norm("split.norm");

  for (int j = 0; j < cfg.num_blocks(); ++j) {
    const std::string b = "block" + std::to_string(j);
    VrBlockWeights bw;
    bw.lambda = cfg.lambda_schedule[j];
    bw.norm_in = get_norm(b + ".norm_in");
    bw.ds_w = get(b + ".ds.w");
    bw.ds_b = get(b + ".ds.b");
    bw.rnn_norm = get_norm(b + ".rnn.norm");
    bw.gru.input_dim = bw.gru.hidden_dim = static_cast<std::size_t>(m.E);
    bw.gru.wz = get(b + ".rnn.gru.wz");
    bw.gru.wr = get(b + ".rnn.gru.wr");
    bw.gru.wn = get(b + ".rnn.gru.wn");
    bw.gru.uz = get(b + ".rnn.gru.uz");
    bw.gru.ur = get(b + ".rnn.gru.ur");
    bw.gru.un = get(b + ".rnn.gru.un");
    bw.gru.bz = get(b + ".rnn.gru.bz");
    bw.gru.br = get(b + ".rnn.gru.br");
    bw.gru.bn = get(b + ".rnn.gru.bn");
    bw.fc_w = get(b + ".rnn.fc.w");
    bw.fc_b = get(b + ".rnn.fc.b");
    bw.mlp_in_w = get(b + ".mlp.in.w");
    bw.mlp_in_b = get(b + ".mlp.in.b");
    bw.mlp_norm = get_norm(b + ".mlp.norm");
    bw.band_w = get(b + ".mlp.band.w");
    bw.band_b = get(b + ".mlp.band.b");
    bw.mlp_out_w = get(b + ".mlp.out.w");
    bw.mlp_out_b = get(b + ".mlp.out.b");
    bw.us_w = get(b + ".us.w");
    bw.us_b = get(b + ".us.b");
    bw.us_h0 = get(b + ".us.h0");
    m.blocks.push_back(std::move(bw));
  }

  int base = 0;
  for (int q = 0; q < m.Q; ++q) {
    const std::string b = "merge.b" + std::to_string(q);
    MergeBandWeights mw;
    mw.norm = get_norm(b + ".norm");
    mw.l1_w = get(b + ".l1.w");
    mw.l1_b = get(b + ".l1.b");
    mw.l2_w = get(b + ".l2.w");
    mw.l2_b = get(b + ".l2.b");
    mw.width = m.layout.widths[q];
    mw.bin_base = base;
    base += mw.width;
    m.merge.push_back(std::move(mw));
  }

  if (cfg.postnet.enabled) {
    m.postnet.in_w = get("postnet.in.w");
    m.postnet.in_b = get("postnet.in.b");
    for (int l = 0; l < cfg.postnet.gru_layers; ++l) {
      const std::string b = "postnet.gru" + std::to_string(l);
      GruParams g;
      g.input_dim = g.hidden_dim = static_cast<std::size_t>(cfg.postnet.hidden);
      g.wz = get(b + ".wz");
      g.wr = get(b + ".wr");
      g.wn = get(b + ".wn");
      g.uz = get(b + ".uz");
      g.ur = get(b + ".ur");
      g.un = get(b + ".un");
      g.bz = get(b + ".bz");
      g.br = get(b + ".br");
      g.bn = get(b + ".bn");
      m.postnet.grus.push_back(std::move(g));
    }
    const auto widths = postnet_freq_groups(cfg);
    int fb = 0;
    for (std::size_t g = 0; g < widths.size(); ++g) {
      const std::string b = "postnet.out.g" + std::to_string(g);
      PostnetWeights::Group grp;
      grp.w = get(b + ".w");
      grp.b = get(b + ".b");
      grp.width = widths[g];
      grp.bin_base = fb;
      fb += widths[g];
      m.postnet.out.push_back(std::move(grp));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Dry-run shape inference: every intermediate shape from the config alone.
// ---------------------------------------------------------------------------

struct ShapePlan {
  std::vector<std::size_t> input_stack;  // [8, T, F]
  std::vector<std::size_t> stem;         // [E, T, F]
  std::vector<std::size_t> split;        // [E, T, Q]
  struct BlockShapes {
    std::vector<std::size_t> compressed;  // [E, floor(T/lambda), Q]
    std::vector<std::size_t> output;      // [E, T, Q]
  };
  std::vector<BlockShapes> blocks;
  std::vector<std::size_t> merge;      // [8, T, F]
  std::vector<std::size_t> df_coeffs;  // [T, F, df_order] (postnet only)
};

inline ShapePlan shape_inference(const ModelConfig& cfg, std::size_t T) {
  cfg.validate();
  const std::size_t E = static_cast<std::size_t>(cfg.embedding);
  const std::size_t F = static_cast<std::size_t>(cfg.freq_bins());
  const std::size_t Q = static_cast<std::size_t>(compute_band_layout(cfg).Q());
  ShapePlan plan;
  plan.input_stack = {8, T, F};
  plan.stem = {E, T, F};
  plan.split = {E, T, Q};
  for (int lam : cfg.lambda_schedule)
    plan.blocks.push_back({{E, T / static_cast<std::size_t>(lam), Q}, {E, T, Q}});
  plan.merge = {8, T, F};
  if (cfg.postnet.enabled)
    plan.df_coeffs = {T, F, static_cast<std::size_t>(cfg.postnet.df_order)};
  return plan;
}

// ---------------------------------------------------------------------------
// Frame packing. Packed vectors use channel c = q * E + e.
// ---------------------------------------------------------------------------

inline std::vector<float> pack_frame(const Tensor& z, std::size_t t) {
  const std::size_t E = z.dim(0), Q = z.dim(2);
  std::vector<float> v(Q * E);
  for (std::size_t q = 0; q < Q; ++q)
    for (std::size_t e = 0; e < E; ++e) v[q * E + e] = z(e, t, q);
  return v;
}

inline void unpack_frame(const std::vector<float>& v, Tensor& z, std::size_t t) {
  const std::size_t E = z.dim(0), Q = z.dim(2);
  for (std::size_t q = 0; q < Q; ++q)
    for (std::size_t e = 0; e < E; ++e) z(e, t, q) = v[q * E + e];
}

// Layer norm over the channel axis of a [C, T, Q] tensor, one vector per
// (t, q) position. Matches the per-frame gather used by the streaming path.
inline void norm_channels(Tensor& z, const LayerNormParams& p) {
  const std::size_t C = z.dim(0), T = z.dim(1), Q = z.dim(2);
  std::vector<float> tmp(C);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t q = 0; q < Q; ++q) {
      for (std::size_t c = 0; c < C; ++c) tmp[c] = z(c, t, q);
      layer_norm(p, tmp.data(), C);
      for (std::size_t c = 0; c < C; ++c) z(c, t, q) = tmp[c];
    }
}

// ---------------------------------------------------------------------------
// Stem and band split
// ---------------------------------------------------------------------------

inline Tensor stem_forward(const Tensor& input_stack, const CompiledModel& m) {
  const std::size_t kf = m.stem_w.dim(3);
  const std::size_t pf0 = (kf - 1) / 2, pf1 = kf - 1 - pf0;
  return conv2d(input_stack, m.stem_w, m.stem_b, 1, 1, 0, 0, pf0, pf1);
}

// Multi-scale split: per region, M strided convolutions concatenated on the
// channel axis, regions concatenated on the band axis, then a pointwise
// reduction M*E -> E. Norm is applied by band_split below.
inline Tensor band_split_prenorm(const Tensor& stem_out, const CompiledModel& m) {
  const auto& cfg = m.cfg;
  const std::size_t E = static_cast<std::size_t>(m.E);
  const std::size_t T = stem_out.dim(1);
  if (stem_out.dim(0) != E || stem_out.dim(2) != static_cast<std::size_t>(m.F))
    throw ShapeError("band_split: unexpected stem output shape");
  const std::size_t M = static_cast<std::size_t>(cfg.active_scales());
  const std::size_t Q = static_cast<std::size_t>(m.Q);

  Tensor stacked({M * E, T, Q});
  std::size_t band_base = 0, bin_base = 0;
  for (int p = 0; p < cfg.regions; ++p) {
    const std::size_t bins = static_cast<std::size_t>(cfg.region_bins[p]);
    const std::size_t bands = static_cast<std::size_t>(region_band_count(cfg, p));
    Tensor region({E, T, bins});
    for (std::size_t e = 0; e < E; ++e)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t f = 0; f < bins; ++f)
          region(e, t, f) = stem_out(e, t, bin_base + f);
    for (std::size_t s = 0; s < M; ++s) {
      const std::size_t pad = static_cast<std::size_t>(region_pad_right(cfg, p, static_cast<int>(s)));
      Tensor out = conv2d(region, m.split_w[p][s], m.split_b[p][s], 1,
                          static_cast<std::size_t>(cfg.freq_strides[p]), 0, 0, 0, pad);
      if (out.dim(2) != bands) throw ShapeError("band_split: band count mismatch");
      for (std::size_t e = 0; e < E; ++e)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t q = 0; q < bands; ++q)
            stacked(s * E + e, t, band_base + q) = out(e, t, q);
    }
    band_base += bands;
    bin_base += bins;
  }
  if (band_base != Q) throw ShapeError("band_split: layout mismatch");

  return conv2d(stacked, m.reduce_w, m.reduce_b, 1, 1, 0, 0, 0, 0);  // [E, T, Q]
}

inline Tensor band_split(const Tensor& stem_out, const CompiledModel& m) {
  Tensor reduced = band_split_prenorm(stem_out, m);
  norm_channels(reduced, m.split_norm);
  return reduced;
}

// ---------------------------------------------------------------------------
// VR block internals (shared frame kernels)
// ---------------------------------------------------------------------------

// Gated band shuffler on one compressed frame (packed [Q*E]); returns the
// MLP output before the residual add.
inline std::vector<float> interband_frame(const VrBlockWeights& bw, std::size_t Q,
                                          std::size_t E, const std::vector<float>& z) {
  std::vector<float> u(Q * E), v(Q * E), proj(2 * E);
  for (std::size_t q = 0; q < Q; ++q) {
    linear(z.data() + q * E, bw.mlp_in_w, bw.mlp_in_b, proj.data());
    for (std::size_t e = 0; e < E; ++e) {
      u[q * E + e] = proj[e];
      v[q * E + e] = proj[E + e];
    }
  }
  for (std::size_t q = 0; q < Q; ++q) layer_norm(bw.mlp_norm, v.data() + q * E, E);
  // band projection: one Q x Q map shared across channels, then gate
  std::vector<float> gated(Q * E);
  for (std::size_t e = 0; e < E; ++e) {
    for (std::size_t q = 0; q < Q; ++q) {
      float acc = bw.band_b(q);
      for (std::size_t q2 = 0; q2 < Q; ++q2) acc += bw.band_w(q, q2) * v[q2 * E + e];
      gated[q * E + e] = u[q * E + e] * acc;
    }
  }
  std::vector<float> out(Q * E);
  for (std::size_t q = 0; q < Q; ++q)
    linear(gated.data() + q * E, bw.mlp_out_w, bw.mlp_out_b, out.data() + q * E);
  return out;
}

// Per-band pointwise projection used by the upsampler. Input and output are
// packed [Q*E]; row q*E+eo of us_w maps band q's embedding.
inline std::vector<float> us_apply(const VrBlockWeights& bw, std::size_t Q, std::size_t E,
                                   const std::vector<float>& z) {
  std::vector<float> img(Q * E);
  for (std::size_t q = 0; q < Q; ++q)
    for (std::size_t eo = 0; eo < E; ++eo) {
      const std::size_t c = q * E + eo;
      float acc = bw.us_b(c);
      const float* row = bw.us_w.data.data() + c * E;
      for (std::size_t i = 0; i < E; ++i) acc += row[i] * z[q * E + i];
      img[c] = acc;
    }
  return img;
}

// Intra-band GRU + inter-band MLP with residuals on one compressed frame.
// `gru_h` is the packed per-band hidden state, updated in place.
inline std::vector<float> vr_dual_path_frame(const VrBlockWeights& bw, std::size_t Q,
                                             std::size_t E, const std::vector<float>& cf,
                                             std::vector<float>& gru_h) {
  std::vector<float> z1(Q * E), tmp(E), fc_out(E);
  for (std::size_t q = 0; q < Q; ++q) {
    for (std::size_t e = 0; e < E; ++e) tmp[e] = cf[q * E + e];
    layer_norm(bw.rnn_norm, tmp.data(), E);
    gru_step(bw.gru, tmp.data(), gru_h.data() + q * E);
    linear(gru_h.data() + q * E, bw.fc_w, bw.fc_b, fc_out.data());
    for (std::size_t e = 0; e < E; ++e) z1[q * E + e] = cf[q * E + e] + fc_out[e];
  }
  std::vector<float> z2 = interband_frame(bw, Q, E, z1);
  for (std::size_t i = 0; i < Q * E; ++i) z2[i] += z1[i];
  return z2;
}

// Dual-path step plus the upsampler projection; the streaming engine caches
// the returned image until the next compressed frame completes.
inline std::vector<float> vr_compressed_step(const VrBlockWeights& bw, std::size_t Q,
                                             std::size_t E, const std::vector<float>& cf,
                                             std::vector<float>& gru_h) {
  return us_apply(bw, Q, E, vr_dual_path_frame(bw, Q, E, cf, gru_h));
}

// Causal time compression: embedding and band axes merged into Q*E channels,
// per-channel conv with kernel == stride == lambda. T' = floor(T / lambda);
// T < lambda legally yields an empty map.
inline Tensor time_downsample(const Tensor& z, const Tensor& ds_w, const Tensor& ds_b,
                              int lambda) {
  const std::size_t E = z.dim(0), T = z.dim(1), Q = z.dim(2);
  Tensor packed({Q * E, T});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t q = 0; q < Q; ++q)
      for (std::size_t e = 0; e < E; ++e) packed(q * E + e, t) = z(e, t, q);
  const Tensor cf = causal_conv1d_time(packed, ds_w, ds_b,
                                       static_cast<std::size_t>(lambda),
                                       static_cast<std::size_t>(lambda));
  Tensor out({E, cf.dim(1), Q});
  for (std::size_t t = 0; t < cf.dim(1); ++t)
    for (std::size_t q = 0; q < Q; ++q)
      for (std::size_t e = 0; e < E; ++e) out(e, t, q) = cf(q * E + e, t);
  return out;
}

// Most recent fully completed compressed frame visible at output frame t
// (-1 while none exists yet).
inline long us_source_index(std::size_t t, int lambda) {
  return static_cast<long>((t + 1) / static_cast<std::size_t>(lambda)) - 1;
}

// Zero-order-hold prediction back to the full frame rate: each compressed
// frame is projected once per band and held for the next lambda output
// frames; a learned zero-history vector stands in before the first
// compressed frame completes. Strictly causal with no added latency.
inline Tensor time_upsample(const Tensor& zc, const VrBlockWeights& bw, int lambda,
                            std::size_t t_target) {
  const std::size_t E = zc.dim(0), Tp = zc.dim(1), Q = zc.dim(2);
  if (Tp != t_target / static_cast<std::size_t>(lambda))
    throw ShapeError("time_upsample: T' does not match floor(T/lambda)");
  std::vector<std::vector<float>> images;
  images.reserve(Tp);
  for (std::size_t k = 0; k < Tp; ++k) images.push_back(us_apply(bw, Q, E, pack_frame(zc, k)));
  std::vector<float> h0(bw.us_h0.data.begin(), bw.us_h0.data.end());
  const std::vector<float> init_image = us_apply(bw, Q, E, h0);

  Tensor out({E, t_target, Q});
  for (std::size_t t = 0; t < t_target; ++t) {
    const long k = us_source_index(t, lambda);
    const std::vector<float>& img = (k < 0) ? init_image : images[static_cast<std::size_t>(k)];
    unpack_frame(img, out, t);
  }
  return out;
}

// Full VR block on a [E, T, Q] feature map: causal time downsampling by
// lambda, intra-band GRU, inter-band MLP, zero-order-hold upsampling back to
// T frames. Output frame t depends only on input frames <= t.
inline Tensor vr_block_forward(const Tensor& z, const VrBlockWeights& bw) {
  const std::size_t E = z.dim(0), T = z.dim(1), Q = z.dim(2);
  Tensor zc = time_downsample(z, bw.ds_w, bw.ds_b, bw.lambda);
  const std::size_t Tp = zc.dim(1);
  std::vector<float> gru_h(Q * E, 0.0f);
  for (std::size_t k = 0; k < Tp; ++k) {
    const auto z2 = vr_dual_path_frame(bw, Q, E, pack_frame(zc, k), gru_h);
    unpack_frame(z2, zc, k);
  }
  return time_upsample(zc, bw, bw.lambda, T);
}

// ---------------------------------------------------------------------------
// Recurrent UNet with dense cross-scale sums
// ---------------------------------------------------------------------------

struct UnetTrace {
  std::vector<Tensor> block_inputs;   // post-norm inputs
  std::vector<Tensor> block_outputs;
  std::vector<Tensor> pre_norm_sums;  // running sums fed to each input norm
};

inline Tensor unet_forward(const Tensor& H, const CompiledModel& m,
                           UnetTrace* trace = nullptr) {
  const int n = m.cfg.num_blocks();
  Tensor sum = H;
  Tensor prev_out;
  std::vector<Tensor> outs;
  Tensor U;
  for (int j = 0; j < n; ++j) {
    Tensor in;
    if (m.cfg.cross_scale) {
      in = sum;
    } else {
      in = (j == 0) ? H : prev_out;
      if (j >= n / 2) {
        const Tensor& mirror = outs[static_cast<std::size_t>(n - 1 - j)];
        for (std::size_t i = 0; i < in.numel(); ++i) in.data[i] += mirror.data[i];
      }
    }
    if (trace) trace->pre_norm_sums.push_back(in);
    norm_channels(in, m.blocks[j].norm_in);
    if (trace) trace->block_inputs.push_back(in);
    Tensor out = vr_block_forward(in, m.blocks[j]);
    if (trace) trace->block_outputs.push_back(out);
    if (m.cfg.cross_scale)
      for (std::size_t i = 0; i < sum.numel(); ++i) sum.data[i] += out.data[i];
    else
      outs.push_back(out);
    prev_out = out;
    if (j == n - 1) U = std::move(out);
  }
  return U;
}

// ---------------------------------------------------------------------------
// Band merge, mask application, deep filtering
// ---------------------------------------------------------------------------

// One frame of mask estimation: packed [Q*E] feature -> [8*F] mask values
// (channel-major per band: g[c][bin]).
inline void merge_frame(const CompiledModel& m, const float* u_packed, float* g_frame) {
  const std::size_t E = static_cast<std::size_t>(m.E);
  const std::size_t F = static_cast<std::size_t>(m.F);
  std::vector<float> band(E);
  for (std::size_t q = 0; q < m.merge.size(); ++q) {
    const MergeBandWeights& mw = m.merge[q];
    for (std::size_t e = 0; e < E; ++e) band[e] = u_packed[q * E + e];
    layer_norm(mw.norm, band.data(), E);
    std::vector<float> hid(mw.l1_w.dim(0));
    linear(band.data(), mw.l1_w, mw.l1_b, hid.data());
    for (auto& h : hid) h = std::tanh(h);
    std::vector<float> out(mw.l2_w.dim(0));
    linear(hid.data(), mw.l2_w, mw.l2_b, out.data());
    const std::size_t w = static_cast<std::size_t>(mw.width);
    for (std::size_t c = 0; c < 8; ++c)
      for (std::size_t b = 0; b < w; ++b)
        g_frame[c * F + static_cast<std::size_t>(mw.bin_base) + b] = out[c * w + b];
  }
}

inline Tensor band_merge(const Tensor& U, const CompiledModel& m) {
  const std::size_t T = U.dim(1);
  if (U.dim(0) != static_cast<std::size_t>(m.E) || U.dim(2) != static_cast<std::size_t>(m.Q))
    throw ShapeError("band_merge: feature shape mismatch");
  Tensor G({8, T, static_cast<std::size_t>(m.F)});
  std::vector<float> g_frame(8 * static_cast<std::size_t>(m.F));
  for (std::size_t t = 0; t < T; ++t) {
    const auto u = pack_frame(U, t);
    merge_frame(m, u.data(), g_frame.data());
    for (std::size_t c = 0; c < 8; ++c)
      for (std::size_t f = 0; f < static_cast<std::size_t>(m.F); ++f)
        G(c, t, f) = g_frame[c * m.F + f];
  }
  return G;
}

// Filter-and-sum: the 8 channels are read as 4 complex planes and each input
// spectrum is multiplied by its complex mask, summed per bin.
inline void mask_frame(const float* i_frame, const float* g_frame, std::size_t F,
                       cfloat* out_row) {
  for (std::size_t f = 0; f < F; ++f) {
    cfloat acc(0, 0);
    for (std::size_t c = 0; c < 4; ++c) {
      const cfloat iv(i_frame[2 * c * F + f], i_frame[(2 * c + 1) * F + f]);
      const cfloat gv(g_frame[2 * c * F + f], g_frame[(2 * c + 1) * F + f]);
      acc += iv * gv;
    }
    out_row[f] = acc;
  }
}

inline Spectrogram apply_mask(const Tensor& input_stack, const Tensor& G) {
  if (input_stack.shape != G.shape) throw ShapeError("apply_mask: shape mismatch");
  const std::size_t T = input_stack.dim(1), F = input_stack.dim(2);
  Spectrogram out(T, F);
  std::vector<float> i_frame(8 * F), g_frame(8 * F);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < 8; ++c)
      for (std::size_t f = 0; f < F; ++f) {
        i_frame[c * F + f] = input_stack(c, t, f);
        g_frame[c * F + f] = G(c, t, f);
      }
    mask_frame(i_frame.data(), g_frame.data(), F, out.row(t));
  }
  return out;
}

// Per-frame, per-bin causal complex FIR taps.
struct DeepFilterCoeffs {
  std::size_t T = 0, F = 0, L = 0;
  std::vector<cfloat> v;

  DeepFilterCoeffs() = default;
  DeepFilterCoeffs(std::size_t t, std::size_t f, std::size_t l)
      : T(t), F(f), L(l), v(t * f * l, cfloat(0, 0)) {}
  cfloat& at(std::size_t t, std::size_t f, std::size_t l) { return v[(t * F + f) * L + l]; }
  cfloat at(std::size_t t, std::size_t f, std::size_t l) const { return v[(t * F + f) * L + l]; }
};

struct PostnetState {
  std::vector<std::vector<float>> h;  // one hidden vector per GRU layer
};

inline PostnetState postnet_state_init(const CompiledModel& m) {
  PostnetState st;
  for (std::size_t l = 0; l < m.postnet.grus.size(); ++l)
    st.h.emplace_back(static_cast<std::size_t>(m.cfg.postnet.hidden), 0.0f);
  return st;
}

// One frame of tap estimation: log1p magnitude features -> input projection
// -> stacked GRUs -> frequency-grouped linear head.
inline void postnet_frame(const CompiledModel& m, const cfloat* s1_row, PostnetState& st,
                          cfloat* taps_row /* [F * L] */) {
  const std::size_t F = static_cast<std::size_t>(m.F);
  const std::size_t H = static_cast<std::size_t>(m.cfg.postnet.hidden);
  const std::size_t L = static_cast<std::size_t>(m.cfg.postnet.df_order);
  std::vector<float> feats(F);
  for (std::size_t f = 0; f < F; ++f) feats[f] = std::log1p(std::abs(s1_row[f]));
  std::vector<float> x(H);
  linear(feats.data(), m.postnet.in_w, m.postnet.in_b, x.data());
  for (std::size_t l = 0; l < m.postnet.grus.size(); ++l) {
    gru_step(m.postnet.grus[l], x.data(), st.h[l].data());
    x = st.h[l];
  }
  const std::size_t gh = H / static_cast<std::size_t>(m.cfg.postnet.groups);
  for (std::size_t g = 0; g < m.postnet.out.size(); ++g) {
    const auto& grp = m.postnet.out[g];
    std::vector<float> out(grp.w.dim(0));
    linear(x.data() + g * gh, grp.w, grp.b, out.data());
    for (int fl = 0; fl < grp.width; ++fl)
      for (std::size_t l = 0; l < L; ++l) {
        const std::size_t base = (static_cast<std::size_t>(fl) * L + l) * 2;
        taps_row[(static_cast<std::size_t>(grp.bin_base + fl)) * L + l] =
            cfloat(out[base], out[base + 1]);
      }
  }
}

inline DeepFilterCoeffs postnet_forward(const Spectrogram& s1, const CompiledModel& m) {
  if (!m.cfg.postnet.enabled) throw ConfigError("postnet_forward: postnet disabled");
  if (s1.F != static_cast<std::size_t>(m.F)) throw ShapeError("postnet: bin mismatch");
  DeepFilterCoeffs c(s1.T, s1.F, static_cast<std::size_t>(m.cfg.postnet.df_order));
  PostnetState st = postnet_state_init(m);
  for (std::size_t t = 0; t < s1.T; ++t)
    postnet_frame(m, s1.row(t), st, c.v.data() + t * s1.F * c.L);
  return c;
}

// S_hat[t,f] = sum_l c[t][f][l] * S1[t-l, f]; history before t=0 is zero.
inline Spectrogram deep_filter(const Spectrogram& s1, const DeepFilterCoeffs& c) {
  if (c.T != s1.T || c.F != s1.F) throw ShapeError("deep_filter: shape mismatch");
  Spectrogram out(s1.T, s1.F);
  for (std::size_t t = 0; t < s1.T; ++t)
    for (std::size_t f = 0; f < s1.F; ++f) {
      cfloat acc(0, 0);
      for (std::size_t l = 0; l < c.L && l <= t; ++l)
        acc += c.at(t, f, l) * s1.at(t - l, f);
      out.at(t, f) = acc;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Full offline forward
// ---------------------------------------------------------------------------

struct ForwardDebug {
  Tensor H, U, G;
  Spectrogram s1;
};

inline Spectrogram smru_forward(const Spectrogram& d, const Spectrogram& x,
                                const Spectrogram& e, const Spectrogram& y,
                                const CompiledModel& m, ForwardDebug* dbg = nullptr) {
  const Tensor I = make_input_stack(d, x, e, y);
  const Tensor R = stem_forward(I, m);
  Tensor H = band_split(R, m);
  if (dbg) dbg->H = H;
  Tensor U = unet_forward(H, m);
  if (dbg) dbg->U = U;
  Tensor G = band_merge(U, m);
  if (dbg) dbg->G = G;
  Spectrogram s1 = apply_mask(I, G);
  if (dbg) dbg->s1 = s1;
  if (!m.cfg.postnet.enabled) return s1;
  const DeepFilterCoeffs c = postnet_forward(s1, m);
  return deep_filter(s1, c);
}

}  // namespace smru
