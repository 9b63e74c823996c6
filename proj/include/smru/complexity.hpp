// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smru/config.hpp"
#include "smru/weights.hpp"

namespace smru {

struct ModuleCost {
  std::string name;
  double macs_per_s = 0.0;
  uint64_t params = 0;
};

struct ComplexityReport {
  std::string preset;
  int embedding = 0;
  bool postnet_enabled = false;
  std::vector<ModuleCost> modules;
  double total_macs_per_s = 0.0;
  double macs_per_frame = 0.0;  // averaged over full-rate frames
  uint64_t params = 0;
};

// Analytic multiply-accumulate counts. One MAC = one multiply-accumulate in
// a matmul/conv; normalizations, activations and element-wise products are
// excluded. Counts use asymptotic frame rates (100/s at the full rate,
// 100/lambda inside a VR block), which is what makes the report strictly
// monotone in every single lambda.
inline ComplexityReport count_macs(const ModelConfig& cfg) {
  cfg.validate();
  const double R = static_cast<double>(cfg.frames_per_second);
  const double E = static_cast<double>(cfg.embedding);
  const BandLayout layout = compute_band_layout(cfg);
  const double Q = static_cast<double>(layout.Q());
  const double F = static_cast<double>(cfg.freq_bins());
  const double M = static_cast<double>(cfg.active_scales());

  ComplexityReport rep;
  rep.preset = cfg.preset_name;
  rep.embedding = cfg.embedding;
  rep.postnet_enabled = cfg.postnet.enabled;

  uint64_t params_stem = 0, params_split = 0, params_unet = 0, params_merge = 0,
           params_postnet = 0;
  enumerate_parameters(cfg, [&](const ParamSpec& p) {
    const uint64_t n = Tensor::numel_of(p.shape);
    if (p.name.rfind("stem.", 0) == 0)
      params_stem += n;
    else if (p.name.rfind("split.", 0) == 0)
      params_split += n;
    else if (p.name.rfind("block", 0) == 0)
      params_unet += n;
    else if (p.name.rfind("merge.", 0) == 0)
      params_merge += n;
    else if (p.name.rfind("postnet.", 0) == 0)
      params_postnet += n;
  });

  // stem: 8 -> E pointwise-in-time conv with stem_kernel_f frequency taps
  const double stem = 8.0 * E * cfg.stem_kernel_f * F * R;
  rep.modules.push_back({"stem", stem, params_stem});

  // band split: per region, M strided convs E -> E plus the M*E -> E
  // pointwise reduction over Q band positions
  double split = 0.0;
  for (int p = 0; p < cfg.regions; ++p) {
    const double bands = static_cast<double>(region_band_count(cfg, p));
    for (int s = 0; s < cfg.active_scales(); ++s)
      split += E * E * cfg.region_kernels[p][s] * bands * R;
  }
  split += (M * E) * E * Q * R;
  rep.modules.push_back({"band_split", split, params_split});

  // VR blocks. Downsampling is per-channel (depthwise) with kernel lambda;
  // all dual-path work and the per-band upsampling projection run at the
  // compressed rate, which is the 1/lambda complexity lever.
  double unet = 0.0;
  for (int lam_i : cfg.lambda_schedule) {
    const double lam = static_cast<double>(lam_i);
    const double rate = R / lam;
    const double ds = (E * Q) * lam * rate;
    const double gru = Q * (3.0 * (E + E) * E + 3.0 * E) * rate;
    const double fc = Q * E * E * rate;
    const double mlp = (Q * E * (2.0 * E) + E * Q * Q + Q * E * E) * rate;
    const double us = Q * E * E * rate;
    unet += ds + gru + fc + mlp + us;
  }
  rep.modules.push_back({"unet", unet, params_unet});

  // band merge: per band E -> 4E -> 8*w_q per frame
  double merge = Q * E * (cfg.merge_hidden_mult * E) * R;
  merge += (cfg.merge_hidden_mult * E) * 8.0 * F * R;
  rep.modules.push_back({"band_merge", merge, params_merge});

  if (cfg.postnet.enabled) {
    const double H = static_cast<double>(cfg.postnet.hidden);
    double pn = F * H;                                        // input projection
    pn += cfg.postnet.gru_layers * (3.0 * (H + H) * H + 3.0 * H);  // GRU stack
    pn += (H / cfg.postnet.groups) * 2.0 * cfg.postnet.df_order * F;  // grouped head
    pn *= R;
    rep.modules.push_back({"postnet", pn, params_postnet});
  }

  for (const auto& mc : rep.modules) {
    rep.total_macs_per_s += mc.macs_per_s;
    rep.params += mc.params;
  }
  rep.macs_per_frame = rep.total_macs_per_s / R;
  return rep;
}

// Smallest E whose counted MACs meet or exceed `target_macs_per_s`; used to
// pin the S and L presets against their published budgets.
inline int bisect_embedding(double target_macs_per_s, const ModelConfig& base) {
  int lo = 1, hi = 4096;
  auto total = [&](int e) {
    ModelConfig c = base;
    c.embedding = e;
    return count_macs(c).total_macs_per_s;
  };
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (total(mid) < target_macs_per_s)
      lo = mid + 1;
    else
      hi = mid;
  }
  // pick the neighbour that lands closer
  if (lo > 1 && target_macs_per_s - total(lo - 1) < total(lo) - target_macs_per_s)
    return lo - 1;
  return lo;
}

}  // namespace smru
