// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "smru/errors.hpp"
#include "smru/rng.hpp"

namespace smru {

struct PostnetConfig {
  bool enabled = true;
  int gru_layers = 2;
  int hidden = 144;
  int groups = 8;
  int df_order = 5;
};

// Full architecture hyperparameters. The defaults realize the 16 kHz /
// 161-bin configuration; presets only vary the embedding width.
struct ModelConfig {
  std::string preset_name = "custom";
  int embedding = 10;  // E

  // Frequency split: three regions (low/mid/high) with per-region
  // multi-scale kernel sets, all time extent 1.
  int regions = 3;
  std::array<int, 3> region_bins{20, 60, 81};
  std::array<int, 3> freq_strides{4, 10, 20};
  std::array<std::array<int, 3>, 3> region_kernels{{{4, 8, 12}, {10, 20, 30}, {20, 30, 40}}};
  int scales = 3;  // M (1 when multi_scale is off)

  int stem_kernel_f = 21;  // frequency context of the input conv, time extent 1

  std::vector<int> lambda_schedule{1, 2, 4, 8, 16, 32, 32, 16, 8, 4, 2, 1};

  bool multi_scale = true;
  bool cross_scale = true;
  int merge_hidden_mult = 4;

  PostnetConfig postnet;

  int frames_per_second = 100;

  int freq_bins() const { return region_bins[0] + region_bins[1] + region_bins[2]; }
  int num_blocks() const { return static_cast<int>(lambda_schedule.size()); }
  int active_scales() const { return multi_scale ? scales : 1; }

  void validate() const {
    if (embedding <= 0) throw ConfigError("config: embedding must be positive");
    if (freq_bins() != 161) throw ConfigError("config: region bins must sum to 161");
    const int n = num_blocks();
    if (n == 0 || n % 2 != 0) throw ConfigError("config: block count must be even");
    for (int j = 0; j < n; ++j) {
      if (lambda_schedule[j] < 1) throw ConfigError("config: lambda must be >= 1");
      if (lambda_schedule[j] != lambda_schedule[n - 1 - j])
        throw ConfigError("config: lambda schedule must be palindromic");
      if (j > 0 && j < n / 2 && lambda_schedule[j] < lambda_schedule[j - 1])
        throw ConfigError("config: encoder lambdas must be non-decreasing");
    }
    for (int p = 0; p < regions; ++p) {
      if (freq_strides[p] <= 0) throw ConfigError("config: stride must be positive");
      for (int m = 0; m < active_scales(); ++m)
        if (region_kernels[p][m] < freq_strides[p])
          throw ConfigError("config: kernel smaller than stride");
    }
    if (postnet.enabled) {
      if (postnet.hidden % postnet.groups != 0)
        throw ConfigError("config: postnet hidden must divide into groups");
      if (postnet.df_order < 1) throw ConfigError("config: df_order must be >= 1");
    }
  }
};

// Sub-band geometry implied by the split config. Band q of region p covers
// min(stride, remaining) original bins; the default layout is
// 5x4 + 6x10 + (20,20,20,20,1) = 16 bands over 161 bins.
struct BandLayout {
  std::vector<int> widths;       // original bins recovered by each band
  std::vector<int> band_region;  // region index per band
  int Q() const { return static_cast<int>(widths.size()); }
};

inline BandLayout compute_band_layout(const ModelConfig& cfg) {
  BandLayout layout;
  for (int p = 0; p < cfg.regions; ++p) {
    int remaining = cfg.region_bins[p];
    while (remaining > 0) {
      const int w = std::min(cfg.freq_strides[p], remaining);
      layout.widths.push_back(w);
      layout.band_region.push_back(p);
      remaining -= w;
    }
  }
  return layout;
}

inline int region_band_count(const ModelConfig& cfg, int p) {
  return (cfg.region_bins[p] + cfg.freq_strides[p] - 1) / cfg.freq_strides[p];
}

// Right-side (high frequency) zero padding that keeps every scale of a
// region at the same band count.
inline int region_pad_right(const ModelConfig& cfg, int p, int scale) {
  const int bands = region_band_count(cfg, p);
  const int need = (bands - 1) * cfg.freq_strides[p] + cfg.region_kernels[p][scale];
  return std::max(0, need - cfg.region_bins[p]);
}

// E found by bisecting the analytic MAC counter against the published
// per-preset budgets; see complexity.hpp and the preset files.
inline ModelConfig make_preset(const std::string& name) {
  ModelConfig cfg;
  if (name == "T" || name == "tiny")
    cfg.embedding = 10;
  else if (name == "S" || name == "small")
    cfg.embedding = 17;
  else if (name == "L" || name == "large")
    cfg.embedding = 68;
  else if (name == "H" || name == "huge")
    cfg.embedding = 200;
  else
    throw ConfigError("unknown preset '" + name + "' (expected T, S, L or H)");
  cfg.preset_name = name.substr(0, 1) == "t"   ? "T"
                    : name.substr(0, 1) == "s" ? "S"
                    : name.substr(0, 1) == "l" ? "L"
                    : name.substr(0, 1) == "h" ? "H"
                                               : name;
  cfg.validate();
  return cfg;
}

// Structural hash; weight files and checkpoints refuse to load against a
// different architecture.
inline uint64_t config_hash(const ModelConfig& cfg) {
  std::string s;
  s += "E=" + std::to_string(cfg.embedding);
  s += ";M=" + std::to_string(cfg.active_scales());
  s += ";stem=" + std::to_string(cfg.stem_kernel_f);
  for (int p = 0; p < cfg.regions; ++p) {
    s += ";r" + std::to_string(p) + "=" + std::to_string(cfg.region_bins[p]) + "/" +
         std::to_string(cfg.freq_strides[p]) + ":";
    for (int m = 0; m < cfg.active_scales(); ++m)
      s += std::to_string(cfg.region_kernels[p][m]) + ",";
  }
  s += ";lambda=";
  for (int l : cfg.lambda_schedule) s += std::to_string(l) + ",";
  s += ";xs=" + std::to_string(cfg.cross_scale ? 1 : 0);
  s += ";mh=" + std::to_string(cfg.merge_hidden_mult);
  s += ";pn=";
  if (cfg.postnet.enabled)
    s += std::to_string(cfg.postnet.gru_layers) + "/" + std::to_string(cfg.postnet.hidden) +
         "/" + std::to_string(cfg.postnet.groups) + "/" + std::to_string(cfg.postnet.df_order);
  else
    s += "off";
  return fnv1a64(s);
}

}  // namespace smru
