// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "smru/config.hpp"
#include "smru/errors.hpp"
#include "smru/nn.hpp"
#include "smru/tensor.hpp"

namespace smru {

struct ParamSpec {
  std::string name;
  std::vector<std::size_t> shape;
  InitScheme scheme;
};

// Frequency groups of the postnet output layer: F bins split into
// `groups` contiguous slices, remainder bins going to the leading slices.
inline std::vector<int> postnet_freq_groups(const ModelConfig& cfg) {
  const int F = cfg.freq_bins(), G = cfg.postnet.groups;
  std::vector<int> widths(G, F / G);
  for (int g = 0; g < F % G; ++g) widths[g] += 1;
  return widths;
}

// Canonical parameter list of the whole graph. Everything that touches
// parameters (init, save/load validation, counting) walks this one list.
//
// Packed-channel convention: wherever embedding and band axes are merged
// (DS filters, US projection, h0 vector), channel index c = q * E + e.
inline void enumerate_parameters(const ModelConfig& cfg,
                                 const std::function<void(const ParamSpec&)>& fn) {
  cfg.validate();
  const std::size_t E = static_cast<std::size_t>(cfg.embedding);
  const std::size_t M = static_cast<std::size_t>(cfg.active_scales());
  const BandLayout layout = compute_band_layout(cfg);
  const std::size_t Q = static_cast<std::size_t>(layout.Q());
  const std::size_t F = static_cast<std::size_t>(cfg.freq_bins());
  const auto U = InitScheme::UniformFanIn;
  const auto Z = InitScheme::Zeros;
  const auto O = InitScheme::Ones;

  fn({"stem.w", {E, 8, 1, static_cast<std::size_t>(cfg.stem_kernel_f)}, U});
  fn({"stem.b", {E}, Z});

  for (int p = 0; p < cfg.regions; ++p) {
    for (std::size_t m = 0; m < M; ++m) {
      const std::string base = "split.r" + std::to_string(p) + ".s" + std::to_string(m);
      fn({base + ".w", {E, E, 1, static_cast<std::size_t>(cfg.region_kernels[p][m])}, U});
      fn({base + ".b", {E}, Z});
    }
  }
  fn({"split.reduce.w", {E, M * E, 1, 1}, U});
  fn({"split.reduce.b", {E}, Z});
  fn({"split.norm.gain", {E}, O});
  fn({"split.norm.bias", {E}, Z});

  for (int j = 0; j < cfg.num_blocks(); ++j) {
    const std::size_t lam = static_cast<std::size_t>(cfg.lambda_schedule[j]);
    const std::string b = "block" + std::to_string(j);
    fn({b + ".norm_in.gain", {E}, O});
    fn({b + ".norm_in.bias", {E}, Z});
    fn({b + ".ds.w", {Q * E, lam}, U});
    fn({b + ".ds.b", {Q * E}, Z});
    fn({b + ".rnn.norm.gain", {E}, O});
    fn({b + ".rnn.norm.bias", {E}, Z});
    for (const char* g : {"wz", "wr", "wn", "uz", "ur", "un"})
      fn({b + ".rnn.gru." + std::string(g), {E, E}, U});
    for (const char* g : {"bz", "br", "bn"}) fn({b + ".rnn.gru." + std::string(g), {E}, Z});
    fn({b + ".rnn.fc.w", {E, E}, U});
    fn({b + ".rnn.fc.b", {E}, Z});
    fn({b + ".mlp.in.w", {2 * E, E}, U});
    fn({b + ".mlp.in.b", {2 * E}, Z});
    fn({b + ".mlp.norm.gain", {E}, O});
    fn({b + ".mlp.norm.bias", {E}, Z});
    // Near-identity gate at init: zero band mixing, unit gate bias.
    fn({b + ".mlp.band.w", {Q, Q}, Z});
    fn({b + ".mlp.band.b", {Q}, O});
    fn({b + ".mlp.out.w", {E, E}, U});
    fn({b + ".mlp.out.b", {E}, Z});
    fn({b + ".us.w", {Q * E, E}, U});
    fn({b + ".us.b", {Q * E}, Z});
    fn({b + ".us.h0", {Q * E}, Z});
  }

  const std::size_t hid = static_cast<std::size_t>(cfg.merge_hidden_mult) * E;
  for (std::size_t q = 0; q < Q; ++q) {
    const std::string b = "merge.b" + std::to_string(q);
    const std::size_t w = static_cast<std::size_t>(layout.widths[q]);
    fn({b + ".norm.gain", {E}, O});
    fn({b + ".norm.bias", {E}, Z});
    fn({b + ".l1.w", {hid, E}, U});
    fn({b + ".l1.b", {hid}, Z});
    fn({b + ".l2.w", {8 * w, hid}, U});
    fn({b + ".l2.b", {8 * w}, Z});
  }

  if (cfg.postnet.enabled) {
    const std::size_t H = static_cast<std::size_t>(cfg.postnet.hidden);
    fn({"postnet.in.w", {H, F}, U});
    fn({"postnet.in.b", {H}, Z});
    for (int l = 0; l < cfg.postnet.gru_layers; ++l) {
      const std::string b = "postnet.gru" + std::to_string(l);
      for (const char* g : {"wz", "wr", "wn", "uz", "ur", "un"})
        fn({b + "." + std::string(g), {H, H}, U});
      for (const char* g : {"bz", "br", "bn"}) fn({b + "." + std::string(g), {H}, Z});
    }
    const auto groups = postnet_freq_groups(cfg);
    const std::size_t gh = H / static_cast<std::size_t>(cfg.postnet.groups);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const std::string b = "postnet.out.g" + std::to_string(g);
      const std::size_t out =
          2 * static_cast<std::size_t>(cfg.postnet.df_order) * static_cast<std::size_t>(groups[g]);
      fn({b + ".w", {out, gh}, U});
      fn({b + ".b", {out}, Z});
    }
  }
}

inline uint64_t parameter_count(const ModelConfig& cfg) {
  uint64_t n = 0;
  enumerate_parameters(cfg, [&](const ParamSpec& p) { n += Tensor::numel_of(p.shape); });
  return n;
}

// ---------------------------------------------------------------------------
// WeightStore
// ---------------------------------------------------------------------------

struct WeightStore {
  uint32_t version = 1;
  uint64_t config_hash = 0;
  std::vector<std::pair<std::string, Tensor>> entries;
  std::unordered_map<std::string, std::size_t> index;

  void add(const std::string& name, Tensor t) {
    if (index.count(name)) throw ConfigError("WeightStore: duplicate '" + name + "'");
    index.emplace(name, entries.size());
    entries.emplace_back(name, std::move(t));
  }

  const Tensor& get(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw ConfigError("WeightStore: missing '" + name + "'");
    return entries[it->second].second;
  }

  bool has(const std::string& name) const { return index.count(name) != 0; }
  std::size_t size() const { return entries.size(); }
};

inline WeightStore init_weights(const ModelConfig& cfg, uint64_t seed) {
  WeightStore store;
  store.config_hash = config_hash(cfg);
  enumerate_parameters(cfg, [&](const ParamSpec& p) {
    store.add(p.name, seeded_init(p.shape, derive_seed(seed, p.name), p.scheme));
  });
  return store;
}

// ---------------------------------------------------------------------------
// Binary weight file: magic "SMRW", version, config hash, then per tensor
// (name, dims, float32 little-endian payload).
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("weights: unexpected end of file");
  return v;
}

}  // namespace detail

inline void save_weights(const WeightStore& store, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("save_weights: cannot open '" + path + "'");
  f.write("SMRW", 4);
  detail::write_pod<uint32_t>(f, store.version);
  detail::write_pod<uint64_t>(f, store.config_hash);
  detail::write_pod<uint32_t>(f, static_cast<uint32_t>(store.entries.size()));
  for (const auto& [name, t] : store.entries) {
    detail::write_pod<uint32_t>(f, static_cast<uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<uint32_t>(f, static_cast<uint32_t>(t.rank()));
    for (auto d : t.shape) detail::write_pod<uint32_t>(f, static_cast<uint32_t>(d));
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!f) throw FormatError("save_weights: write failed for '" + path + "'");
}

inline WeightStore load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("load_weights: cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "SMRW", 4) != 0)
    throw FormatError("load_weights: '" + path + "' is not a weight file");
  WeightStore store;
  store.version = detail::read_pod<uint32_t>(f);
  if (store.version != 1)
    throw FormatError("load_weights: unsupported version " + std::to_string(store.version));
  store.config_hash = detail::read_pod<uint64_t>(f);
  const uint32_t count = detail::read_pod<uint32_t>(f);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = detail::read_pod<uint32_t>(f);
    if (name_len > 4096) throw FormatError("load_weights: corrupt tensor name");
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const uint32_t rank = detail::read_pod<uint32_t>(f);
    if (rank > 8) throw FormatError("load_weights: corrupt tensor rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = detail::read_pod<uint32_t>(f);
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!f) throw FormatError("load_weights: truncated tensor data");
    store.add(name, std::move(t));
  }
  return store;
}

// Load and validate against an expected architecture.
inline WeightStore load_weights_for(const ModelConfig& cfg, const std::string& path) {
  WeightStore store = load_weights(path);
  if (store.config_hash != config_hash(cfg))
    throw FormatError("load_weights: file '" + path + "' was built for a different config");
  enumerate_parameters(cfg, [&](const ParamSpec& p) {
    if (!store.has(p.name)) throw FormatError("load_weights: missing tensor '" + p.name + "'");
    if (store.get(p.name).shape != p.shape)
      throw FormatError("load_weights: shape mismatch for '" + p.name + "'");
  });
  return store;
}

}  // namespace smru
