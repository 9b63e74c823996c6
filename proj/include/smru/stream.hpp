// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "smru/laec.hpp"
#include "smru/model.hpp"
#include "smru/stft.hpp"

namespace smru {

// ---------------------------------------------------------------------------
// Frame-level streaming state of the network itself
// ---------------------------------------------------------------------------

struct ModelStreamState {
  struct Block {
    std::vector<float> gru_h;   // [Q*E]
    std::vector<float> ds_buf;  // [lambda * Q*E], frames stacked in time order
    int ds_fill = 0;
    std::vector<float> us_img;  // image of the last completed compressed frame
  };
  std::vector<Block> blocks;
  PostnetState postnet;
  std::vector<cfloat> df_hist;  // [(df_order-1) * F] ring of past filtered frames
  std::size_t df_pos = 0;       // ring slot of the oldest stored frame
  uint64_t frames = 0;
};

inline ModelStreamState model_stream_init(const CompiledModel& m) {
  ModelStreamState st;
  const std::size_t QE = static_cast<std::size_t>(m.Q) * static_cast<std::size_t>(m.E);
  for (const auto& bw : m.blocks) {
    ModelStreamState::Block b;
    b.gru_h.assign(QE, 0.0f);
    b.ds_buf.assign(static_cast<std::size_t>(bw.lambda) * QE, 0.0f);
    std::vector<float> h0(bw.us_h0.data.begin(), bw.us_h0.data.end());
    b.us_img = us_apply(bw, m.Q, m.E, h0);
    st.blocks.push_back(std::move(b));
  }
  if (m.cfg.postnet.enabled) {
    st.postnet = postnet_state_init(m);
    const std::size_t hist = static_cast<std::size_t>(m.cfg.postnet.df_order - 1);
    st.df_hist.assign(hist * static_cast<std::size_t>(m.F), cfloat(0, 0));
  }
  return st;
}

// One full-rate frame through stem, split, UNet, merge, mask and (when
// enabled) the deep-filter postnet. Arithmetic matches the batch forward
// element for element.
inline std::vector<cfloat> model_stream_frame(const CompiledModel& m, ModelStreamState& st,
                                              const cfloat* d_row, const cfloat* x_row,
                                              const cfloat* e_row, const cfloat* y_row) {
  const std::size_t F = static_cast<std::size_t>(m.F);
  const std::size_t E = static_cast<std::size_t>(m.E);
  const std::size_t Q = static_cast<std::size_t>(m.Q);
  const std::size_t QE = Q * E;

  Tensor I({8, 1, F});
  const cfloat* rows[4] = {d_row, x_row, e_row, y_row};
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t f = 0; f < F; ++f) {
      I(2 * s, 0, f) = rows[s][f].real();
      I(2 * s + 1, 0, f) = rows[s][f].imag();
    }

  const Tensor R = stem_forward(I, m);
  const Tensor Ht = band_split(R, m);  // [E, 1, Q]
  std::vector<float> sum = pack_frame(Ht, 0);

  std::vector<float> prev_out, u_frame;
  std::vector<std::vector<float>> outs;
  const int n = m.cfg.num_blocks();
  for (int j = 0; j < n; ++j) {
    const VrBlockWeights& bw = m.blocks[j];
    ModelStreamState::Block& bs = st.blocks[j];

    std::vector<float> in;
    if (m.cfg.cross_scale) {
      in = sum;
    } else {
      in = (j == 0) ? std::vector<float>(sum) : prev_out;
      if (j >= n / 2) {
        const auto& mirror = outs[static_cast<std::size_t>(n - 1 - j)];
        for (std::size_t i = 0; i < in.size(); ++i) in[i] += mirror[i];
      }
    }
    for (std::size_t q = 0; q < Q; ++q) layer_norm(bw.norm_in, in.data() + q * E, E);

    // downsample accumulation; a compressed frame completes every lambda frames
    std::memcpy(bs.ds_buf.data() + static_cast<std::size_t>(bs.ds_fill) * QE, in.data(),
                QE * sizeof(float));
    bs.ds_fill++;
    if (bs.ds_fill == bw.lambda) {
      bs.ds_fill = 0;
      std::vector<float> cf(QE);
      for (std::size_t c = 0; c < QE; ++c) {
        float acc = bw.ds_b(c);
        for (int i = 0; i < bw.lambda; ++i)
          acc += bw.ds_w(c, static_cast<std::size_t>(i)) *
                 bs.ds_buf[static_cast<std::size_t>(i) * QE + c];
        cf[c] = acc;
      }
      bs.us_img = vr_compressed_step(bw, Q, E, cf, bs.gru_h);
    }

    const std::vector<float>& out = bs.us_img;
    if (m.cfg.cross_scale)
      for (std::size_t i = 0; i < QE; ++i) sum[i] += out[i];
    else
      outs.push_back(out);
    prev_out = out;
    if (j == n - 1) u_frame = out;
  }

  std::vector<float> i_frame(8 * F), g_frame(8 * F);
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t f = 0; f < F; ++f) i_frame[c * F + f] = I(c, 0, f);
  merge_frame(m, u_frame.data(), g_frame.data());
  std::vector<cfloat> s1(F);
  mask_frame(i_frame.data(), g_frame.data(), F, s1.data());

  if (!m.cfg.postnet.enabled) {
    st.frames++;
    return s1;
  }

  const std::size_t L = static_cast<std::size_t>(m.cfg.postnet.df_order);
  std::vector<cfloat> taps(F * L);
  postnet_frame(m, s1.data(), st.postnet, taps.data());
  std::vector<cfloat> out(F);
  const std::size_t hist = L - 1;
  for (std::size_t f = 0; f < F; ++f) {
    cfloat acc(0, 0);
    for (std::size_t l = 0; l < L && l <= st.frames; ++l) {
      const cfloat past =
          (l == 0) ? s1[f]
                   : st.df_hist[((st.df_pos + hist - l) % hist) * F + f];
      acc += taps[f * L + l] * past;
    }
    out[f] = acc;
  }
  if (hist > 0) {
    std::memcpy(st.df_hist.data() + st.df_pos * F, s1.data(), F * sizeof(cfloat));
    st.df_pos = (st.df_pos + 1) % hist;
  }
  st.frames++;
  return out;
}

// ---------------------------------------------------------------------------
// Sample-level engine: STFT analysis, LAEC, network, overlap-add synthesis
// ---------------------------------------------------------------------------

// All per-stream state. Memory is bounded: analysis windows, the LAEC frame
// history, per-block buffers of at most lambda frames, the deep-filter ring
// and one synthesis window.
struct StreamState {
  StftConfig stft_cfg;
  uint64_t cfg_hash = 0;
  std::vector<float> mic_win, far_win;  // last window_len input samples
  KalmanFilterState laec;
  ModelStreamState model;
  std::vector<float> syn_acc;  // synthesis overlap-add ring
  uint64_t pushed = 0;
};

inline StreamState stream_create(const CompiledModel& m, const StftConfig& stft_cfg,
                                 const LaecConfig& laec_cfg = {}) {
  stft_cfg.validate();
  StreamState st;
  st.stft_cfg = stft_cfg;
  st.cfg_hash = config_hash(m.cfg);
  st.mic_win.assign(stft_cfg.window_len, 0.0f);
  st.far_win.assign(stft_cfg.window_len, 0.0f);
  st.laec = laec_init(static_cast<std::size_t>(stft_cfg.bins()), laec_cfg);
  st.model = model_stream_init(m);
  st.syn_acc.assign(stft_cfg.window_len, 0.0f);
  return st;
}

// Push exactly one hop of mic and far-end samples; returns one hop of
// enhanced audio. Output lags input by window_len - hop samples (10 ms),
// the STFT overlap — the only algorithmic latency in the engine.
inline std::vector<float> stream_push(StreamState& st, const CompiledModel& m,
                                      const float* mic_hop, const float* far_hop,
                                      std::size_t n) {
  const int W = st.stft_cfg.window_len, Hp = st.stft_cfg.hop;
  if (n != static_cast<std::size_t>(Hp))
    throw ShapeError("stream_push: expected exactly one hop of samples");

  std::memmove(st.mic_win.data(), st.mic_win.data() + Hp, (W - Hp) * sizeof(float));
  std::memmove(st.far_win.data(), st.far_win.data() + Hp, (W - Hp) * sizeof(float));
  std::memcpy(st.mic_win.data() + (W - Hp), mic_hop, Hp * sizeof(float));
  std::memcpy(st.far_win.data() + (W - Hp), far_hop, Hp * sizeof(float));
  st.pushed++;

  std::vector<float> out(Hp, 0.0f);
  if (st.pushed < 2) return out;  // first window not yet filled

  const std::size_t F = static_cast<std::size_t>(st.stft_cfg.bins());
  std::vector<cfloat> d_row(F), x_row(F), e_row(F), y_row(F);
  stft_frame(st.mic_win.data(), st.stft_cfg, d_row.data());
  stft_frame(st.far_win.data(), st.stft_cfg, x_row.data());
  laec_step(st.laec, d_row.data(), x_row.data(), e_row.data(), y_row.data());
  const std::vector<cfloat> s_row =
      model_stream_frame(m, st.model, d_row.data(), x_row.data(), e_row.data(), y_row.data());

  const auto frame = istft_frame(s_row.data(), st.stft_cfg);
  for (int i = 0; i < W; ++i) st.syn_acc[i] += frame[i];
  for (int i = 0; i < Hp; ++i) out[i] = st.syn_acc[i];
  std::memmove(st.syn_acc.data(), st.syn_acc.data() + Hp, (W - Hp) * sizeof(float));
  std::memset(st.syn_acc.data() + (W - Hp), 0, Hp * sizeof(float));
  return out;
}

// Drains the synthesis tail: the final window_len - hop samples.
inline std::vector<float> stream_flush(const StreamState& st) {
  const int W = st.stft_cfg.window_len, Hp = st.stft_cfg.hop;
  std::vector<float> out(W - Hp);
  for (int i = 0; i < W - Hp; ++i) out[i] = st.syn_acc[i];
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "SMRC", version, config hash, then named binary
// sections (name, byte count, payload), little-endian throughout.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_section(std::ostream& os, const std::string& name, const void* data,
                          std::size_t bytes) {
  write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod<uint64_t>(os, static_cast<uint64_t>(bytes));
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

struct SectionReader {
  std::istream& is;
  std::string read_into(void* data, std::size_t bytes, const char* expect) {
    const uint32_t name_len = read_pod<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint64_t sz = read_pod<uint64_t>(is);
    if (!is || name != expect || sz != bytes)
      throw FormatError(std::string("checkpoint: bad section, expected '") + expect + "'");
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (!is) throw FormatError("checkpoint: truncated section payload");
    return name;
  }
};

}  // namespace detail

inline void stream_serialize(const StreamState& st, std::ostream& os) {
  os.write("SMRC", 4);
  detail::write_pod<uint32_t>(os, 1u);
  detail::write_pod<uint64_t>(os, st.cfg_hash);

  detail::write_section(os, "counters", &st.pushed, sizeof(st.pushed));
  detail::write_section(os, "stft.mic", st.mic_win.data(), st.mic_win.size() * sizeof(float));
  detail::write_section(os, "stft.far", st.far_win.data(), st.far_win.size() * sizeof(float));
  detail::write_section(os, "syn.acc", st.syn_acc.data(), st.syn_acc.size() * sizeof(float));

  struct {
    uint64_t frames;
    uint64_t hist_pos;
  } laec_meta{st.laec.frames, st.laec.hist_pos};
  detail::write_section(os, "laec.meta", &laec_meta, sizeof(laec_meta));
  detail::write_section(os, "laec.w", st.laec.w.data(), st.laec.w.size() * sizeof(cfloat));
  detail::write_section(os, "laec.x", st.laec.x_hist.data(),
                        st.laec.x_hist.size() * sizeof(cfloat));
  detail::write_section(os, "laec.p", st.laec.p.data(), st.laec.p.size() * sizeof(float));
  detail::write_section(os, "laec.psi_s", st.laec.psi_s.data(),
                        st.laec.psi_s.size() * sizeof(float));
  detail::write_section(os, "laec.psi_d", st.laec.psi_d.data(),
                        st.laec.psi_d.size() * sizeof(float));

  for (std::size_t j = 0; j < st.model.blocks.size(); ++j) {
    const auto& b = st.model.blocks[j];
    const std::string base = "block" + std::to_string(j);
    const int32_t fill = b.ds_fill;
    detail::write_section(os, base + ".fill", &fill, sizeof(fill));
    detail::write_section(os, base + ".gru_h", b.gru_h.data(), b.gru_h.size() * sizeof(float));
    detail::write_section(os, base + ".ds_buf", b.ds_buf.data(),
                          b.ds_buf.size() * sizeof(float));
    detail::write_section(os, base + ".us_img", b.us_img.data(),
                          b.us_img.size() * sizeof(float));
  }

  struct {
    uint64_t frames;
    uint64_t df_pos;
  } model_meta{st.model.frames, st.model.df_pos};
  detail::write_section(os, "model.meta", &model_meta, sizeof(model_meta));
  for (std::size_t l = 0; l < st.model.postnet.h.size(); ++l)
    detail::write_section(os, "postnet.h" + std::to_string(l), st.model.postnet.h[l].data(),
                          st.model.postnet.h[l].size() * sizeof(float));
  detail::write_section(os, "df.hist", st.model.df_hist.data(),
                        st.model.df_hist.size() * sizeof(cfloat));
}

// Restores into a freshly created state for the same compiled model.
inline void stream_deserialize(StreamState& st, std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SMRC", 4) != 0)
    throw FormatError("checkpoint: bad magic");
  const uint32_t version = detail::read_pod<uint32_t>(is);
  if (version != 1) throw FormatError("checkpoint: unsupported version");
  const uint64_t hash = detail::read_pod<uint64_t>(is);
  if (hash != st.cfg_hash)
    throw FormatError("checkpoint: config hash mismatch");

  detail::SectionReader r{is};
  r.read_into(&st.pushed, sizeof(st.pushed), "counters");
  r.read_into(st.mic_win.data(), st.mic_win.size() * sizeof(float), "stft.mic");
  r.read_into(st.far_win.data(), st.far_win.size() * sizeof(float), "stft.far");
  r.read_into(st.syn_acc.data(), st.syn_acc.size() * sizeof(float), "syn.acc");

  struct {
    uint64_t frames;
    uint64_t hist_pos;
  } laec_meta{};
  r.read_into(&laec_meta, sizeof(laec_meta), "laec.meta");
  st.laec.frames = laec_meta.frames;
  st.laec.hist_pos = laec_meta.hist_pos;
  r.read_into(st.laec.w.data(), st.laec.w.size() * sizeof(cfloat), "laec.w");
  r.read_into(st.laec.x_hist.data(), st.laec.x_hist.size() * sizeof(cfloat), "laec.x");
  r.read_into(st.laec.p.data(), st.laec.p.size() * sizeof(float), "laec.p");
  r.read_into(st.laec.psi_s.data(), st.laec.psi_s.size() * sizeof(float), "laec.psi_s");
  r.read_into(st.laec.psi_d.data(), st.laec.psi_d.size() * sizeof(float), "laec.psi_d");

  for (std::size_t j = 0; j < st.model.blocks.size(); ++j) {
    auto& b = st.model.blocks[j];
    const std::string base = "block" + std::to_string(j);
    int32_t fill = 0;
    r.read_into(&fill, sizeof(fill), (base + ".fill").c_str());
    b.ds_fill = fill;
    r.read_into(b.gru_h.data(), b.gru_h.size() * sizeof(float), (base + ".gru_h").c_str());
    r.read_into(b.ds_buf.data(), b.ds_buf.size() * sizeof(float), (base + ".ds_buf").c_str());
    r.read_into(b.us_img.data(), b.us_img.size() * sizeof(float), (base + ".us_img").c_str());
  }

  struct {
    uint64_t frames;
    uint64_t df_pos;
  } model_meta{};
  r.read_into(&model_meta, sizeof(model_meta), "model.meta");
  st.model.frames = model_meta.frames;
  st.model.df_pos = model_meta.df_pos;
  for (std::size_t l = 0; l < st.model.postnet.h.size(); ++l)
    r.read_into(st.model.postnet.h[l].data(), st.model.postnet.h[l].size() * sizeof(float),
                ("postnet.h" + std::to_string(l)).c_str());
  r.read_into(st.model.df_hist.data(), st.model.df_hist.size() * sizeof(cfloat), "df.hist");
}

}  // namespace smru
