// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "smru/audio.hpp"
#include "smru/errors.hpp"
#include "smru/fft.hpp"

namespace smru {

// Analysis/synthesis framing. 20 ms window, 10 ms hop, sqrt-Hann on both
// sides (periodic Hann satisfies COLA at 50% overlap). Framing is strictly
// causal: frame t covers samples [t*hop, t*hop + window_len), no center pad.
struct StftConfig {
  int window_len = 320;
  int hop = 160;
  std::vector<float> window;

  int bins() const { return window_len / 2 + 1; }

  static StftConfig make_default() {
    StftConfig cfg;
    cfg.window.resize(cfg.window_len);
    for (int i = 0; i < cfg.window_len; ++i) {
      const double hann =
          0.5 - 0.5 * std::cos(6.283185307179586 * i / cfg.window_len);
      cfg.window[i] = static_cast<float>(std::sqrt(hann));
    }
    return cfg;
  }

  void validate() const {
    if (hop * 2 != window_len) throw ConfigError("StftConfig: hop*2 != window_len");
    if (static_cast<int>(window.size()) != window_len)
      throw ConfigError("StftConfig: window length mismatch");
  }
};

// Complex T x F time-frequency map, row-major over frames.
struct Spectrogram {
  std::size_t T = 0;
  std::size_t F = 0;
  std::vector<cfloat> v;

  Spectrogram() = default;
  Spectrogram(std::size_t t, std::size_t f) : T(t), F(f), v(t * f, cfloat(0, 0)) {}

  cfloat& at(std::size_t t, std::size_t f) { return v[t * F + f]; }
  cfloat at(std::size_t t, std::size_t f) const { return v[t * F + f]; }
  cfloat* row(std::size_t t) { return v.data() + t * F; }
  const cfloat* row(std::size_t t) const { return v.data() + t * F; }
};

inline std::size_t stft_frame_count(std::size_t samples, const StftConfig& cfg) {
  if (samples < static_cast<std::size_t>(cfg.window_len)) return 0;
  return 1 + (samples - cfg.window_len) / cfg.hop;
}

// One analysis frame: window then real FFT. Shared by batch and streaming.
inline void stft_frame(const float* x, const StftConfig& cfg, cfloat* out_row) {
  std::vector<float> buf(cfg.window_len);
  for (int i = 0; i < cfg.window_len; ++i) buf[i] = x[i] * cfg.window[i];
  const auto spec = rfft(buf.data(), buf.size());
  for (int k = 0; k < cfg.bins(); ++k) out_row[k] = spec[k];
}

inline Spectrogram stft(const AudioBuffer& audio, const StftConfig& cfg) {
  cfg.validate();
  if (audio.samples.size() < static_cast<std::size_t>(cfg.window_len))
    throw ShapeError("stft: audio shorter than one analysis window");
  const std::size_t T = stft_frame_count(audio.samples.size(), cfg);
  Spectrogram spec(T, cfg.bins());
  for (std::size_t t = 0; t < T; ++t)
    stft_frame(audio.samples.data() + t * cfg.hop, cfg, spec.row(t));
  return spec;
}

// One synthesis frame: inverse FFT then window.
inline std::vector<float> istft_frame(const cfloat* row, const StftConfig& cfg) {
  auto time = irfft(row, cfg.bins(), cfg.window_len);
  for (int i = 0; i < cfg.window_len; ++i) time[i] *= cfg.window[i];
  return time;
}

// Weighted overlap-add. The sqrt-Hann analysis/synthesis pair sums to one
// at 50% overlap, so the interior needs no normalization; the leading and
// trailing half-windows stay tapered (which also keeps the batch and
// streaming paths sample-for-sample identical).
inline AudioBuffer istft(const Spectrogram& spec, const StftConfig& cfg) {
  cfg.validate();
  if (spec.F != static_cast<std::size_t>(cfg.bins()))
    throw ShapeError("istft: spectrogram bin count does not match config");
  AudioBuffer out;
  if (spec.T == 0) return out;
  const std::size_t n = (spec.T - 1) * cfg.hop + cfg.window_len;
  out.samples.assign(n, 0.0f);
  for (std::size_t t = 0; t < spec.T; ++t) {
    const auto frame = istft_frame(spec.row(t), cfg);
    const std::size_t base = t * cfg.hop;
    for (int i = 0; i < cfg.window_len; ++i) out.samples[base + i] += frame[i];
  }
  return out;
}

}  // namespace smru
