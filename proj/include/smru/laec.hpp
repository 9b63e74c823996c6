// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "smru/errors.hpp"
#include "smru/stft.hpp"

namespace smru {

// Linear echo canceller: per-bin frequency-domain adaptive filter with a
// diagonal state-space (Kalman) update. The echo is modeled per STFT bin as
// a K-tap FIR over the frame history of the far-end spectrum, so the filter
// lives on exactly the frames the network consumes.
struct LaecConfig {
  int partitions = 10;          // K: taps across frame history
  float transition = 0.999f;    // state transition / forgetting factor A
  float noise_smooth = 0.99f;   // recursive smoothing of |e|^2
  float floor_eps = 1e-10f;     // regularization floor
  float p_init = 1e-2f;         // initial state-error variance
  float innovation_guard = 0.25f;  // floors the noise estimate at this fraction
                                   // of the current |e|^2 (double-talk onsets)
};

struct KalmanFilterState {
  LaecConfig cfg;
  std::size_t F = 0;
  std::vector<cfloat> w;      // [K, F] filter taps
  std::vector<cfloat> x_hist; // [K, F] far-end history, ring over k
  std::size_t hist_pos = 0;   // index of the most recent far-end frame
  std::vector<float> p;       // [F] state-error variance, >= 0
  std::vector<float> psi_s;   // [F] observation-noise estimate, >= floor
  std::vector<float> psi_d;   // [F] process-noise estimate
  uint64_t frames = 0;
};

inline KalmanFilterState laec_init(std::size_t bins, const LaecConfig& cfg = {}) {
  if (cfg.partitions < 1) throw ConfigError("laec: partitions must be >= 1");
  KalmanFilterState st;
  st.cfg = cfg;
  st.F = bins;
  st.w.assign(static_cast<std::size_t>(cfg.partitions) * bins, cfloat(0, 0));
  st.x_hist.assign(st.w.size(), cfloat(0, 0));
  st.p.assign(bins, cfg.p_init);
  st.psi_s.assign(bins, 1e-3f);
  st.psi_d.assign(bins, 0.0f);
  return st;
}

// One frame update. Writes the echo estimate y and the error e = d - y for
// every bin, then adapts the filter. Deterministic: same state and inputs
// always produce the same outputs.
inline void laec_step(KalmanFilterState& st, const cfloat* d_row, const cfloat* x_row,
                      cfloat* e_row, cfloat* y_row) {
  const std::size_t K = static_cast<std::size_t>(st.cfg.partitions);
  const std::size_t F = st.F;
  const float A = st.cfg.transition;
  const float A2 = A * A;

  for (std::size_t f = 0; f < F; ++f) {
    if (!std::isfinite(d_row[f].real()) || !std::isfinite(d_row[f].imag()) ||
        !std::isfinite(x_row[f].real()) || !std::isfinite(x_row[f].imag()))
      throw NumericError("laec_step: non-finite input spectrum");
  }

  // push far-end frame into the ring
  st.hist_pos = (st.hist_pos + K - 1) % K;
  for (std::size_t f = 0; f < F; ++f) st.x_hist[st.hist_pos * F + f] = x_row[f];

  for (std::size_t f = 0; f < F; ++f) {
    // predict
    float w_pow = 0.0f;
    for (std::size_t k = 0; k < K; ++k) {
      cfloat& wk = st.w[k * F + f];
      wk *= A;
      w_pow += std::norm(wk);
    }
    st.psi_d[f] = (1.0f - A2) * (w_pow / static_cast<float>(K));
    float p = A2 * st.p[f] + st.psi_d[f];

    // innovation with the predicted taps
    cfloat y(0, 0);
    float x_pow = 0.0f;
    for (std::size_t k = 0; k < K; ++k) {
      const cfloat xk = st.x_hist[((st.hist_pos + k) % K) * F + f];
      y += st.w[k * F + f] * xk;
      x_pow += std::norm(xk);
    }
    const cfloat e = d_row[f] - y;
    y_row[f] = y;
    e_row[f] = e;

    // gain and update; the noise term never drops below a fraction of the
    // current innovation power, which keeps near-end bursts from being
    // mistaken for echo-path change
    const float noise = std::max({st.psi_s[f], st.cfg.innovation_guard * std::norm(e),
                                  st.cfg.floor_eps});
    const float sigma = p * x_pow + noise;
    const float g_scale = p / sigma;
    for (std::size_t k = 0; k < K; ++k) {
      const cfloat xk = st.x_hist[((st.hist_pos + k) % K) * F + f];
      st.w[k * F + f] += g_scale * std::conj(xk) * e;
    }
    p *= 1.0f - g_scale * x_pow / static_cast<float>(K);
    st.p[f] = std::max(p, 0.0f);

    const float sm = st.cfg.noise_smooth;
    st.psi_s[f] = std::max(sm * st.psi_s[f] + (1.0f - sm) * std::norm(e),
                           st.cfg.floor_eps);
  }
  st.frames++;
}

// Frame-domain result of running the filter over whole signals.
struct LaecSpectra {
  Spectrogram d, x, e, y;
};

inline LaecSpectra laec_process_spectra(const AudioBuffer& mic, const AudioBuffer& farend,
                                        const StftConfig& stft_cfg,
                                        const LaecConfig& cfg = {}) {
  if (mic.samples.size() != farend.samples.size())
    throw ShapeError("laec: mic and far-end length mismatch");
  LaecSpectra out;
  out.d = stft(mic, stft_cfg);
  out.x = stft(farend, stft_cfg);
  out.e = Spectrogram(out.d.T, out.d.F);
  out.y = Spectrogram(out.d.T, out.d.F);
  KalmanFilterState st = laec_init(out.d.F, cfg);
  for (std::size_t t = 0; t < out.d.T; ++t)
    laec_step(st, out.d.row(t), out.x.row(t), out.e.row(t), out.y.row(t));
  return out;
}

// Time-domain API: e and y synthesized with the same STFT config so all
// pipeline signals stay frame-aligned. Outputs match the input length
// (zero-padded tail when the last partial frame cannot be synthesized).
inline std::pair<AudioBuffer, AudioBuffer> laec_process(const AudioBuffer& mic,
                                                        const AudioBuffer& farend,
                                                        const StftConfig& stft_cfg,
                                                        const LaecConfig& cfg = {}) {
  const LaecSpectra spectra = laec_process_spectra(mic, farend, stft_cfg, cfg);
  AudioBuffer e = istft(spectra.e, stft_cfg);
  AudioBuffer y = istft(spectra.y, stft_cfg);
  e.samples.resize(mic.samples.size(), 0.0f);
  y.samples.resize(mic.samples.size(), 0.0f);
  return {std::move(e), std::move(y)};
}

}  // namespace smru
