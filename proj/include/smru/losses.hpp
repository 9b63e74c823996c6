// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "smru/audio.hpp"
#include "smru/errors.hpp"
#include "smru/stft.hpp"

namespace smru {

// Per-frame voice-activity flags.
using VadLabels = std::vector<uint8_t>;

struct LossWeights {
  double beta = 0.0002;   // VAD-loss weight
  double echo_w = 0.1;    // fixed echo-loss weight
  double eps = 0.1;       // floor inside the VAD loss
};

// MAE over real parts + MAE over imaginary parts + MAE over magnitudes,
// each averaged over all T*F cells.
inline double mae_loss(const Spectrogram& est, const Spectrogram& target) {
  if (est.T != target.T || est.F != target.F) throw ShapeError("mae_loss: shape mismatch");
  const std::size_t n = est.v.size();
  if (n == 0) return 0.0;
  double re = 0.0, im = 0.0, mag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    re += std::abs(static_cast<double>(est.v[i].real()) - target.v[i].real());
    im += std::abs(static_cast<double>(est.v[i].imag()) - target.v[i].imag());
    mag += std::abs(std::abs(static_cast<double>(std::abs(est.v[i]))) -
                    std::abs(static_cast<double>(std::abs(target.v[i]))));
  }
  return (re + im + mag) / static_cast<double>(n);
}

// 10*log10(||S_hat restricted to inactive frames||^2 + eps). Drives the
// output toward silence wherever the near-end is absent.
inline double vad_loss(const Spectrogram& est, const VadLabels& labels, double eps = 0.1) {
  if (labels.size() != est.T) throw ShapeError("vad_loss: label count mismatch");
  double energy = 0.0;
  for (std::size_t t = 0; t < est.T; ++t) {
    if (labels[t]) continue;
    for (std::size_t f = 0; f < est.F; ++f) energy += std::norm(est.at(t, f));
  }
  return 10.0 * std::log10(energy + eps);
}

// Echo-aware term. The exact published form lives behind this interface; the
// default realization is the MAE restricted to echo-active frames.
inline double echo_loss(const Spectrogram& est, const Spectrogram& target,
                        const VadLabels& echo_active) {
  if (est.T != target.T || est.F != target.F) throw ShapeError("echo_loss: shape mismatch");
  if (echo_active.size() != est.T) throw ShapeError("echo_loss: mask length mismatch");
  std::size_t active = 0;
  double re = 0.0, im = 0.0, mag = 0.0;
  for (std::size_t t = 0; t < est.T; ++t) {
    if (!echo_active[t]) continue;
    active++;
    for (std::size_t f = 0; f < est.F; ++f) {
      const cfloat a = est.at(t, f), b = target.at(t, f);
      re += std::abs(static_cast<double>(a.real()) - b.real());
      im += std::abs(static_cast<double>(a.imag()) - b.imag());
      mag += std::abs(static_cast<double>(std::abs(a)) - static_cast<double>(std::abs(b)));
    }
  }
  if (active == 0) return 0.0;
  return (re + im + mag) / static_cast<double>(active * est.F);
}

inline double total_loss(const Spectrogram& est, const Spectrogram& target,
                         const VadLabels& vad, const VadLabels& echo_active,
                         const LossWeights& w = {}) {
  return mae_loss(est, target) + w.echo_w * echo_loss(est, target, echo_active) +
         w.beta * vad_loss(est, vad, w.eps);
}

// Frame labels from a reference signal: a frame is active when its RMS is
// within 40 dB of the utterance's peak frame RMS. All-zero input labels
// everything inactive.
inline VadLabels vad_from_signal(const AudioBuffer& ref, const StftConfig& cfg) {
  const std::size_t T = stft_frame_count(ref.samples.size(), cfg);
  std::vector<double> rms(T, 0.0);
  double peak = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double acc = 0.0;
    const float* x = ref.samples.data() + t * cfg.hop;
    for (int i = 0; i < cfg.window_len; ++i) acc += static_cast<double>(x[i]) * x[i];
    rms[t] = std::sqrt(acc / cfg.window_len);
    peak = std::max(peak, rms[t]);
  }
  VadLabels labels(T, 0);
  if (peak <= 0.0) return labels;
  const double thresh = peak * std::pow(10.0, -40.0 / 20.0);
  for (std::size_t t = 0; t < T; ++t) labels[t] = rms[t] > thresh ? 1 : 0;
  return labels;
}

// ---------------------------------------------------------------------------
// Objective metrics
// ---------------------------------------------------------------------------

inline constexpr double kSiSnrCapDb = 80.0;

// Scale-invariant SNR via projection onto the target; capped so the
// identical-signal case reports a finite number.
inline double si_snr(const AudioBuffer& estimate, const AudioBuffer& target) {
  if (estimate.samples.size() != target.samples.size())
    throw ShapeError("si_snr: length mismatch");
  const std::size_t n = target.samples.size();
  if (n == 0) throw NumericError("si_snr: empty signals");
  double mean_e = 0.0, mean_t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_e += estimate.samples[i];
    mean_t += target.samples[i];
  }
  mean_e /= static_cast<double>(n);
  mean_t /= static_cast<double>(n);
  double dot = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = estimate.samples[i] - mean_e;
    const double t = target.samples[i] - mean_t;
    dot += e * t;
    tt += t * t;
  }
  if (tt <= 0.0) throw NumericError("si_snr: zero target");
  const double scale = dot / tt;
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (target.samples[i] - mean_t) * scale;
    const double r = (estimate.samples[i] - mean_e) - t;
    sig += t * t;
    err += r * r;
  }
  if (err <= 0.0 || 10.0 * std::log10(sig / err) > kSiSnrCapDb) return kSiSnrCapDb;
  return 10.0 * std::log10(sig / err);
}

// Echo return loss enhancement over whole signals.
inline double erle(const AudioBuffer& mic, const AudioBuffer& out) {
  if (mic.samples.size() != out.samples.size()) throw ShapeError("erle: length mismatch");
  double pm = 0.0, po = 0.0;
  for (std::size_t i = 0; i < mic.samples.size(); ++i) {
    pm += static_cast<double>(mic.samples[i]) * mic.samples[i];
    po += static_cast<double>(out.samples[i]) * out.samples[i];
  }
  if (po <= 0.0) return 120.0;  // silence out: report the cap
  return 10.0 * std::log10(pm / po);
}

// ERLE over a sample range [begin, end).
inline double erle_segment(const AudioBuffer& mic, const AudioBuffer& out, std::size_t begin,
                           std::size_t end) {
  AudioBuffer a, b;
  a.samples.assign(mic.samples.begin() + begin, mic.samples.begin() + end);
  b.samples.assign(out.samples.begin() + begin, out.samples.begin() + end);
  return erle(a, b);
}

}  // namespace smru
