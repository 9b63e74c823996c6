// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "smru/audio.hpp"
#include "smru/errors.hpp"
#include "smru/rng.hpp"

namespace smru {

enum class Scenario { ST_NE, ST_FE, DT };

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::ST_NE: return "ST-NE";
    case Scenario::ST_FE: return "ST-FE";
    case Scenario::DT: return "DT";
  }
  return "?";
}

inline Scenario scenario_from_name(const std::string& s) {
  if (s == "ST-NE" || s == "st-ne") return Scenario::ST_NE;
  if (s == "ST-FE" || s == "st-fe") return Scenario::ST_FE;
  if (s == "DT" || s == "dt") return Scenario::DT;
  throw ConfigError("unknown scenario '" + s + "'");
}

struct RirSpec {
  int length_ms = 100;
  double t60_ms = 60.0;
};

// Fully synthetic scene recipe; everything derives from the seed.
struct SceneSpec {
  uint64_t seed = 1;
  double duration_s = 4.0;
  Scenario scenario = Scenario::DT;
  double ser_db = 5.0;  // +inf for ST-NE, -inf for ST-FE
  double snr_db = 15.0; // +inf disables noise
  RirSpec rir;

  void validate() const {
    if (duration_s <= 0) throw ConfigError("scene: duration must be positive");
    const bool ser_pinf = std::isinf(ser_db) && ser_db > 0;
    const bool ser_ninf = std::isinf(ser_db) && ser_db < 0;
    if ((scenario == Scenario::ST_NE) != ser_pinf)
      throw ConfigError("scene: ST-NE requires ser=+inf (and only then)");
    if ((scenario == Scenario::ST_FE) != ser_ninf)
      throw ConfigError("scene: ST-FE requires ser=-inf (and only then)");
  }
};

struct Scene {
  AudioBuffer mic;       // d = nearend + echo + noise, sample-wise
  AudioBuffer farend;    // x
  AudioBuffer nearend;   // s
  AudioBuffer echo;
  AudioBuffer noise;
  double measured_ser_db = 0.0;
  double measured_snr_db = 0.0;
};

// White taps shaped by the exponential envelope implied by T60, normalized
// to unit energy. t60 <= 0 degenerates to a single dominant tap.
inline std::vector<float> synth_rir(const RirSpec& spec, uint64_t seed) {
  const int n = std::max(1, spec.length_ms * kSampleRate / 1000);
  std::vector<float> taps(n, 0.0f);
  SplitMix64 rng(seed);
  if (spec.t60_ms <= 0.0) {
    taps[0] = 1.0f;
    return taps;
  }
  // amplitude envelope 10^(-3 t / T60): -60 dB at t = T60
  const double t60_samples = spec.t60_ms * kSampleRate / 1000.0;
  const double decay = std::log(10.0) * 3.0 / t60_samples;
  for (int i = 0; i < n; ++i)
    taps[i] = rng.gaussian() * static_cast<float>(std::exp(-decay * i));
  double energy = 0.0;
  for (float t : taps) energy += static_cast<double>(t) * t;
  const float norm = static_cast<float>(1.0 / std::sqrt(energy));
  for (auto& t : taps) t *= norm;
  return taps;
}

// Deterministic speech-like signal: pitch harmonics with 1/k rolloff under a
// syllabic on/off envelope. Adequate excitation for the adaptive filter and
// the property suites, not a corpus replacement. When given, `f0_out`
// receives the fundamental drawn for this seed.
inline AudioBuffer synth_speech(uint64_t seed, double duration_s, double* f0_out = nullptr) {
  AudioBuffer out;
  const std::size_t n = static_cast<std::size_t>(duration_s * kSampleRate);
  out.samples.assign(n, 0.0f);
  SplitMix64 rng(seed);
  const double f0 = 100.0 + rng.next_double() * 120.0;
  if (f0_out) *f0_out = f0;
  const int harmonics = std::max(3, static_cast<int>(3600.0 / f0));
  std::vector<double> phase(harmonics);
  for (auto& p : phase) p = rng.next_double() * 6.283185307179586;

  // syllabic gating: alternating voiced bursts and pauses
  std::vector<float> env(n, 0.0f);
  std::size_t pos = 0;
  while (pos < n) {
    const std::size_t burst = static_cast<std::size_t>((0.15 + 0.25 * rng.next_double()) * kSampleRate);
    const std::size_t pause = static_cast<std::size_t>((0.05 + 0.15 * rng.next_double()) * kSampleRate);
    const double level = 0.5 + 0.5 * rng.next_double();
    const std::size_t ramp = 160;
    for (std::size_t i = 0; i < burst && pos + i < n; ++i) {
      double g = level;
      if (i < ramp) g *= static_cast<double>(i) / ramp;
      const std::size_t left = burst - i;
      if (left < ramp) g *= static_cast<double>(left) / ramp;
      env[pos + i] = static_cast<float>(g);
    }
    pos += burst + pause;
  }

  // phase accumulation keeps the vibrato excursion at +-0.4% of f0
  const double vibrato_hz = 4.0 + 2.0 * rng.next_double();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const double f = f0 * (1.0 + 0.004 * std::sin(6.283185307179586 * vibrato_hz * t));
    const double inc = 6.283185307179586 * f / kSampleRate;
    double v = 0.0;
    for (int k = 1; k <= harmonics; ++k) {
      phase[k - 1] += k * inc;
      v += std::sin(phase[k - 1]) / k;
    }
    out.samples[i] = static_cast<float>(v) * env[i];
  }
  // normalize peak to a sane capture level
  float peak = 0.0f;
  for (float v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0f)
    for (auto& v : out.samples) v *= 0.5f / peak;
  return out;
}

inline AudioBuffer synth_noise(uint64_t seed, double duration_s) {
  AudioBuffer out;
  const std::size_t n = static_cast<std::size_t>(duration_s * kSampleRate);
  out.samples.assign(n, 0.0f);
  SplitMix64 rng(seed);
  float prev = 0.0f;
  for (auto& v : out.samples) {
    prev = 0.8f * prev + 0.2f * rng.gaussian();  // one-pole lowpass, pink-ish
    v = prev;
  }
  return out;
}

inline AudioBuffer convolve(const AudioBuffer& x, const std::vector<float>& taps) {
  AudioBuffer out;
  out.samples.assign(x.samples.size(), 0.0f);
  for (std::size_t i = 0; i < x.samples.size(); ++i) {
    float acc = 0.0f;
    const std::size_t kmax = std::min(taps.size(), i + 1);
    for (std::size_t k = 0; k < kmax; ++k) acc += taps[k] * x.samples[i - k];
    out.samples[i] = acc;
  }
  return out;
}

// Mean power over samples whose 20 ms frame RMS is within 40 dB of the
// signal's peak frame RMS. SER/SNR calibration is defined on these frames.
inline double active_power(const AudioBuffer& sig) {
  const int win = 320, hop = 160;
  if (sig.samples.size() < static_cast<std::size_t>(win)) {
    double p = 0.0;
    for (float v : sig.samples) p += static_cast<double>(v) * v;
    return sig.samples.empty() ? 0.0 : p / static_cast<double>(sig.samples.size());
  }
  const std::size_t T = 1 + (sig.samples.size() - win) / hop;
  std::vector<double> pw(T);
  double peak = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double acc = 0.0;
    for (int i = 0; i < win; ++i) {
      const double v = sig.samples[t * hop + i];
      acc += v * v;
    }
    pw[t] = acc / win;
    peak = std::max(peak, pw[t]);
  }
  if (peak <= 0.0) return 0.0;
  const double gate = peak * 1e-4;  // -40 dB in power
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < T; ++t)
    if (pw[t] > gate) {
      sum += pw[t];
      count++;
    }
  return count ? sum / static_cast<double>(count) : 0.0;
}

// Builds the scene: echo = farend * rir scaled to the requested SER against
// the near-end (measured on active frames), noise scaled to the requested
// SNR, mic composed exactly as s + echo + noise.
inline Scene mix_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  const std::size_t n = static_cast<std::size_t>(spec.duration_s * kSampleRate);

  scene.nearend = (spec.scenario == Scenario::ST_FE)
                      ? AudioBuffer{std::vector<float>(n, 0.0f), kSampleRate}
                      : synth_speech(derive_seed(spec.seed, "nearend"), spec.duration_s);
  scene.farend = (spec.scenario == Scenario::ST_NE)
                     ? AudioBuffer{std::vector<float>(n, 0.0f), kSampleRate}
                     : synth_speech(derive_seed(spec.seed, "farend"), spec.duration_s);

  if (spec.scenario == Scenario::ST_NE) {
    scene.echo.samples.assign(n, 0.0f);
  } else {
    const auto rir = synth_rir(spec.rir, derive_seed(spec.seed, "rir"));
    scene.echo = convolve(scene.farend, rir);
    const double pe = active_power(scene.echo);
    if (pe > 0.0) {
      double gain;
      if (spec.scenario == Scenario::ST_FE) {
        // no near-end reference: place the echo at a nominal capture level
        gain = 0.1 / std::sqrt(pe);
      } else {
        const double ps = active_power(scene.nearend);
        gain = std::sqrt(ps / (pe * std::pow(10.0, spec.ser_db / 10.0)));
      }
      for (auto& v : scene.echo.samples) v = static_cast<float>(v * gain);
    }
  }

  if (std::isinf(spec.snr_db) && spec.snr_db > 0) {
    scene.noise.samples.assign(n, 0.0f);
  } else {
    scene.noise = synth_noise(derive_seed(spec.seed, "noise"), spec.duration_s);
    const double pref = (spec.scenario == Scenario::ST_FE) ? active_power(scene.echo)
                                                           : active_power(scene.nearend);
    const double pn = active_power(scene.noise);
    const double gain = pn > 0.0 ? std::sqrt(pref / (pn * std::pow(10.0, spec.snr_db / 10.0)))
                                 : 0.0;
    for (auto& v : scene.noise.samples) v = static_cast<float>(v * gain);
  }

  scene.mic.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    scene.mic.samples[i] =
        scene.nearend.samples[i] + scene.echo.samples[i] + scene.noise.samples[i];

  const double ps = active_power(scene.nearend);
  const double pe = active_power(scene.echo);
  const double pn = active_power(scene.noise);
  const double inf = std::numeric_limits<double>::infinity();
  scene.measured_ser_db = pe > 0.0 ? (ps > 0.0 ? 10.0 * std::log10(ps / pe) : -inf) : inf;
  scene.measured_snr_db = pn > 0.0
                              ? 10.0 * std::log10((spec.scenario == Scenario::ST_FE ? pe : ps) / pn)
                              : inf;
  return scene;
}

}  // namespace smru
