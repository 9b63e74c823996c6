// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "smru/laec.hpp"
#include "smru/model.hpp"
#include "smru/stft.hpp"
#include "smru/stream.hpp"

namespace smru {

struct PipelineResult {
  AudioBuffer enhanced;
  LaecSpectra spectra;
  Spectrogram enhanced_spec;
};

// Batch path: STFT analysis, LAEC, full network forward, overlap-add
// synthesis. Output length equals input length (zero tail if needed).
inline PipelineResult run_offline(const CompiledModel& m, const AudioBuffer& mic,
                                  const AudioBuffer& farend, const StftConfig& stft_cfg,
                                  const LaecConfig& laec_cfg = {}) {
  PipelineResult r;
  r.spectra = laec_process_spectra(mic, farend, stft_cfg, laec_cfg);
  r.enhanced_spec = smru_forward(r.spectra.d, r.spectra.x, r.spectra.e, r.spectra.y, m);
  r.enhanced = istft(r.enhanced_spec, stft_cfg);
  r.enhanced.samples.resize(mic.samples.size(), 0.0f);
  return r;
}

// Streaming path over whole buffers (hop-sized pushes plus flush). Returns
// the latency-compensated signal: the leading hop of warm-up silence is
// dropped and the flush completes the tail, so the result aligns with
// run_offline sample for sample.
inline AudioBuffer run_streaming(const CompiledModel& m, const AudioBuffer& mic,
                                 const AudioBuffer& farend, const StftConfig& stft_cfg,
                                 const LaecConfig& laec_cfg = {}) {
  if (mic.samples.size() != farend.samples.size())
    throw ShapeError("run_streaming: mic and far-end length mismatch");
  const std::size_t hop = static_cast<std::size_t>(stft_cfg.hop);
  const std::size_t pushes = mic.samples.size() / hop;
  StreamState st = stream_create(m, stft_cfg, laec_cfg);
  std::vector<float> collected;
  collected.reserve(mic.samples.size() + hop);
  for (std::size_t b = 0; b < pushes; ++b) {
    const auto out = stream_push(st, m, mic.samples.data() + b * hop,
                                 farend.samples.data() + b * hop, hop);
    collected.insert(collected.end(), out.begin(), out.end());
  }
  const auto tail = stream_flush(st);
  collected.insert(collected.end(), tail.begin(), tail.end());

  AudioBuffer out;
  if (collected.size() > hop)
    out.samples.assign(collected.begin() + static_cast<long>(hop), collected.end());
  out.samples.resize(mic.samples.size(), 0.0f);
  return out;
}

}  // namespace smru
