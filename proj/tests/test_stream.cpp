// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <sstream>

#include "doctest.h"
#include "smru/pipeline.hpp"
#include "smru/scenario.hpp"
#include "smru/smru.hpp"
#include "test_util.hpp"

using namespace smru;

namespace {

const StftConfig kCfg = StftConfig::make_default();

struct Handle {
  ModelConfig cfg;
  WeightStore store;
  CompiledModel model;
};

Handle make_handle(uint64_t seed = 5, bool postnet = true) {
  Handle h;
  h.cfg = make_preset("T");
  h.cfg.postnet.enabled = postnet;
  h.store = init_weights(h.cfg, seed);
  h.model = compile_model(h.cfg, h.store);
  return h;
}

Scene dt_scene(uint64_t seed, double seconds) {
  SceneSpec spec;
  spec.seed = seed;
  spec.duration_s = seconds;
  spec.scenario = Scenario::DT;
  spec.ser_db = 5.0;
  spec.snr_db = 10.0;
  return mix_scene(spec);
}

}  // namespace

TEST_CASE("pushing silence yields silence") {
  const Handle h = make_handle();
  StreamState st = stream_create(h.model, kCfg);
  std::vector<float> zero(160, 0.0f);
  for (int b = 0; b < 100; ++b) {
    const auto out = stream_push(st, h.model, zero.data(), zero.data(), 160);
    for (float v : out) CHECK(v == 0.0f);
  }
}

TEST_CASE("stream_push rejects wrong chunk sizes") {
  const Handle h = make_handle();
  StreamState st = stream_create(h.model, kCfg);
  std::vector<float> buf(159, 0.0f);
  CHECK_THROWS_AS(stream_push(st, h.model, buf.data(), buf.data(), 159), ShapeError);
}

TEST_CASE("streaming equals offline processing") {
  const Handle h = make_handle();
  const Scene scene = dt_scene(101, 2.0);
  const auto offline = run_offline(h.model, scene.mic, scene.farend, kCfg).enhanced;
  const auto streamed = run_streaming(h.model, scene.mic, scene.farend, kCfg);
  REQUIRE(offline.samples.size() == streamed.samples.size());
  CHECK(testutil::max_abs_diff(offline.samples, streamed.samples) <= 1e-5f);
}

TEST_CASE("streaming equals offline with the postnet disabled too") {
  const Handle h = make_handle(6, false);
  const Scene scene = dt_scene(102, 1.5);
  const auto offline = run_offline(h.model, scene.mic, scene.farend, kCfg).enhanced;
  const auto streamed = run_streaming(h.model, scene.mic, scene.farend, kCfg);
  CHECK(testutil::max_abs_diff(offline.samples, streamed.samples) <= 1e-5f);
}

TEST_CASE("checkpoint restore continues bit-identically") {
  const Handle h = make_handle();
  const Scene scene = dt_scene(103, 2.0);
  const std::size_t hops = scene.mic.samples.size() / 160;
  const std::size_t split = hops / 2;

  StreamState a = stream_create(h.model, kCfg);
  for (std::size_t b = 0; b < split; ++b)
    (void)stream_push(a, h.model, scene.mic.samples.data() + b * 160,
                      scene.farend.samples.data() + b * 160, 160);

  std::stringstream buf;
  stream_serialize(a, buf);
  StreamState b_state = stream_create(h.model, kCfg);
  stream_deserialize(b_state, buf);

  for (std::size_t b = split; b < hops; ++b) {
    const auto oa = stream_push(a, h.model, scene.mic.samples.data() + b * 160,
                                scene.farend.samples.data() + b * 160, 160);
    const auto ob = stream_push(b_state, h.model, scene.mic.samples.data() + b * 160,
                                scene.farend.samples.data() + b * 160, 160);
    CHECK(std::memcmp(oa.data(), ob.data(), oa.size() * sizeof(float)) == 0);
  }
  const auto fa = stream_flush(a);
  const auto fb = stream_flush(b_state);
  CHECK(std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(float)) == 0);
}

TEST_CASE("checkpoint refuses a different architecture") {
  const Handle h = make_handle();
  StreamState st = stream_create(h.model, kCfg);
  std::stringstream buf;
  stream_serialize(st, buf);

  Handle other;
  other.cfg = make_preset("S");
  other.store = init_weights(other.cfg, 1);
  other.model = compile_model(other.cfg, other.store);
  StreamState st2 = stream_create(other.model, kCfg);
  CHECK_THROWS_AS(stream_deserialize(st2, buf), FormatError);
}

TEST_CASE("state footprint is independent of stream length") {
  const Handle h = make_handle();
  StreamState st = stream_create(h.model, kCfg);
  const Scene scene = dt_scene(104, 4.0);
  auto size_of = [&](const StreamState& s) {
    std::stringstream buf;
    stream_serialize(s, buf);
    return buf.str().size();
  };
  std::size_t size_early = 0;
  const std::size_t hops = scene.mic.samples.size() / 160;
  for (std::size_t b = 0; b < hops; ++b) {
    (void)stream_push(st, h.model, scene.mic.samples.data() + b * 160,
                      scene.farend.samples.data() + b * 160, 160);
    if (b == 20) size_early = size_of(st);
  }
  CHECK(size_of(st) == size_early);
}

TEST_CASE("state stays bounded and finite over 1e5 frames") {
  // narrow custom config so the long run stays cheap
  ModelConfig cfg;
  cfg.embedding = 2;
  cfg.postnet.hidden = 16;
  Handle h;
  h.cfg = cfg;
  h.store = init_weights(cfg, 77);
  h.model = compile_model(cfg, h.store);

  StreamState st = stream_create(h.model, kCfg);
  auto size_of = [&](const StreamState& s) {
    std::stringstream buf;
    stream_serialize(s, buf);
    return buf.str().size();
  };
  SplitMix64 rng(78);
  std::vector<float> mic(160), far(160);
  std::size_t size_early = 0;
  for (int b = 0; b < 100000; ++b) {
    for (auto& v : mic) v = rng.uniform(-0.5f, 0.5f);
    for (auto& v : far) v = rng.uniform(-0.5f, 0.5f);
    const auto out = stream_push(st, h.model, mic.data(), far.data(), 160);
    if (b == 1000) size_early = size_of(st);
    if (b % 20000 == 0)
      for (float v : out) REQUIRE(std::isfinite(v));
  }
  CHECK(size_of(st) == size_early);
  for (const auto& blk : st.model.blocks)
    for (float v : blk.gru_h) CHECK(std::isfinite(v));
}

TEST_CASE("per-frame model streaming matches the batch forward bit-exactly") {
  const Handle h = make_handle();
  const std::size_t T = 50, F = 161;
  Spectrogram d(T, F), x(T, F), e(T, F), y(T, F);
  SplitMix64 rng(55);
  for (Spectrogram* s : {&d, &x, &e, &y})
    for (auto& v : s->v) v = cfloat(rng.uniform(-1, 1), rng.uniform(-1, 1));

  const Spectrogram batch = smru_forward(d, x, e, y, h.model);
  ModelStreamState ms = model_stream_init(h.model);
  for (std::size_t t = 0; t < T; ++t) {
    const auto row = model_stream_frame(h.model, ms, d.row(t), x.row(t), e.row(t), y.row(t));
    CHECK(std::memcmp(row.data(), batch.row(t), F * sizeof(cfloat)) == 0);
  }
}
