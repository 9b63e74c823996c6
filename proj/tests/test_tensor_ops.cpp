// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "smru/nn.hpp"
#include "test_util.hpp"

using namespace smru;

TEST_CASE("conv2d with an identity 1x1 kernel is the identity") {
  const Tensor x = testutil::random_tensor({3, 4, 5}, 1);
  Tensor k({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) k(c, c, 0, 0) = 1.0f;
  const Tensor y = conv2d(x, k, Tensor{}, 1, 1, 0, 0, 0, 0);
  CHECK(y.shape == x.shape);
  CHECK(testutil::max_abs_diff(x.data, y.data) == 0.0f);
}

TEST_CASE("conv2d output length formula") {
  const Tensor x = testutil::random_tensor({2, 3, 20}, 2);
  const Tensor k = testutil::random_tensor({4, 2, 1, 4}, 3);
  const Tensor y = conv2d(x, k, Tensor{}, 1, 4, 0, 0, 0, 0);
  CHECK(y.dim(0) == 4);
  CHECK(y.dim(1) == 3);
  CHECK(y.dim(2) == 5);
}

TEST_CASE("conv2d shape errors") {
  const Tensor x = testutil::random_tensor({2, 3, 4}, 4);
  const Tensor k = testutil::random_tensor({1, 2, 5, 5}, 5);
  CHECK_THROWS_AS(conv2d(x, k, Tensor{}, 1, 1, 0, 0, 0, 0), ShapeError);  // kernel > input
  const Tensor k2 = testutil::random_tensor({1, 2, 1, 1}, 6);
  CHECK_THROWS_AS(conv2d(x, k2, Tensor{}, 0, 1, 0, 0, 0, 0), ShapeError);  // stride 0
}

TEST_CASE("conv2d matches the scatter oracle on randomized shapes") {
  SplitMix64 rng(99);
  for (int it = 0; it < 30; ++it) {
    const std::size_t cin = 1 + rng.next_u64() % 3;
    const std::size_t cout = 1 + rng.next_u64() % 3;
    const std::size_t T = 1 + rng.next_u64() % 6;
    const std::size_t F = 1 + rng.next_u64() % 12;
    const std::size_t kt = 1 + rng.next_u64() % std::min<std::size_t>(T, 3);
    const std::size_t kf = 1 + rng.next_u64() % std::min<std::size_t>(F, 5);
    const std::size_t st = 1 + rng.next_u64() % 2;
    const std::size_t sf = 1 + rng.next_u64() % 3;
    const std::size_t pf1 = rng.next_u64() % 3;
    const Tensor x = testutil::random_tensor({cin, T, F}, 1000 + it);
    const Tensor k = testutil::random_tensor({cout, cin, kt, kf}, 2000 + it);
    const Tensor b = testutil::random_tensor({cout}, 3000 + it);
    if (T + 0 < kt || F + pf1 < kf) continue;
    const Tensor got = conv2d(x, k, b, st, sf, 0, 0, 0, pf1);
    const Tensor want = testutil::oracle_conv2d(x, k, b, st, sf, 0, 0, 0, pf1);
    REQUIRE(got.shape == want.shape);
    CHECK(testutil::max_abs_diff(got.data, want.data) < 1e-6f);
  }
}

TEST_CASE("causal conv1d basics") {
  // k=s=1 identity
  const Tensor x = testutil::random_tensor({3, 10}, 7);
  Tensor w({3, 1});
  for (int c = 0; c < 3; ++c) w(c, 0) = 1.0f;
  const Tensor y = causal_conv1d_time(x, w, Tensor{}, 1, 1);
  CHECK(testutil::max_abs_diff(x.data, y.data) == 0.0f);

  // T=100, s=4 -> 25
  const Tensor x2 = testutil::random_tensor({2, 100}, 8);
  const Tensor w2 = testutil::random_tensor({2, 4}, 9);
  CHECK(causal_conv1d_time(x2, w2, Tensor{}, 4, 4).dim(1) == 25);

  // k != s rejected
  CHECK_THROWS_AS(causal_conv1d_time(x2, w2, Tensor{}, 4, 2), ConfigError);
}

TEST_CASE("causal conv1d: perturbing input frame 37 changes only output frame 9") {
  Tensor x = testutil::random_tensor({2, 100}, 10);
  const Tensor w = testutil::random_tensor({2, 4}, 11);
  const Tensor base = causal_conv1d_time(x, w, Tensor{}, 4, 4);
  x(1, 37) += 1.0f;
  const Tensor mod = causal_conv1d_time(x, w, Tensor{}, 4, 4);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t j = 0; j < base.dim(1); ++j) {
      const bool expect_change = (j == 9 && c == 1);
      CHECK((base(c, j) != mod(c, j)) == expect_change);
    }
}

TEST_CASE("gru with all-zero parameters decays the state by half per step") {
  GruParams p;
  p.input_dim = p.hidden_dim = 3;
  p.wz = Tensor({3, 3});
  p.wr = Tensor({3, 3});
  p.wn = Tensor({3, 3});
  p.uz = Tensor({3, 3});
  p.ur = Tensor({3, 3});
  p.un = Tensor({3, 3});
  p.bz = Tensor({3});
  p.br = Tensor({3});
  p.bn = Tensor({3});

  // from h0 = 0 every output stays 0
  const auto x = testutil::random_vector(5 * 3, 12);
  const auto out = gru_forward(p, x.data(), 5, {0.0f, 0.0f, 0.0f});
  for (float v : out) CHECK(v == 0.0f);

  // from a nonzero state: h_t = 0.5^t * h0
  std::vector<float> h{1.0f, -2.0f, 0.5f};
  gru_step(p, x.data(), h.data());
  CHECK(h[0] == doctest::Approx(0.5f));
  CHECK(h[1] == doctest::Approx(-1.0f));
  CHECK(h[2] == doctest::Approx(0.25f));
}

TEST_CASE("gru single step matches hand-computed gate arithmetic (2-dim)") {
  GruParams p;
  p.input_dim = p.hidden_dim = 2;
  p.wz = Tensor({2, 2});
  p.wz(0, 0) = 0.3f; p.wz(0, 1) = -0.2f; p.wz(1, 0) = 0.1f; p.wz(1, 1) = 0.4f;
  p.wr = Tensor({2, 2});
  p.wr(0, 0) = -0.5f; p.wr(0, 1) = 0.2f; p.wr(1, 0) = 0.6f; p.wr(1, 1) = -0.1f;
  p.wn = Tensor({2, 2});
  p.wn(0, 0) = 0.2f; p.wn(0, 1) = 0.7f; p.wn(1, 0) = -0.3f; p.wn(1, 1) = 0.5f;
  p.uz = Tensor({2, 2});
  p.uz(0, 0) = 0.1f; p.uz(0, 1) = 0.0f; p.uz(1, 0) = -0.2f; p.uz(1, 1) = 0.3f;
  p.ur = Tensor({2, 2});
  p.ur(0, 0) = 0.4f; p.ur(0, 1) = -0.4f; p.ur(1, 0) = 0.2f; p.ur(1, 1) = 0.1f;
  p.un = Tensor({2, 2});
  p.un(0, 0) = -0.1f; p.un(0, 1) = 0.2f; p.un(1, 0) = 0.5f; p.un(1, 1) = -0.6f;
  p.bz = Tensor({2}); p.bz(0) = 0.05f; p.bz(1) = -0.05f;
  p.br = Tensor({2}); p.br(0) = 0.1f; p.br(1) = 0.0f;
  p.bn = Tensor({2}); p.bn(0) = -0.2f; p.bn(1) = 0.3f;

  const float x[2] = {0.8f, -0.6f};
  std::vector<float> h{0.25f, -0.5f};

  // scalar-by-scalar expectation in doubles
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  double z[2], r[2], n[2], want[2];
  for (int o = 0; o < 2; ++o) {
    const double az = p.bz(o) + p.wz(o, 0) * x[0] + p.wz(o, 1) * x[1] +
                      p.uz(o, 0) * h[0] + p.uz(o, 1) * h[1];
    const double ar = p.br(o) + p.wr(o, 0) * x[0] + p.wr(o, 1) * x[1] +
                      p.ur(o, 0) * h[0] + p.ur(o, 1) * h[1];
    z[o] = sig(az);
    r[o] = sig(ar);
  }
  for (int o = 0; o < 2; ++o) {
    const double uh = p.un(o, 0) * h[0] + p.un(o, 1) * h[1];
    n[o] = std::tanh(p.bn(o) + p.wn(o, 0) * x[0] + p.wn(o, 1) * x[1] + r[o] * uh);
    want[o] = z[o] * h[o] + (1.0 - z[o]) * n[o];
  }

  gru_step(p, x, h.data());
  CHECK(std::abs(h[0] - want[0]) < 1e-6);
  CHECK(std::abs(h[1] - want[1]) < 1e-6);
}

TEST_CASE("gru is causal: later inputs cannot change earlier outputs") {
  GruParams p;
  p.input_dim = p.hidden_dim = 4;
  const uint64_t s = 77;
  p.wz = seeded_init({4, 4}, s + 1, InitScheme::UniformFanIn);
  p.wr = seeded_init({4, 4}, s + 2, InitScheme::UniformFanIn);
  p.wn = seeded_init({4, 4}, s + 3, InitScheme::UniformFanIn);
  p.uz = seeded_init({4, 4}, s + 4, InitScheme::UniformFanIn);
  p.ur = seeded_init({4, 4}, s + 5, InitScheme::UniformFanIn);
  p.un = seeded_init({4, 4}, s + 6, InitScheme::UniformFanIn);
  p.bz = Tensor({4});
  p.br = Tensor({4});
  p.bn = Tensor({4});
  auto x = testutil::random_vector(10 * 4, 13);
  const auto base = gru_forward(p, x.data(), 10, std::vector<float>(4, 0.0f));
  x[6 * 4 + 2] += 1.0f;
  const auto mod = gru_forward(p, x.data(), 10, std::vector<float>(4, 0.0f));
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t o = 0; o < 4; ++o) CHECK(base[t * 4 + o] == mod[t * 4 + o]);
  bool later_changed = false;
  for (std::size_t i = 6 * 4; i < base.size(); ++i)
    if (base[i] != mod[i]) later_changed = true;
  CHECK(later_changed);
}

TEST_CASE("layer_norm fundamentals") {
  LayerNormParams p;
  p.gain = seeded_init({8}, 0, InitScheme::Ones);
  p.bias = Tensor({8});

  // constant input -> zeros
  std::vector<float> c(8, 3.7f);
  layer_norm(p, c.data(), 8);
  for (float v : c) CHECK(std::abs(v) < 1e-3f);

  // random input -> zero mean, unit variance
  auto x = testutil::random_vector(8, 14);
  layer_norm(p, x.data(), 8);
  float mean = 0.0f, var = 0.0f;
  for (float v : x) mean += v;
  mean /= 8.0f;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= 8.0f;
  CHECK(std::abs(mean) < 1e-5f);
  CHECK(var == doctest::Approx(1.0f).epsilon(1e-3));

  // affine: gain 2, bias 1 maps normalized v to 2v + 1
  LayerNormParams p2;
  p2.gain = Tensor({8});
  p2.bias = Tensor({8});
  for (int i = 0; i < 8; ++i) {
    p2.gain(i) = 2.0f;
    p2.bias(i) = 1.0f;
  }
  auto y = testutil::random_vector(8, 15);
  auto y2 = y;
  layer_norm(p, y.data(), 8);   // v
  layer_norm(p2, y2.data(), 8); // 2v + 1
  for (int i = 0; i < 8; ++i) CHECK(y2[i] == doctest::Approx(2.0f * y[i] + 1.0f).epsilon(1e-4));
}

TEST_CASE("layer_norm is invariant to additive shift") {
  LayerNormParams p;
  p.gain = seeded_init({16}, 0, InitScheme::Ones);
  p.bias = Tensor({16});
  auto a = testutil::random_vector(16, 16);
  auto b = a;
  for (auto& v : b) v += 5.0f;
  layer_norm(p, a.data(), 16);
  layer_norm(p, b.data(), 16);
  CHECK(testutil::max_abs_diff(a, b) < 1e-4f);
}

TEST_CASE("linear identity, bias-only and oracle") {
  Tensor w({3, 3});
  for (int i = 0; i < 3; ++i) w(i, i) = 1.0f;
  const std::vector<float> x{1.5f, -2.0f, 0.25f};
  CHECK(linear(x, w, Tensor{}) == x);

  Tensor zero_w({2, 3});
  Tensor b({2});
  b(0) = 4.0f;
  b(1) = -1.0f;
  const auto y = linear(x, zero_w, b);
  CHECK(y[0] == 4.0f);
  CHECK(y[1] == -1.0f);

  for (int it = 0; it < 50; ++it) {
    const Tensor rw = testutil::random_tensor({5, 7}, 500 + it);
    const Tensor rb = testutil::random_tensor({5}, 600 + it);
    const auto rx = testutil::random_vector(7, 700 + it);
    const auto got = linear(rx, rw, rb);
    for (int o = 0; o < 5; ++o) {
      double acc = rb(o);
      for (int i = 0; i < 7; ++i) acc += static_cast<double>(rw(o, i)) * rx[i];
      CHECK(std::abs(got[o] - acc) < 1e-6);
    }
  }
}

TEST_CASE("seeded_init determinism and schemes") {
  const auto a = seeded_init({4, 9}, 42, InitScheme::UniformFanIn);
  const auto b = seeded_init({4, 9}, 42, InitScheme::UniformFanIn);
  CHECK(a.data == b.data);

  const auto c = seeded_init({4, 9}, 43, InitScheme::UniformFanIn);
  CHECK(a.data != c.data);

  const auto z = seeded_init({4, 9}, 1, InitScheme::Zeros);
  for (float v : z.data) CHECK(v == 0.0f);
  const auto o = seeded_init({4, 9}, 1, InitScheme::Ones);
  for (float v : o.data) CHECK(v == 1.0f);

  // fan-in bound: |v| <= 1/sqrt(9)
  for (float v : a.data) CHECK(std::abs(v) <= 1.0f / 3.0f + 1e-7f);
}
