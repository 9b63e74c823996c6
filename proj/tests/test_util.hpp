// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "smru/rng.hpp"
#include "smru/tensor.hpp"

namespace testutil {

inline smru::Tensor random_tensor(std::vector<std::size_t> shape, uint64_t seed,
                                  float lo = -1.0f, float hi = 1.0f) {
  smru::Tensor t(std::move(shape));
  smru::SplitMix64 rng(seed);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

inline std::vector<float> random_vector(std::size_t n, uint64_t seed, float lo = -1.0f,
                                        float hi = 1.0f) {
  std::vector<float> v(n);
  smru::SplitMix64 rng(seed);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline float max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Naive direct DFT, the transform oracle.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = -6.283185307179586 * static_cast<double>(k) * i / n;
      acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Scatter-style convolution oracle: accumulates input contributions instead
// of gathering per output element, so it is an independent computation path.
inline smru::Tensor oracle_conv2d(const smru::Tensor& x, const smru::Tensor& k,
                                  const smru::Tensor& bias, std::size_t st, std::size_t sf,
                                  std::size_t pt0, std::size_t pt1, std::size_t pf0,
                                  std::size_t pf1) {
  const std::size_t cin = x.dim(0), T = x.dim(1), F = x.dim(2);
  const std::size_t cout = k.dim(0), kt = k.dim(2), kf = k.dim(3);
  const std::size_t out_t = (T + pt0 + pt1 - kt) / st + 1;
  const std::size_t out_f = (F + pf0 + pf1 - kf) / sf + 1;
  std::vector<double> acc(cout * out_t * out_f, 0.0);
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t it = 0; it < T; ++it)
      for (std::size_t jf = 0; jf < F; ++jf)
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t a = 0; a < kt; ++a)
            for (std::size_t b = 0; b < kf; ++b) {
              const std::size_t tp = it + pt0, fp = jf + pf0;
              if (tp < a || fp < b) continue;
              if ((tp - a) % st || (fp - b) % sf) continue;
              const std::size_t ot = (tp - a) / st, of = (fp - b) / sf;
              if (ot >= out_t || of >= out_f) continue;
              acc[(co * out_t + ot) * out_f + of] +=
                  static_cast<double>(k(co, ci, a, b)) * x(ci, it, jf);
            }
  smru::Tensor out({cout, out_t, out_f});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t ot = 0; ot < out_t; ++ot)
      for (std::size_t of = 0; of < out_f; ++of)
        out(co, ot, of) = static_cast<float>(acc[(co * out_t + ot) * out_f + of] +
                                             (bias.numel() ? bias(co) : 0.0f));
  return out;
}

}  // namespace testutil
