// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include "smru/errors.hpp"

namespace smru {

using cfloat = std::complex<float>;

namespace detail {

using cdouble = std::complex<double>;

// exp(-2*pi*i*t/n) for t in [0, n).
inline const std::vector<cdouble>& twiddle_table(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::vector<cdouble>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cdouble> tab(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double ang = -6.283185307179586476925287 * static_cast<double>(t) /
                       static_cast<double>(n);
    tab[t] = cdouble(std::cos(ang), std::sin(ang));
  }
  return cache.emplace(n, std::move(tab)).first->second;
}

inline std::size_t smallest_factor(std::size_t n) {
  for (std::size_t p = 2; p * p <= n; ++p)
    if (n % p == 0) return p;
  return n;
}

// Recursive mixed-radix Cooley-Tukey. `tw` is the table of the top-level
// size; `stride` maps this level's unit twiddle onto that table.
inline void fft_rec(std::vector<cdouble>& a, const std::vector<cdouble>& tw,
                    std::size_t stride) {
  const std::size_t n = a.size();
  if (n == 1) return;
  const std::size_t p = smallest_factor(n);
  const std::size_t m = n / p;

  std::vector<std::vector<cdouble>> part(p, std::vector<cdouble>(m));
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t r = 0; r < p; ++r) part[r][j] = a[j * p + r];
  for (std::size_t r = 0; r < p; ++r) fft_rec(part[r], tw, stride * p);

  const std::size_t top = tw.size();
  for (std::size_t k = 0; k < n; ++k) {
    cdouble acc(0.0, 0.0);
    for (std::size_t r = 0; r < p; ++r) {
      const std::size_t idx = (r * k * stride) % top;
      acc += tw[idx] * part[r][k % m];
    }
    a[k] = acc;
  }
}

inline void fft_inplace(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0) return;
  if (inverse)
    for (auto& v : a) v = std::conj(v);
  fft_rec(a, twiddle_table(n), 1);
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : a) v = std::conj(v) * inv;
  }
}

}  // namespace detail

// Forward real FFT: n real samples -> n/2+1 bins.
inline std::vector<cfloat> rfft(const float* x, std::size_t n) {
  std::vector<detail::cdouble> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = detail::cdouble(x[i], 0.0);
  detail::fft_inplace(a, false);
  std::vector<cfloat> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = cfloat(static_cast<float>(a[k].real()), static_cast<float>(a[k].imag()));
  return out;
}

// Inverse of rfft. Enforces Hermitian symmetry from the given half-spectrum
// and discards any residual imaginary part, so non-symmetric model outputs
// still synthesize to real audio.
inline std::vector<float> irfft(const cfloat* spec, std::size_t bins, std::size_t n) {
  if (bins != n / 2 + 1) throw ShapeError("irfft: bins != n/2+1");
  std::vector<detail::cdouble> a(n);
  for (std::size_t k = 0; k < bins; ++k)
    a[k] = detail::cdouble(spec[k].real(), spec[k].imag());
  for (std::size_t k = 1; k + 1 < bins; ++k) a[n - k] = std::conj(a[k]);
  detail::fft_inplace(a, true);
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(a[i].real());
  return out;
}

}  // namespace smru
