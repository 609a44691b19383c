#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "hsad/error.hpp"

namespace hsad::fft {

using Complex = std::complex<double>;

namespace detail {

inline std::size_t smallest_factor(std::size_t n) {
  if (n % 2 == 0) return 2;
  for (std::size_t p = 3; p * p <= n; p += 2) {
    if (n % p == 0) return p;
  }
  return n;
}

// Twiddle table for length n: tw[k] = exp(-2*pi*i*k/n).
inline std::vector<Complex> twiddles(std::size_t n) {
  std::vector<Complex> tw(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    tw[k] = {std::cos(angle), std::sin(angle)};
  }
  return tw;
}

// Decimation in time over the smallest prime factor p of n: split the input
// into p interleaved subsequences, transform each, then recombine with
// twiddles. A prime length falls through to a direct p-point sum.
// `tw` is the table for the top-level length; `stride` maps this level's
// exponents into it.
inline void transform(const Complex* in, std::size_t in_stride, std::size_t n, Complex* out,
                      const std::vector<Complex>& tw, std::size_t tw_stride) {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = smallest_factor(n);
  const std::size_t m = n / p;
  // out[r*m .. r*m+m) holds the m-point transform of subsequence r.
  for (std::size_t r = 0; r < p; ++r) {
    transform(in + r * in_stride, in_stride * p, m, out + r * m, tw, tw_stride * p);
  }
  const std::size_t top = tw.size();
  std::vector<Complex> sub(out, out + n);
  std::vector<Complex> terms(p);
  for (std::size_t q = 0; q < m; ++q) {
    for (std::size_t r = 0; r < p; ++r) {
      terms[r] = sub[r * m + q] * tw[(r * q * tw_stride) % top];
    }
    for (std::size_t s = 0; s < p; ++s) {
      // k = q + s*m; W_n^{r*k} = W_n^{r*q} * W_p^{r*s}
      Complex acc = terms[0];
      for (std::size_t r = 1; r < p; ++r) {
        acc += terms[r] * tw[((r * s) % p) * m * tw_stride % top];
      }
      out[q + s * m] = acc;
    }
  }
}

}  // namespace detail

// Unnormalized forward DFT, X[k] = sum_t x[t] exp(-2*pi*i*k*t/N), any N >= 1.
inline std::vector<Complex> forward(std::span<const Complex> x) {
  require(!x.empty(), ErrorCode::kInvalidArgument, "fft::forward: empty input");
  std::vector<Complex> out(x.size());
  const auto tw = detail::twiddles(x.size());
  detail::transform(x.data(), 1, x.size(), out.data(), tw, 1);
  return out;
}

inline std::vector<Complex> forward_real(std::span<const double> x) {
  std::vector<Complex> cx(x.begin(), x.end());
  return forward(cx);
}

}  // namespace hsad::fft
