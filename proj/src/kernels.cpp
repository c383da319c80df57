// SPDX-License-Identifier: Apache-2.0
#include "sgn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

namespace sgn::kernels {

namespace {

// Blocking: op(B) is packed in kKc×kNc panels that stay resident in L2 while
// every block of kMr output rows streams through them.
constexpr std::size_t kMr = 4;
constexpr std::size_t kKc = 256;
constexpr std::size_t kNc = 512;

template <typename Real>
inline Real a_at(Trans ta, const Real* a, std::size_t m, std::size_t k,
                 std::size_t i, std::size_t l) {
  return ta == Trans::no ? a[i * k + l] : a[l * m + i];
}

template <typename Real>
void pack_panel(Trans tb, const Real* b, std::size_t n, std::size_t k,
                std::size_t l0, std::size_t kc, std::size_t j0, std::size_t nc,
                Real* panel) {
  if (tb == Trans::no) {
    for (std::size_t l = 0; l < kc; ++l) {
      std::memcpy(panel + l * nc, b + (l0 + l) * n + j0, nc * sizeof(Real));
    }
  } else {
    for (std::size_t j = 0; j < nc; ++j) {
      const Real* src = b + (j0 + j) * k + l0;
      for (std::size_t l = 0; l < kc; ++l) panel[l * nc + j] = src[l];
    }
  }
}

// C[i0:i0+4, j0:j0+nc] += A[i0:i0+4, l0:l0+kc] · panel.
template <typename Real>
void full_row_block(Trans ta, const Real* a, std::size_t m, std::size_t k,
                    std::size_t i0, std::size_t l0, std::size_t kc,
                    const Real* __restrict panel, std::size_t nc,
                    Real* __restrict c, std::size_t ldc) {
  // Two 64-byte vectors per accumulator row keeps the kMr×kTile tile in registers.
  constexpr std::size_t kTile = 128 / sizeof(Real);
  alignas(64) Real av[kMr * kKc];
  for (std::size_t l = 0; l < kc; ++l) {
    for (std::size_t r = 0; r < kMr; ++r) av[l * kMr + r] = a_at(ta, a, m, k, i0 + r, l0 + l);
  }
  std::size_t jj = 0;
  for (; jj + kTile <= nc; jj += kTile) {
    alignas(64) Real acc[kMr][kTile];
    for (std::size_t r = 0; r < kMr; ++r) {
      std::memcpy(acc[r], c + (i0 + r) * ldc + jj, kTile * sizeof(Real));
    }
    for (std::size_t l = 0; l < kc; ++l) {
      const Real* bp = panel + l * nc + jj;
      const Real* ar = av + l * kMr;
#pragma omp simd
      for (std::size_t j = 0; j < kTile; ++j) {
        const Real bv = bp[j];
#pragma GCC unroll 4
        for (std::size_t r = 0; r < kMr; ++r) acc[r][j] += ar[r] * bv;
      }
    }
    for (std::size_t r = 0; r < kMr; ++r) {
      std::memcpy(c + (i0 + r) * ldc + jj, acc[r], kTile * sizeof(Real));
    }
  }
  if (jj < nc) {
    for (std::size_t r = 0; r < kMr; ++r) {
      Real* crow = c + (i0 + r) * ldc;
      for (std::size_t l = 0; l < kc; ++l) {
        const Real av_rl = av[l * kMr + r];
        const Real* bp = panel + l * nc;
        for (std::size_t j = jj; j < nc; ++j) crow[j] += av_rl * bp[j];
      }
    }
  }
}

template <typename Real>
void partial_row_block(Trans ta, const Real* a, std::size_t m, std::size_t k,
                       std::size_t i0, std::size_t rows, std::size_t l0,
                       std::size_t kc, const Real* __restrict panel, std::size_t nc,
                       Real* __restrict c, std::size_t ldc) {
  for (std::size_t r = 0; r < rows; ++r) {
    Real* crow = c + (i0 + r) * ldc;
    for (std::size_t l = 0; l < kc; ++l) {
      const Real av = a_at(ta, a, m, k, i0 + r, l0 + l);
      const Real* bp = panel + l * nc;
#pragma omp simd
      for (std::size_t j = 0; j < nc; ++j) crow[j] += av * bp[j];
    }
  }
}

template <typename Real>
void gemm_impl(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
               const Real* a, const Real* b, Real* c, bool accumulate,
               bool parallel) {
  if (!accumulate) std::fill(c, c + m * n, Real(0));
  if (m == 0 || n == 0 || k == 0) return;
  std::vector<Real> panel(std::min(k, kKc) * std::min(n, kNc));
  const std::size_t blocks = (m + kMr - 1) / kMr;
  for (std::size_t l0 = 0; l0 < k; l0 += kKc) {
    const std::size_t kc = std::min(kKc, k - l0);
    for (std::size_t j0 = 0; j0 < n; j0 += kNc) {
      const std::size_t nc = std::min(kNc, n - j0);
      pack_panel(tb, b, n, k, l0, kc, j0, nc, panel.data());
      Real* c_block = c + j0;
      const Real* p = panel.data();
#pragma omp parallel for schedule(static) if (parallel && blocks > 1)
      for (std::size_t blk = 0; blk < blocks; ++blk) {
        const std::size_t i0 = blk * kMr;
        const std::size_t rows = std::min(kMr, m - i0);
        if (rows == kMr) {
          full_row_block(ta, a, m, k, i0, l0, kc, p, nc, c_block, n);
        } else {
          partial_row_block(ta, a, m, k, i0, rows, l0, kc, p, nc, c_block, n);
        }
      }
    }
  }
}

}  // namespace

template <typename Real>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const Real* a, const Real* b, Real* c, bool accumulate) {
  gemm_impl(ta, tb, m, n, k, a, b, c, accumulate, true);
}

template <typename Real>
void gemm_batched(Trans ta, Trans tb, std::size_t batch, std::size_t m,
                  std::size_t n, std::size_t k, const Real* a, const Real* b,
                  Real* c, bool accumulate) {
  // Large matrices parallelize inside each product; small ones across the batch.
  if (m >= 64 * kMr) {
    for (std::size_t s = 0; s < batch; ++s) {
      gemm_impl(ta, tb, m, n, k, a + s * m * k, b + s * k * n, c + s * m * n,
                accumulate, true);
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t s = 0; s < batch; ++s) {
    gemm_impl(ta, tb, m, n, k, a + s * m * k, b + s * k * n, c + s * m * n,
              accumulate, false);
  }
}

template <typename Real>
void im2col_temporal(const Real* x, std::size_t outer, std::size_t frames,
                     std::size_t sites, std::size_t channels, std::size_t width,
                     Real* columns) {
  const std::size_t pad = width / 2;
  const std::size_t row_len = channels * width;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t s = 0; s < sites; ++s) {
        Real* row = columns + ((o * frames + t) * sites + s) * row_len;
        for (std::size_t tap = 0; tap < width; ++tap) {
          const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t + tap) -
                                       static_cast<std::ptrdiff_t>(pad);
          const bool inside = src_t >= 0 && src_t < static_cast<std::ptrdiff_t>(frames);
          const Real* src =
              inside ? x + ((o * frames + static_cast<std::size_t>(src_t)) * sites + s) * channels
                     : nullptr;
          for (std::size_t ch = 0; ch < channels; ++ch) {
            row[ch * width + tap] = inside ? src[ch] : Real(0);
          }
        }
      }
    }
  }
}

template <typename Real>
void col2im_temporal(const Real* columns, std::size_t outer, std::size_t frames,
                     std::size_t sites, std::size_t channels, std::size_t width,
                     Real* dx) {
  const std::size_t pad = width / 2;
  const std::size_t row_len = channels * width;
  // Gather form: each dx element sums the column entries that read it, so
  // writes never collide across threads.
#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t s = 0; s < sites; ++s) {
        Real* dst = dx + ((o * frames + t) * sites + s) * channels;
        for (std::size_t tap = 0; tap < width; ++tap) {
          // Output frame that read input frame t through this tap.
          const std::ptrdiff_t out_t = static_cast<std::ptrdiff_t>(t + pad) -
                                       static_cast<std::ptrdiff_t>(tap);
          if (out_t < 0 || out_t >= static_cast<std::ptrdiff_t>(frames)) continue;
          const Real* row =
              columns + ((o * frames + static_cast<std::size_t>(out_t)) * sites + s) * row_len;
          for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] += row[ch * width + tap];
        }
      }
    }
  }
}

template <typename Real>
void pool_max(const Real* x, std::size_t outer, std::size_t n, std::size_t inner,
              Real* out, std::size_t* argmax) {
#pragma omp parallel for schedule(static)
  for (std::size_t o = 0; o < outer; ++o) {
    const Real* base = x + o * n * inner;
    Real* dst = out + o * inner;
    std::size_t* idx = argmax ? argmax + o * inner : nullptr;
    std::copy(base, base + inner, dst);
    if (idx) std::fill(idx, idx + inner, std::size_t{0});
    for (std::size_t i = 1; i < n; ++i) {
      const Real* row = base + i * inner;
      for (std::size_t c = 0; c < inner; ++c) {
        // Strict comparison keeps the lowest index on ties.
        if (row[c] > dst[c]) {
          dst[c] = row[c];
          if (idx) idx[c] = i;
        }
      }
    }
  }
}

template <typename Real>
void pool_avg(const Real* x, std::size_t outer, std::size_t n, std::size_t inner,
              Real* out) {
  const Real scale = Real(1) / static_cast<Real>(n);
#pragma omp parallel for schedule(static)
  for (std::size_t o = 0; o < outer; ++o) {
    const Real* base = x + o * n * inner;
    Real* dst = out + o * inner;
    std::fill(dst, dst + inner, Real(0));
    for (std::size_t i = 0; i < n; ++i) {
      const Real* row = base + i * inner;
      for (std::size_t c = 0; c < inner; ++c) dst[c] += row[c];
    }
    for (std::size_t c = 0; c < inner; ++c) dst[c] *= scale;
  }
}

template <typename Real>
void softmax_rows(const Real* x, std::size_t rows, std::size_t n, Real* out) {
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* src = x + r * n;
    Real* dst = out + r * n;
    const Real peak = *std::max_element(src, src + n);
    Real total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      dst[i] = std::exp(src[i] - peak);
      total += dst[i];
    }
    const Real inv = Real(1) / total;
    for (std::size_t i = 0; i < n; ++i) dst[i] *= inv;
  }
}

namespace reference {

template <typename Real>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const Real* a, const Real* b, Real* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Real sum = 0;
      for (std::size_t l = 0; l < k; ++l) {
        const Real av = ta == Trans::no ? a[i * k + l] : a[l * m + i];
        const Real bv = tb == Trans::no ? b[l * n + j] : b[j * k + l];
        sum += av * bv;
      }
      c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
    }
  }
}

template <typename Real>
void conv1d_temporal(const Real* x, std::size_t outer, std::size_t frames,
                     std::size_t sites, std::size_t c_in, const Real* kernel,
                     std::size_t c_out, std::size_t width, Real* out) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(width / 2);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t s = 0; s < sites; ++s) {
        for (std::size_t co = 0; co < c_out; ++co) {
          Real sum = 0;
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            for (std::size_t tap = 0; tap < width; ++tap) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) - pad +
                                         static_cast<std::ptrdiff_t>(tap);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
              const Real xv =
                  x[((o * frames + static_cast<std::size_t>(src)) * sites + s) * c_in + ci];
              sum += kernel[(co * c_in + ci) * width + tap] * xv;
            }
          }
          out[((o * frames + t) * sites + s) * c_out + co] = sum;
        }
      }
    }
  }
}

template <typename Real>
void pool_max(const Real* x, std::size_t outer, std::size_t n, std::size_t inner,
              Real* out, std::size_t* argmax) {
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < inner; ++c) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (x[(o * n + i) * inner + c] > x[(o * n + best) * inner + c]) best = i;
      }
      out[o * inner + c] = x[(o * n + best) * inner + c];
      if (argmax) argmax[o * inner + c] = best;
    }
  }
}

template <typename Real>
void softmax_rows(const Real* x, std::size_t rows, std::size_t n, Real* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    Real peak = -std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, x[r * n + i]);
    Real total = 0;
    for (std::size_t i = 0; i < n; ++i) total += std::exp(x[r * n + i] - peak);
    for (std::size_t i = 0; i < n; ++i) out[r * n + i] = std::exp(x[r * n + i] - peak) / total;
  }
}

}  // namespace reference

#define SGN_INSTANTIATE_KERNELS(Real)                                                     \
  template void gemm<Real>(Trans, Trans, std::size_t, std::size_t, std::size_t,          \
                           const Real*, const Real*, Real*, bool);                       \
  template void gemm_batched<Real>(Trans, Trans, std::size_t, std::size_t, std::size_t,  \
                                   std::size_t, const Real*, const Real*, Real*, bool);  \
  template void im2col_temporal<Real>(const Real*, std::size_t, std::size_t,             \
                                      std::size_t, std::size_t, std::size_t, Real*);     \
  template void col2im_temporal<Real>(const Real*, std::size_t, std::size_t,             \
                                      std::size_t, std::size_t, std::size_t, Real*);     \
  template void pool_max<Real>(const Real*, std::size_t, std::size_t, std::size_t,       \
                               Real*, std::size_t*);                                     \
  template void pool_avg<Real>(const Real*, std::size_t, std::size_t, std::size_t,       \
                               Real*);                                                   \
  template void softmax_rows<Real>(const Real*, std::size_t, std::size_t, Real*);        \
  template void reference::gemm<Real>(Trans, Trans, std::size_t, std::size_t,            \
                                      std::size_t, const Real*, const Real*, Real*,      \
                                      bool);                                             \
  template void reference::conv1d_temporal<Real>(const Real*, std::size_t, std::size_t,  \
                                                 std::size_t, std::size_t, const Real*,  \
                                                 std::size_t, std::size_t, Real*);       \
  template void reference::pool_max<Real>(const Real*, std::size_t, std::size_t,         \
                                          std::size_t, Real*, std::size_t*);             \
  template void reference::softmax_rows<Real>(const Real*, std::size_t, std::size_t, Real*);

SGN_INSTANTIATE_KERNELS(float)
SGN_INSTANTIATE_KERNELS(double)

#undef SGN_INSTANTIATE_KERNELS

}  // namespace sgn::kernels
