// SPDX-License-Identifier: Apache-2.0
//
// Raw-pointer compute kernels behind the differentiable ops. Every kernel in
// `sgn::kernels` has a serial twin in `sgn::kernels::reference` written as
// the plainest possible loop nest; tests compare the two and the benchmark
// target times them against each other.
//
// Parallel kernels split work only across independent output rows (or
// batches), so each output element is reduced in a fixed order and results
// do not depend on the thread count.
#pragma once

#include <cstddef>

namespace sgn::kernels {

enum class Trans { no, yes };

/// Row-major C[m×n] (+)= op(A)·op(B), op(A) is m×k and op(B) is k×n.
/// A is stored m×k (Trans::no) or k×m (Trans::yes); likewise B.
template <typename Real>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const Real* a, const Real* b, Real* c, bool accumulate);

/// `batch` independent gemms over contiguous, equally sized operands.
template <typename Real>
void gemm_batched(Trans ta, Trans tb, std::size_t batch, std::size_t m,
                  std::size_t n, std::size_t k, const Real* a, const Real* b,
                  Real* c, bool accumulate);

/// Unfolds x[outer×T×sites×C] into columns[(outer·T·sites)×(C·width)] for a
/// zero-padded temporal window of odd `width` centred on each frame. Column
/// order is (channel, tap) to match kernels laid out [C_out][C_in][width].
template <typename Real>
void im2col_temporal(const Real* x, std::size_t outer, std::size_t frames,
                     std::size_t sites, std::size_t channels, std::size_t width,
                     Real* columns);

/// Adjoint of im2col_temporal: scatters column gradients back onto dx.
template <typename Real>
void col2im_temporal(const Real* columns, std::size_t outer, std::size_t frames,
                     std::size_t sites, std::size_t channels, std::size_t width,
                     Real* dx);

/// Reduces the middle axis of x[outer×n×inner]. Max mode writes the first
/// index attaining the maximum into `argmax` (may be null for avg mode).
template <typename Real>
void pool_max(const Real* x, std::size_t outer, std::size_t n, std::size_t inner,
              Real* out, std::size_t* argmax);

template <typename Real>
void pool_avg(const Real* x, std::size_t outer, std::size_t n, std::size_t inner,
              Real* out);

/// Numerically stable softmax over each contiguous row of length n.
template <typename Real>
void softmax_rows(const Real* x, std::size_t rows, std::size_t n, Real* out);

namespace reference {

template <typename Real>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const Real* a, const Real* b, Real* c, bool accumulate);

/// Direct sliding-window cross-correlation, x[outer×T×sites×C_in] with
/// kernel[C_out×C_in×width] and zero padding, out[outer×T×sites×C_out].
template <typename Real>
void conv1d_temporal(const Real* x, std::size_t outer, std::size_t frames,
                     std::size_t sites, std::size_t c_in, const Real* kernel,
                     std::size_t c_out, std::size_t width, Real* out);

template <typename Real>
void pool_max(const Real* x, std::size_t outer, std::size_t n, std::size_t inner,
              Real* out, std::size_t* argmax);

template <typename Real>
void softmax_rows(const Real* x, std::size_t rows, std::size_t n, Real* out);

}  // namespace reference

}  // namespace sgn::kernels
