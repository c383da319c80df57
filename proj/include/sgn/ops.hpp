// SPDX-License-Identifier: Apache-2.0
//
// Differentiable tensor operations recorded on a Tape.
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "sgn/tape.hpp"

namespace sgn::ops {

/// C[m×n] = A[m×k]·B[k×n].
template <typename Real>
Var<Real> matmul(Var<Real> a, Var<Real> b);

/// Batched product over matching leading axes: a[...×m×k]·b[...×k×n], or
/// a[...×m×k]·b[...×n×k]ᵀ when transpose_b is set.
template <typename Real>
Var<Real> bmm(Var<Real> a, Var<Real> b, bool transpose_b = false);

/// y = x·Wᵀ (+ b) over the last axis; W is [d_out×d_in].
template <typename Real>
Var<Real> affine(Var<Real> x, Var<Real> weight, std::optional<Var<Real>> bias = std::nullopt);

template <typename Real>
Var<Real> affine(Var<Real> x, Var<Real> weight, Var<Real> bias) {
  return affine(x, weight, std::optional<Var<Real>>(bias));
}

template <typename Real>
Var<Real> relu(Var<Real> x);

template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b);

template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b);

template <typename Real>
Var<Real> scale(Var<Real> x, Real factor);

template <typename Real>
Var<Real> sum(Var<Real> x);

template <typename Real>
Var<Real> mean(Var<Real> x);

template <typename Real>
Var<Real> reshape(Var<Real> x, Shape shape);

/// Broadcasts x to `shape` (trailing-aligned; each source dim is 1 or equal).
template <typename Real>
Var<Real> expand(Var<Real> x, Shape shape);

/// Concatenates along the last axis; leading axes must match.
template <typename Real>
Var<Real> concat_last(Var<Real> a, Var<Real> b);

/// Softmax over the last axis.
template <typename Real>
Var<Real> softmax_rows(Var<Real> x);

/// Running statistics owned by the model; updated in training mode.
template <typename Real>
struct BatchNormState {
  Tensor<Real>* running_mean = nullptr;
  Tensor<Real>* running_var = nullptr;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalization over every axis except `channel_axis`.
/// Training mode uses batch statistics (biased variance) and folds them into
/// the running statistics (unbiased variance); eval mode uses the running ones.
template <typename Real>
Var<Real> batch_norm(Var<Real> x, Var<Real> gamma, Var<Real> beta,
                     BatchNormState<Real> state, std::size_t channel_axis,
                     bool training);

/// Temporal cross-correlation. x is [B×T×C_in] or [B×T×S×C_in] (S independent
/// sites), kernel is [C_out×C_in×k] with odd k, zero padding keeps T.
template <typename Real>
Var<Real> conv1d_temporal(Var<Real> x, Var<Real> kernel,
                          std::optional<Var<Real>> bias = std::nullopt);

template <typename Real>
Var<Real> conv1d_temporal(Var<Real> x, Var<Real> kernel, Var<Real> bias) {
  return conv1d_temporal(x, kernel, std::optional<Var<Real>>(bias));
}

enum class PoolMode { max, avg };

template <typename Real>
struct PoolResult {
  Var<Real> output;
  /// Max mode only: index along the pooled axis chosen for each output element.
  std::vector<std::size_t> argmax;
};

/// Reduces `axis` completely. Max ties go to the lowest index.
template <typename Real>
PoolResult<Real> pool_axis(Var<Real> x, std::size_t axis, PoolMode mode);

}  // namespace sgn::ops
