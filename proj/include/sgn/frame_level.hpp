// SPDX-License-Identifier: Apache-2.0
//
// Frame-index injection, spatial max-pooling, temporal convolutions and
// the classifier.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sgn/ops.hpp"

namespace sgn {

/// z [B×T×J×C] plus f̃_t [T×C] on every joint of frame t.
template <typename Real>
Var<Real> add_frame_index(Var<Real> z, Var<Real> frame_index);

template <typename Real>
struct SmpResult {
  Var<Real> pooled;  // [B×T×C]
  /// Joint chosen per (b, t, c), row-major over [B×T×C].
  std::vector<std::size_t> trace;
};

template <typename Real>
SmpResult<Real> spatial_maxpool(Var<Real> z);

template <typename Real>
struct FrameLevelParams {
  Var<Real> cnn1, gamma1, beta1;
  ops::BatchNormState<Real> bn1;
  Var<Real> cnn2, gamma2, beta2;
  ops::BatchNormState<Real> bn2;
};

/// x is [B×T×C3], or [B×T×J×C3] when the joint axis is kept (convolutions
/// then run per joint and pooling covers joints and frames). Returns [B×C4].
template <typename Real>
Var<Real> frame_level_forward(Var<Real> x, const FrameLevelParams<Real>& p,
                              ops::PoolMode temporal_pool, bool training);

template <typename Real>
Var<Real> classify(Var<Real> feature, Var<Real> weight, Var<Real> bias);

struct JointCount {
  std::size_t joint = 0;
  std::size_t count = 0;
};

/// Selection counts per joint over every (frame, channel) of one sequence's
/// trace slice, sorted by count descending then joint ascending.
std::vector<JointCount> count_selections(std::span<const std::size_t> trace, std::size_t joints);

}  // namespace sgn
