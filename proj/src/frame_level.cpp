// SPDX-License-Identifier: Apache-2.0
#include "sgn/frame_level.hpp"

#include <algorithm>

namespace sgn {

template <typename Real>
Var<Real> add_frame_index(Var<Real> z, Var<Real> frame_index) {
  const Shape sz = z.shape();
  const Shape sf = frame_index.shape();
  if (sz.size() != 4 || sf.size() != 2 || sf[0] != sz[1] || sf[1] != sz[3]) {
    throw DimensionError("add_frame_index: features " + shape_string(sz) + " vs frame index " +
                         shape_string(sf));
  }
  Var<Real> per_frame = ops::reshape(frame_index, Shape{sf[0], 1, sf[1]});
  return ops::add(z, ops::expand(per_frame, sz));
}

template <typename Real>
SmpResult<Real> spatial_maxpool(Var<Real> z) {
  if (z.shape().size() != 4) {
    throw DimensionError("spatial_maxpool: expected [B x T x J x C], got " + shape_string(z.shape()));
  }
  auto r = ops::pool_axis(z, 2, ops::PoolMode::max);
  return {r.output, std::move(r.argmax)};
}

template <typename Real>
Var<Real> frame_level_forward(Var<Real> x, const FrameLevelParams<Real>& p,
                              ops::PoolMode temporal_pool, bool training) {
  const std::size_t rank = x.shape().size();
  if (rank != 3 && rank != 4) {
    throw DimensionError("frame_level_forward: expected [B x T x C] or [B x T x J x C], got " +
                         shape_string(x.shape()));
  }
  Tape<Real>& tape = x.tape();
  Var<Real> h;
  {
    TapeScope<Real> scope(tape, "frame.cnn1");
    h = ops::relu(ops::batch_norm(ops::conv1d_temporal(x, p.cnn1), p.gamma1, p.beta1, p.bn1,
                                  rank - 1, training));
  }
  {
    TapeScope<Real> scope(tape, "frame.cnn2");
    h = ops::relu(ops::batch_norm(ops::conv1d_temporal(h, p.cnn2), p.gamma2, p.beta2, p.bn2,
                                  rank - 1, training));
  }
  TapeScope<Real> scope(tape, "frame.pool");
  if (rank == 4) h = ops::pool_axis(h, 2, temporal_pool).output;
  return ops::pool_axis(h, 1, temporal_pool).output;
}

template <typename Real>
Var<Real> classify(Var<Real> feature, Var<Real> weight, Var<Real> bias) {
  TapeScope<Real> scope(feature.tape(), "classifier");
  return ops::affine(feature, weight, bias);
}

std::vector<JointCount> count_selections(std::span<const std::size_t> trace, std::size_t joints) {
  std::vector<JointCount> counts(joints);
  for (std::size_t k = 0; k < joints; ++k) counts[k].joint = k;
  for (std::size_t j : trace) {
    if (j >= joints) throw ContractError("SMP trace names joint " + std::to_string(j) + " >= J");
    ++counts[j].count;
  }
  std::stable_sort(counts.begin(), counts.end(),
                   [](const JointCount& a, const JointCount& b) { return a.count > b.count; });
  return counts;
}

#define SGN_INSTANTIATE_FRAME_LEVEL(R)                                                      \
  template Var<R> add_frame_index<R>(Var<R>, Var<R>);                                       \
  template SmpResult<R> spatial_maxpool<R>(Var<R>);                                         \
  template Var<R> frame_level_forward<R>(Var<R>, const FrameLevelParams<R>&, ops::PoolMode, \
                                         bool);                                             \
  template Var<R> classify<R>(Var<R>, Var<R>, Var<R>);

SGN_INSTANTIATE_FRAME_LEVEL(float)
SGN_INSTANTIATE_FRAME_LEVEL(double)

}  // namespace sgn
