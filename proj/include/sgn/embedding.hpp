// SPDX-License-Identifier: Apache-2.0
//
// Dynamics and semantics encoders. Functions accept arbitrary leading
// batch axes.
#pragma once

#include <cstddef>
#include <optional>

#include "sgn/ops.hpp"

namespace sgn {

/// Two FC layers with relu after each: σ(W2·σ(W1·x + b1) + b2).
template <typename Real>
struct EmbedderParams {
  Var<Real> w1, b1, w2, b2;
};

template <typename Real>
Var<Real> embed_vector(Var<Real> x, const EmbedderParams<Real>& p);

/// Elementwise sum of the position and velocity embeddings.
template <typename Real>
Var<Real> fuse_dynamics(Var<Real> position, Var<Real> velocity);

/// positions/velocities [...×T×J×3] → [...×T×J×C1]. Without velocities the
/// position embedding alone is returned.
template <typename Real>
Var<Real> embed_sequence(Var<Real> positions, std::optional<Var<Real>> velocities,
                         const EmbedderParams<Real>& position_params,
                         const std::optional<EmbedderParams<Real>>& velocity_params);

/// n×n identity; row i is the one-hot code of joint type / frame index i.
template <typename Real>
Tensor<Real> one_hot_basis(std::size_t n);

/// Embeddings of the one-hot joint types [J×C1] and frame indices [T×C_f].
template <typename Real>
struct Semantics {
  std::optional<Var<Real>> joint_type;
  std::optional<Var<Real>> frame_index;
};

template <typename Real>
Semantics<Real> semantics_embeddings(Tape<Real>& tape, std::size_t J, std::size_t T,
                                     const std::optional<EmbedderParams<Real>>& joint_type,
                                     const std::optional<EmbedderParams<Real>>& frame_index);

}  // namespace sgn
