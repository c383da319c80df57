// SPDX-License-Identifier: Apache-2.0
#include "sgn/embedding.hpp"

namespace sgn {

template <typename Real>
Var<Real> embed_vector(Var<Real> x, const EmbedderParams<Real>& p) {
  return ops::relu(ops::affine(ops::relu(ops::affine(x, p.w1, p.b1)), p.w2, p.b2));
}

template <typename Real>
Var<Real> fuse_dynamics(Var<Real> position, Var<Real> velocity) {
  return ops::add(position, velocity);
}

template <typename Real>
Var<Real> embed_sequence(Var<Real> positions, std::optional<Var<Real>> velocities,
                         const EmbedderParams<Real>& position_params,
                         const std::optional<EmbedderParams<Real>>& velocity_params) {
  if (positions.shape().size() < 2 || positions.shape().back() != 3) {
    throw DimensionError("embed_sequence: positions must be [...x3], got " +
                         shape_string(positions.shape()));
  }
  Var<Real> p;
  {
    TapeScope<Real> scope(positions.tape(), "embed.pos");
    p = embed_vector(positions, position_params);
  }
  if (!velocities) return p;
  if (!velocity_params) throw ConfigError("embed_sequence: velocities given without velocity embedder");
  if (velocities->shape() != positions.shape()) {
    throw DimensionError("embed_sequence: positions " + shape_string(positions.shape()) +
                         " vs velocities " + shape_string(velocities->shape()));
  }
  TapeScope<Real> scope(positions.tape(), "embed.vel");
  return fuse_dynamics(p, embed_vector(*velocities, *velocity_params));
}

template <typename Real>
Tensor<Real> one_hot_basis(std::size_t n) {
  Tensor<Real> eye({n, n});
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = Real(1);
  return eye;
}

template <typename Real>
Semantics<Real> semantics_embeddings(Tape<Real>& tape, std::size_t J, std::size_t T,
                                     const std::optional<EmbedderParams<Real>>& joint_type,
                                     const std::optional<EmbedderParams<Real>>& frame_index) {
  Semantics<Real> s;
  if (joint_type) {
    TapeScope<Real> scope(tape, "embed.jt");
    s.joint_type = embed_vector(tape.constant(one_hot_basis<Real>(J)), *joint_type);
  }
  if (frame_index) {
    TapeScope<Real> scope(tape, "embed.fi");
    s.frame_index = embed_vector(tape.constant(one_hot_basis<Real>(T)), *frame_index);
  }
  return s;
}

#define SGN_INSTANTIATE_EMBEDDING(R)                                                       \
  template Var<R> embed_vector<R>(Var<R>, const EmbedderParams<R>&);                       \
  template Var<R> fuse_dynamics<R>(Var<R>, Var<R>);                                        \
  template Var<R> embed_sequence<R>(Var<R>, std::optional<Var<R>>, const EmbedderParams<R>&, \
                                    const std::optional<EmbedderParams<R>>&);              \
  template Tensor<R> one_hot_basis<R>(std::size_t);                                        \
  template Semantics<R> semantics_embeddings<R>(Tape<R>&, std::size_t, std::size_t,        \
                                                const std::optional<EmbedderParams<R>>&,   \
                                                const std::optional<EmbedderParams<R>>&);

SGN_INSTANTIATE_EMBEDDING(float)
SGN_INSTANTIATE_EMBEDDING(double)

}  // namespace sgn
