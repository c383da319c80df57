// SPDX-License-Identifier: Apache-2.0
#include "sgn/joint_level.hpp"

namespace sgn {

template <typename Real>
Var<Real> concat_joint_type(Var<Real> z, Var<Real> joint_type) {
  const Shape sz = z.shape();
  const Shape sj = joint_type.shape();
  if (sz.size() < 2 || sj.size() != 2 || sj[0] != sz[sz.size() - 2]) {
    throw DimensionError("concat_joint_type: features " + shape_string(sz) + " vs joint types " +
                         shape_string(sj));
  }
  Shape target = sz;
  target.back() = sj[1];
  return ops::concat_last(z, ops::expand(joint_type, target));
}

template <typename Real>
FrameGraph<Real> compute_adjacency(Var<Real> z, const GraphParams<Real>& p) {
  if (z.shape().size() != 3) {
    throw DimensionError("compute_adjacency: expected [N x J x d], got " + shape_string(z.shape()));
  }
  Var<Real> theta = ops::affine(z, p.theta_w, p.theta_b);
  Var<Real> phi = ops::affine(z, p.phi_w, p.phi_b);
  Var<Real> s = ops::bmm(theta, phi, true);
  return {s, ops::softmax_rows(s)};
}

template <typename Real>
Var<Real> gcn_residual_layer(Var<Real> z, Var<Real> g, const GcnLayerParams<Real>& p,
                             bool training) {
  const Shape sz = z.shape();
  const Shape sg = g.shape();
  if (sz.size() != 3 || sg.size() != 3 || sg[0] != sz[0] || sg[1] != sz[1] || sg[2] != sz[1]) {
    throw DimensionError("gcn layer: features " + shape_string(sz) + " vs graph " + shape_string(sg));
  }
  Var<Real> message = ops::affine(ops::bmm(g, z), p.w_y);
  Var<Real> skip = ops::affine(z, p.w_z);
  return ops::relu(ops::batch_norm(ops::add(message, skip), p.gamma, p.beta, p.bn, 2, training));
}

template <typename Real>
JointLevelResult<Real> joint_level_forward(Var<Real> z, std::optional<Var<Real>> joint_type,
                                           const GraphParams<Real>& graph,
                                           const std::array<GcnLayerParams<Real>, 3>& layers,
                                           const JointLevelFlags& flags,
                                           std::optional<Var<Real>> graph_offset,
                                           bool training) {
  const Shape s = z.shape();
  if (s.size() != 4) {
    throw DimensionError("joint_level_forward: expected [B x T x J x C], got " + shape_string(s));
  }
  const std::size_t B = s[0], T = s[1], J = s[2];
  if ((flags.jt_in_graph || flags.jt_in_passing) && !joint_type) {
    throw ConfigError("joint_level_forward: joint-type semantics requested but not provided");
  }
  Tape<Real>& tape = z.tape();
  std::optional<Var<Real>> zbar;
  if (joint_type) zbar = concat_joint_type(z, *joint_type);
  Var<Real> graph_in = flags.jt_in_graph ? *zbar : z;
  Var<Real> pass_in = flags.jt_in_passing ? *zbar : z;
  if (graph_offset) {
    const Shape so = graph_offset->shape();
    if (so.size() != 2 || so[0] != T) {
      throw DimensionError("joint_level_forward: frame offset " + shape_string(so) + " for T=" +
                           std::to_string(T));
    }
    Var<Real> per_frame = ops::reshape(*graph_offset, Shape{T, 1, so[1]});
    graph_in = ops::add(graph_in, ops::expand(per_frame, graph_in.shape()));
    pass_in = flags.jt_in_graph == flags.jt_in_passing
                  ? graph_in
                  : ops::add(pass_in, ops::expand(per_frame, pass_in.shape()));
  }
  const Shape nodes = flags.global_graph ? Shape{B, T * J} : Shape{B * T, J};
  auto as_graph = [&](Var<Real> v) {
    return ops::reshape(v, Shape{nodes[0], nodes[1], v.shape().back()});
  };
  JointLevelResult<Real> out;
  {
    TapeScope<Real> scope(tape, "joint.graph");
    out.graph = compute_adjacency(as_graph(graph_in), graph);
  }
  Var<Real> x = as_graph(pass_in);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    TapeScope<Real> scope(tape, "joint.gcn" + std::to_string(l + 1));
    x = gcn_residual_layer(x, out.graph.adjacency, layers[l], training);
  }
  out.output = ops::reshape(x, Shape{B, T, J, x.shape().back()});
  return out;
}

#define SGN_INSTANTIATE_JOINT_LEVEL(R)                                                         \
  template Var<R> concat_joint_type<R>(Var<R>, Var<R>);                                        \
  template FrameGraph<R> compute_adjacency<R>(Var<R>, const GraphParams<R>&);                  \
  template Var<R> gcn_residual_layer<R>(Var<R>, Var<R>, const GcnLayerParams<R>&, bool);       \
  template JointLevelResult<R> joint_level_forward<R>(                                         \
      Var<R>, std::optional<Var<R>>, const GraphParams<R>&,                                    \
      const std::array<GcnLayerParams<R>, 3>&, const JointLevelFlags&, std::optional<Var<R>>, \
      bool);

SGN_INSTANTIATE_JOINT_LEVEL(float)
SGN_INSTANTIATE_JOINT_LEVEL(double)

}  // namespace sgn
