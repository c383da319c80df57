// SPDX-License-Identifier: Apache-2.0
//
// Content-adaptive graphs and residual graph convolution over joints.
#pragma once

#include <array>
#include <optional>

#include "sgn/ops.hpp"

namespace sgn {

template <typename Real>
struct GraphParams {
  Var<Real> theta_w, theta_b, phi_w, phi_b;
};

template <typename Real>
struct GcnLayerParams {
  Var<Real> w_y, w_z, gamma, beta;
  ops::BatchNormState<Real> bn;
};

/// [...×J×C] joint features with the joint-type rows [J×C_j] appended.
template <typename Real>
Var<Real> concat_joint_type(Var<Real> z, Var<Real> joint_type);

template <typename Real>
struct FrameGraph {
  Var<Real> affinity;   // S, [N×J×J]
  Var<Real> adjacency;  // G = softmax_rows(S)
};

/// z is [N×J×d]: one graph per leading index.
template <typename Real>
FrameGraph<Real> compute_adjacency(Var<Real> z, const GraphParams<Real>& p);

/// relu(BN(G·Z·W_y + Z·W_z)); z is [N×J×d_in], g is [N×J×J].
template <typename Real>
Var<Real> gcn_residual_layer(Var<Real> z, Var<Real> g, const GcnLayerParams<Real>& p,
                             bool training);

struct JointLevelFlags {
  bool jt_in_graph = true;
  bool jt_in_passing = true;
  /// One graph over all T·J joints of a sequence instead of one per frame.
  bool global_graph = false;
};

template <typename Real>
struct JointLevelResult {
  Var<Real> output;  // [B×T×J×C3]
  FrameGraph<Real> graph;
};

/// z is [B×T×J×C1]. `graph_offset` ([T×d], added to every joint of frame t
/// before graph construction) carries the frame-index semantics of the
/// global-graph variant.
template <typename Real>
JointLevelResult<Real> joint_level_forward(Var<Real> z, std::optional<Var<Real>> joint_type,
                                           const GraphParams<Real>& graph,
                                           const std::array<GcnLayerParams<Real>, 3>& layers,
                                           const JointLevelFlags& flags,
                                           std::optional<Var<Real>> graph_offset,
                                           bool training);

}  // namespace sgn
