// SPDX-License-Identifier: Apache-2.0
#include "sgn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sgn/embedding.hpp"
#include "sgn/errors.hpp"
#include "sgn/skeleton.hpp"

namespace sgn {

namespace {

std::string pool_name(SpatialPool p) {
  switch (p) {
    case SpatialPool::max: return "max";
    case SpatialPool::avg: return "avg";
    case SpatialPool::none: return "none";
  }
  return "max";
}

SpatialPool parse_spatial_pool(const std::string& s) {
  if (s == "max") return SpatialPool::max;
  if (s == "avg") return SpatialPool::avg;
  if (s == "none") return SpatialPool::none;
  throw ConfigError("spatial_pool must be max, avg or none, got '" + s + "'");
}

ops::PoolMode parse_temporal_pool(const std::string& s) {
  if (s == "max") return ops::PoolMode::max;
  if (s == "avg") return ops::PoolMode::avg;
  throw ConfigError("temporal_pool must be max or avg, got '" + s + "'");
}

bool uses_joint_type(const ModelConfig& c) { return c.jt_in_graph || c.jt_in_passing; }

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string("model config: ") + what + " must be positive");
  };
  positive(J, "J");
  positive(T, "T");
  positive(K, "K");
  positive(C1, "C1");
  positive(C2, "C2");
  positive(C3, "C3");
  positive(C4, "C4");
  for (std::size_t g : gcn) positive(g, "gcn sizes");
  if (gcn[2] != C3) {
    throw ConfigError("model config: last GCN width " + std::to_string(gcn[2]) + " must equal C3=" +
                      std::to_string(C3));
  }
  if (tconv_kernel != 1 && tconv_kernel != 3) {
    throw ConfigError("model config: tconv_kernel must be 1 or 3, got " + std::to_string(tconv_kernel));
  }
  if (global_graph && spatial_pool != SpatialPool::none) {
    throw ConfigError("model config: global_graph keeps every joint node, so spatial_pool must be none");
  }
  if (global_graph && jt_in_graph != jt_in_passing) {
    throw ConfigError("model config: global_graph needs identical joint-type use in graph and passing");
  }
}

std::size_t ModelConfig::frame_index_width() const {
  if (!global_graph) return C3;
  return jt_in_graph ? 2 * C1 : C1;
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["J"] = c.J;
  j["T"] = c.T;
  j["K"] = c.K;
  j["C1"] = c.C1;
  j["C2"] = c.C2;
  j["C3"] = c.C3;
  j["C4"] = c.C4;
  j["gcn_sizes"] = c.gcn;
  j["use_velocity"] = c.use_velocity;
  j["jt_in_graph"] = c.jt_in_graph;
  j["jt_in_passing"] = c.jt_in_passing;
  j["use_fi"] = c.use_fi;
  j["tconv_kernel"] = c.tconv_kernel;
  j["spatial_pool"] = pool_name(c.spatial_pool);
  j["temporal_pool"] = c.temporal_pool == ops::PoolMode::max ? "max" : "avg";
  j["global_graph"] = c.global_graph;
  j["data_augmentation"] = c.data_augmentation;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig c;
  try {
    if (j.contains("preset")) {
      c = model_preset(j.at("preset").get<std::string>(), j.value("J", c.J), j.value("T", c.T),
                       j.value("K", c.K));
    }
    c.name = j.value("name", c.name);
    c.J = j.value("J", c.J);
    c.T = j.value("T", c.T);
    c.K = j.value("K", c.K);
    c.C1 = j.value("C1", c.C1);
    c.C2 = j.value("C2", c.C2);
    c.C3 = j.value("C3", c.C3);
    c.C4 = j.value("C4", c.C4);
    if (j.contains("gcn_sizes")) {
      const auto g = j.at("gcn_sizes").get<std::vector<std::size_t>>();
      if (g.size() != 3) throw ConfigError("model config: gcn_sizes must list 3 widths");
      std::copy(g.begin(), g.end(), c.gcn.begin());
    }
    c.use_velocity = j.value("use_velocity", c.use_velocity);
    c.jt_in_graph = j.value("jt_in_graph", c.jt_in_graph);
    c.jt_in_passing = j.value("jt_in_passing", c.jt_in_passing);
    c.use_fi = j.value("use_fi", c.use_fi);
    c.tconv_kernel = j.value("tconv_kernel", c.tconv_kernel);
    if (j.contains("spatial_pool")) c.spatial_pool = parse_spatial_pool(j.at("spatial_pool").get<std::string>());
    if (j.contains("temporal_pool")) c.temporal_pool = parse_temporal_pool(j.at("temporal_pool").get<std::string>());
    c.global_graph = j.value("global_graph", c.global_graph);
    c.data_augmentation = j.value("data_augmentation", c.data_augmentation);
    // Divides every channel width after the explicit ones are applied.
    if (j.contains("width_divisor")) c = shrink_widths(c, j.at("width_divisor").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::string> preset_names() {
  return {"no-semantics", "g-jt",        "p-jt",       "g-jt-p-jt",       "no-tconv-no-fi",
          "no-tconv-fi",  "tconv-no-fi", "sgn",        "g-gcn",           "sgn-no-smp",
          "baseline",     "baseline-da", "baseline-da-vel", "baseline-da-vel-max",
          "probe-none",   "probe-jt",    "probe-fi"};
}

ModelConfig model_preset(std::string_view name, std::size_t J, std::size_t T, std::size_t K) {
  ModelConfig c;
  c.name = std::string(name);
  c.J = J;
  c.T = T;
  c.K = K;
  auto semantics = [&](bool g, bool p, bool fi) {
    c.jt_in_graph = g;
    c.jt_in_passing = p;
    c.use_fi = fi;
  };
  if (name == "sgn") {
  } else if (name == "no-semantics" || name == "baseline-da-vel-max") {
    semantics(false, false, false);
  } else if (name == "g-jt") {
    semantics(true, false, false);
  } else if (name == "p-jt") {
    semantics(false, true, false);
  } else if (name == "g-jt-p-jt" || name == "tconv-no-fi") {
    semantics(true, true, false);
  } else if (name == "no-tconv-no-fi") {
    semantics(true, true, false);
    c.tconv_kernel = 1;
  } else if (name == "no-tconv-fi") {
    c.tconv_kernel = 1;
  } else if (name == "g-gcn") {
    c.global_graph = true;
    c.spatial_pool = SpatialPool::none;
  } else if (name == "sgn-no-smp") {
    c.spatial_pool = SpatialPool::none;
  } else if (name == "baseline" || name == "baseline-da" || name == "baseline-da-vel") {
    semantics(false, false, false);
    c.spatial_pool = SpatialPool::avg;
    c.temporal_pool = ops::PoolMode::avg;
    c.use_velocity = name == "baseline-da-vel";
    c.data_augmentation = name != "baseline";
  } else if (name == "probe-none" || name == "probe-jt" || name == "probe-fi") {
    semantics(name == "probe-jt", name == "probe-jt", name == "probe-fi");
    c.use_velocity = false;
    c.tconv_kernel = 1;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
  }
  c.validate();
  return c;
}

ModelConfig shrink_widths(ModelConfig c, std::size_t factor) {
  if (factor == 0) throw ConfigError("shrink_widths: factor must be positive");
  auto shrink = [factor](std::size_t v) { return std::max<std::size_t>(1, (v + factor - 1) / factor); };
  c.C1 = shrink(c.C1);
  c.C2 = shrink(c.C2);
  c.C3 = shrink(c.C3);
  c.C4 = shrink(c.C4);
  for (auto& g : c.gcn) g = shrink(g);
  c.validate();
  return c;
}

std::vector<TensorSpec> tensor_layout(const ModelConfig& c) {
  c.validate();
  std::vector<TensorSpec> out;
  auto fc = [&](const std::string& name, std::size_t in, std::size_t out_dim, bool bias) {
    out.push_back({name + ".weight", TensorRole::weight, {out_dim, in}});
    if (bias) out.push_back({name + ".bias", TensorRole::bias, {out_dim}});
  };
  auto embedder = [&](const std::string& name, std::size_t in, std::size_t out_dim) {
    fc(name + ".fc1", in, c.C1, true);
    fc(name + ".fc2", c.C1, out_dim, true);
  };
  auto bn = [&](const std::string& name, std::size_t channels) {
    out.push_back({name + ".bn.gamma", TensorRole::bn_scale, {channels}});
    out.push_back({name + ".bn.beta", TensorRole::bn_shift, {channels}});
    out.push_back({name + ".bn.running_mean", TensorRole::running_mean, {channels}});
    out.push_back({name + ".bn.running_var", TensorRole::running_var, {channels}});
  };
  embedder("embed.pos", 3, c.C1);
  if (c.use_velocity) embedder("embed.vel", 3, c.C1);
  if (uses_joint_type(c)) embedder("embed.jt", c.J, c.C1);
  if (c.use_fi) embedder("embed.fi", c.T, c.frame_index_width());
  const std::size_t graph_in = c.jt_in_graph ? 2 * c.C1 : c.C1;
  const std::size_t pass_in = c.jt_in_passing ? 2 * c.C1 : c.C1;
  fc("joint.theta", graph_in, c.C2, true);
  fc("joint.phi", graph_in, c.C2, true);
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string name = "joint.gcn" + std::to_string(l + 1);
    const std::size_t in = l == 0 ? pass_in : c.gcn[l - 1];
    out.push_back({name + ".w_y", TensorRole::weight, {c.gcn[l], in}});
    out.push_back({name + ".w_z", TensorRole::weight, {c.gcn[l], in}});
    bn(name, c.gcn[l]);
  }
  out.push_back({"frame.cnn1.weight", TensorRole::weight, {c.C3, c.C3, c.tconv_kernel}});
  bn("frame.cnn1", c.C3);
  out.push_back({"frame.cnn2.weight", TensorRole::weight, {c.C4, c.C3, 1}});
  bn("frame.cnn2", c.C4);
  fc("classifier", c.C4, c.K, true);
  return out;
}

std::size_t count_parameters(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const TensorSpec& s : tensor_layout(cfg)) {
    if (s.role != TensorRole::running_mean && s.role != TensorRole::running_var) n += numel(s.shape);
  }
  return n;
}

template <typename Real>
Model<Real>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  std::mt19937_64 rng(seed);
  for (TensorSpec& spec : tensor_layout(cfg)) {
    NamedTensor<Real> t{spec.name, spec.role, Tensor<Real>(spec.shape)};
    switch (spec.role) {
      case TensorRole::weight: {
        const std::size_t taps = spec.shape.size() == 3 ? spec.shape[2] : 1;
        const double fan = static_cast<double>((spec.shape[0] + spec.shape[1]) * taps);
        const double a = std::sqrt(6.0 / fan);
        std::uniform_real_distribution<double> u(-a, a);
        for (Real& v : t.value.storage()) v = static_cast<Real>(u(rng));
        break;
      }
      case TensorRole::bn_scale:
      case TensorRole::running_var:
        std::fill(t.value.storage().begin(), t.value.storage().end(), Real(1));
        break;
      default:
        break;
    }
    tensors_.push_back(std::move(t));
  }
}

template <typename Real>
Model<Real>::Model(const ModelConfig& cfg, std::vector<NamedTensor<Real>> tensors,
                   std::uint64_t step)
    : cfg_(cfg), tensors_(std::move(tensors)), step_(step) {
  const auto layout = tensor_layout(cfg);
  if (layout.size() != tensors_.size()) {
    throw SchemaError("model: config expects " + std::to_string(layout.size()) + " tensors, got " +
                      std::to_string(tensors_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& t = tensors_[i];
    if (t.name != layout[i].name || t.role != layout[i].role || t.value.shape() != layout[i].shape) {
      throw SchemaError("model: tensor " + std::to_string(i) + " is '" + t.name + "' " +
                        shape_string(t.value.shape()) + ", config expects '" + layout[i].name +
                        "' " + shape_string(layout[i].shape));
    }
  }
}

template <typename Real>
std::size_t Model<Real>::index(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  throw StateError("model has no tensor '" + std::string(name) + "'");
}

template <typename Real>
Tensor<Real>& Model<Real>::tensor(std::string_view name) {
  return tensors_[index(name)].value;
}

template <typename Real>
const Tensor<Real>& Model<Real>::tensor(std::string_view name) const {
  return tensors_[index(name)].value;
}

template <typename Real>
bool Model<Real>::has(std::string_view name) const {
  return std::any_of(tensors_.begin(), tensors_.end(),
                     [&](const NamedTensor<Real>& t) { return t.name == name; });
}

template <typename Real>
std::vector<Tensor<Real>*> Model<Real>::trainable() {
  std::vector<Tensor<Real>*> out;
  for (auto& t : tensors_) {
    if (t.trainable()) out.push_back(&t.value);
  }
  return out;
}

template <typename Real>
std::size_t Model<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) {
    if (t.trainable()) n += t.value.size();
  }
  return n;
}

template <typename Real>
ModelOutput<Real> Model<Real>::forward(Tape<Real>& tape, const Tensor<Real>& positions,
                                       bool training) {
  if (!initialized()) throw StateError("forward: model is not initialized");
  const ModelConfig& c = cfg_;
  const Shape s = positions.shape();
  if (s.size() != 4 || s[1] != c.T || s[2] != c.J || s[3] != 3) {
    throw DimensionError("forward: expected positions [B x " + std::to_string(c.T) + " x " +
                         std::to_string(c.J) + " x 3], got " + shape_string(s));
  }
  auto param = [&](const std::string& name) { return tape.parameter(tensor(name)); };
  auto embedder = [&](const std::string& name) {
    return EmbedderParams<Real>{param(name + ".fc1.weight"), param(name + ".fc1.bias"),
                                param(name + ".fc2.weight"), param(name + ".fc2.bias")};
  };
  auto bn_state = [&](const std::string& name) {
    return ops::BatchNormState<Real>{&tensor(name + ".bn.running_mean"),
                                     &tensor(name + ".bn.running_var"), 0.1, 1e-5};
  };

  std::optional<Var<Real>> velocities;
  std::optional<EmbedderParams<Real>> velocity_params;
  if (c.use_velocity) {
    velocities = tape.constant(compute_velocity(positions));
    velocity_params = embedder("embed.vel");
  }
  Var<Real> z = embed_sequence(tape.constant(positions), velocities, embedder("embed.pos"),
                               velocity_params);
  std::optional<EmbedderParams<Real>> jt_params, fi_params;
  if (uses_joint_type(c)) jt_params = embedder("embed.jt");
  if (c.use_fi) fi_params = embedder("embed.fi");
  const Semantics<Real> sem = semantics_embeddings(tape, c.J, c.T, jt_params, fi_params);

  GraphParams<Real> graph{param("joint.theta.weight"), param("joint.theta.bias"),
                          param("joint.phi.weight"), param("joint.phi.bias")};
  std::array<GcnLayerParams<Real>, 3> layers;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string name = "joint.gcn" + std::to_string(l + 1);
    layers[l] = {param(name + ".w_y"), param(name + ".w_z"), param(name + ".bn.gamma"),
                 param(name + ".bn.beta"), bn_state(name)};
  }
  const JointLevelFlags flags{c.jt_in_graph, c.jt_in_passing, c.global_graph};
  std::optional<Var<Real>> graph_offset;
  if (c.global_graph) graph_offset = sem.frame_index;
  auto joint = joint_level_forward(z, sem.joint_type, graph, layers, flags, graph_offset, training);

  ModelOutput<Real> out;
  out.joint_features = joint.output;
  out.graph = joint.graph;
  Var<Real> x = joint.output;
  if (sem.frame_index && !c.global_graph) {
    TapeScope<Real> scope(tape, "frame.fi");
    x = add_frame_index(x, *sem.frame_index);
  }
  if (c.spatial_pool == SpatialPool::max) {
    TapeScope<Real> scope(tape, "frame.smp");
    auto smp = spatial_maxpool(x);
    x = smp.pooled;
    out.smp_trace = std::move(smp.trace);
    out.frame_features = x;
  } else if (c.spatial_pool == SpatialPool::avg) {
    TapeScope<Real> scope(tape, "frame.smp");
    x = ops::pool_axis(x, 2, ops::PoolMode::avg).output;
    out.frame_features = x;
  }
  FrameLevelParams<Real> fl{param("frame.cnn1.weight"), param("frame.cnn1.bn.gamma"),
                            param("frame.cnn1.bn.beta"), bn_state("frame.cnn1"),
                            param("frame.cnn2.weight"), param("frame.cnn2.bn.gamma"),
                            param("frame.cnn2.bn.beta"), bn_state("frame.cnn2")};
  Var<Real> feature = frame_level_forward(x, fl, c.temporal_pool, training);
  out.logits = classify(feature, param("classifier.weight"), param("classifier.bias"));
  return out;
}

template class Model<float>;
template class Model<double>;

}  // namespace sgn
