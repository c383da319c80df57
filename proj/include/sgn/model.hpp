// SPDX-License-Identifier: Apache-2.0
//
// The full network: configuration, named parameter store, forward pass,
// parameter counting and checkpoints.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgn/frame_level.hpp"
#include "sgn/joint_level.hpp"

namespace sgn {

enum class SpatialPool { max, avg, none };

struct ModelConfig {
  std::string name = "sgn";
  std::size_t J = 25, T = 20, K = 60;
  std::size_t C1 = 64, C2 = 256, C3 = 256, C4 = 512;
  std::array<std::size_t, 3> gcn{128, 256, 256};
  bool use_velocity = true;
  bool jt_in_graph = true;
  bool jt_in_passing = true;
  bool use_fi = true;
  std::size_t tconv_kernel = 3;
  SpatialPool spatial_pool = SpatialPool::max;
  ops::PoolMode temporal_pool = ops::PoolMode::max;
  bool global_graph = false;
  /// Rotation augmentation during training.
  bool data_augmentation = true;

  /// Throws ConfigError on an inconsistent combination.
  void validate() const;
  /// Width of the frame-index embedding (C3, or the graph input width for the
  /// global-graph variant where it joins before graph construction).
  std::size_t frame_index_width() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::ordered_json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Named architecture variants. Ablation rows of the three study tables plus
/// the probes used by the synthetic separation test.
std::vector<std::string> preset_names();
ModelConfig model_preset(std::string_view name, std::size_t J = 25, std::size_t T = 20,
                         std::size_t K = 60);
/// Every channel width divided by `factor` (rounded up, at least 1).
ModelConfig shrink_widths(ModelConfig cfg, std::size_t factor);

enum class TensorRole { weight, bias, bn_scale, bn_shift, running_mean, running_var };

template <typename Real>
struct NamedTensor {
  std::string name;
  TensorRole role = TensorRole::weight;
  Tensor<Real> value;

  bool trainable() const { return role != TensorRole::running_mean && role != TensorRole::running_var; }
  bool decays() const { return role == TensorRole::weight || role == TensorRole::bias; }
};

template <typename Real>
struct ModelOutput {
  Var<Real> logits;          // [B×K]
  Var<Real> joint_features;  // [B×T×J×C3], joint-level output
  /// Post-SMP frame features [B×T×C3]; invalid when the joint axis is kept.
  Var<Real> frame_features;
  /// Joint picked by SMP per (b, t, c); empty unless spatial_pool is max.
  std::vector<std::size_t> smp_trace;
  FrameGraph<Real> graph;
};

template <typename Real>
class Model {
 public:
  Model() = default;
  /// Xavier-uniform weights, zero biases, unit BN scale; deterministic in seed.
  Model(const ModelConfig& cfg, std::uint64_t seed);
  /// Adopts stored tensors; names, roles and shapes must match the config.
  Model(const ModelConfig& cfg, std::vector<NamedTensor<Real>> tensors, std::uint64_t step);

  const ModelConfig& config() const { return cfg_; }
  bool initialized() const { return !tensors_.empty(); }
  std::vector<NamedTensor<Real>>& tensors() { return tensors_; }
  const std::vector<NamedTensor<Real>>& tensors() const { return tensors_; }
  Tensor<Real>& tensor(std::string_view name);
  const Tensor<Real>& tensor(std::string_view name) const;
  bool has(std::string_view name) const;

  std::vector<Tensor<Real>*> trainable();
  std::size_t parameter_count() const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  /// positions [B×T×J×3], already preprocessed. Training mode uses batch BN
  /// statistics and updates the running ones.
  ModelOutput<Real> forward(Tape<Real>& tape, const Tensor<Real>& positions, bool training);

 private:
  std::size_t index(std::string_view name) const;

  ModelConfig cfg_;
  std::vector<NamedTensor<Real>> tensors_;
  std::uint64_t step_ = 0;
};

template <typename Real>
Model<Real> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  return Model<Real>(cfg, seed);
}

/// Trainable scalars, BN scale and shift included, running statistics not.
std::size_t count_parameters(const ModelConfig& cfg);
template <typename Real>
std::size_t count_parameters(const Model<Real>& model) {
  return model.parameter_count();
}

/// Layout of every stored tensor for a config, in storage order.
struct TensorSpec {
  std::string name;
  TensorRole role;
  Shape shape;
};
std::vector<TensorSpec> tensor_layout(const ModelConfig& cfg);

// ------------------------------------------------------------------ checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Real>
std::string serialize_checkpoint(const Model<Real>& model);
/// Loads into the requested precision (stored values are converted if needed).
template <typename Real>
Model<Real> deserialize_checkpoint(std::string_view bytes);

/// Writes atomically (temporary file, then rename).
template <typename Real>
void save_checkpoint(const Model<Real>& model, const std::string& path);
template <typename Real>
Model<Real> load_checkpoint(const std::string& path);
/// Precision tag stored in a checkpoint file.
Precision checkpoint_precision(const std::string& path);

/// CRC32 of the serialized checkpoint; equal models give equal checksums.
template <typename Real>
std::uint32_t model_checksum(const Model<Real>& model);

}  // namespace sgn
