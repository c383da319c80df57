// SPDX-License-Identifier: Apache-2.0
//
// Loss, optimizer, learning-rate schedule and the epoch loop.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgn/model.hpp"
#include "sgn/skeleton.hpp"

namespace sgn {

struct TrainRecipe {
  double lr0 = 1e-3;
  std::vector<std::size_t> milestones{60, 90, 110};
  double decay_factor = 10.0;
  std::size_t epochs = 120;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  double label_smoothing = 0.1;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  /// Per-axis rotation range in degrees, used when the model config enables augmentation.
  std::array<double, 3> rotation_degrees{17, 17, 17};
  /// Share of training sequences held out for validation when the dataset has no val split.
  double val_fraction = 0.1;
  std::size_t reference_joint = 0;
  std::uint64_t seed = 0;

  void validate() const;
  /// 120 epochs, decay at 60/90/110, batch 64.
  static TrainRecipe full();
  /// 40 epochs, decay at 20/30/36, batch 16.
  static TrainRecipe desk();
};

nlohmann::ordered_json to_json(const TrainRecipe& r);
TrainRecipe train_recipe_from_json(const nlohmann::json& j);

/// Mean over the batch of −Σ q·log softmax(logits) with
/// q = (1−ε)·onehot(label) + ε/K.
template <typename Real>
Var<Real> smoothed_cross_entropy(Var<Real> logits, std::span<const int> labels, double epsilon);

/// lr0 · decay^(−#milestones ≤ epoch).
double lr_at_epoch(const TrainRecipe& recipe, std::size_t epoch);

template <typename Real>
struct AdamState {
  std::vector<std::vector<Real>> m, v;
  std::uint64_t step = 0;
};

struct AdamOptions {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// One Adam update with bias correction. Coupled L2: g ← g + wd·p for every
/// parameter whose `decay` flag is set. Parameters without a gradient buffer
/// are treated as having zero gradient.
template <typename Real>
void adam_step(std::span<Tensor<Real>* const> params, std::span<const bool> decay,
               AdamState<Real>& state, double lr, double weight_decay, const AdamOptions& opt = {});

/// Clip sampling, optional rotation, then translation to the reference joint.
SkeletonSequence preprocess(const SkeletonSequence& seq, std::size_t T, std::mt19937_64& rng,
                            bool augment, const TrainRecipe& recipe);

/// Stacks equal-shape sequences into [B×T×J×3].
template <typename Real>
Tensor<Real> stack_batch(std::span<const SkeletonSequence> batch);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double train_acc = 0;
  /// NaN when there is no validation data.
  double val_acc = 0;
  double wall_seconds = 0;
};

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, const EpochLog& row);

struct TrainCallbacks {
  std::function<void(const EpochLog&)> on_epoch;
};

/// Runs the epoch loop in place on `model`. Deterministic given the recipe
/// seed, the model's initial state and the manifest.
template <typename Real>
std::vector<EpochLog> train(Model<Real>& model, const DatasetManifest& manifest,
                            const TrainRecipe& recipe, const TrainCallbacks& callbacks = {});

/// Train/validation partition used by train(): explicit val-tagged sequences
/// when present, otherwise a seeded share of the train split (whole sources
/// stay together).
struct TrainValSplit {
  std::vector<const SkeletonSequence*> train, val;
};
TrainValSplit split_train_val(const DatasetManifest& manifest, const TrainRecipe& recipe);

/// Top-1 accuracy on `sequences`, one deterministic clip sample each, eval mode.
template <typename Real>
double quick_accuracy(Model<Real>& model, std::span<const SkeletonSequence* const> sequences,
                      const TrainRecipe& recipe, std::uint64_t seed);

}  // namespace sgn
