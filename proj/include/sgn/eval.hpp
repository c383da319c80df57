// SPDX-License-Identifier: Apache-2.0
//
// Test-time protocol, ablation suites, SMP report and the whole-model
// gradient check.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgn/gradcheck.hpp"
#include "sgn/model.hpp"
#include "sgn/skeleton.hpp"
#include "sgn/training.hpp"

namespace sgn {

struct EvalOptions {
  /// Clip samplings per sequence whose softmax scores are averaged.
  std::size_t samples = 5;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
  std::size_t reference_joint = 0;
  Split split = Split::test;
};

struct EvalReport {
  double accuracy = 0;
  std::vector<double> per_class_accuracy;  // NaN for classes without test items
  /// confusion[true][predicted], one count per scored item.
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t total = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  /// Accuracy over items whose true class is in `classes`.
  double subset_accuracy(std::span<const int> classes) const;
};

/// Every track sharing a source id is one scored item: the per-track scores
/// (each the mean softmax over `samples` clip samplings) are averaged.
template <typename Real>
EvalReport evaluate(Model<Real>& model, const DatasetManifest& manifest, const EvalOptions& options = {});

/// Mean softmax over `samples` clip samplings for each sequence, [N][K].
template <typename Real>
std::vector<std::vector<double>> sequence_scores(Model<Real>& model,
                                                 std::span<const SkeletonSequence* const> sequences,
                                                 const EvalOptions& options);

// ------------------------------------------------------------------ ablations

/// "table1", "table2", "table3" or "probes".
std::vector<std::string> ablation_suite_presets(const std::string& suite);
/// Reported model size in millions for a study preset; NaN for the probes.
double reference_parameter_millions(const std::string& preset);
inline constexpr double kParameterToleranceMillions = 0.015;

struct AblationRow {
  std::string preset;
  std::size_t parameters = 0;
  double reference_millions = 0;  // NaN when there is no reference value
  bool count_matches = true;
  /// NaN when the suite ran without data.
  double accuracy = 0;
};

struct AblationReport {
  std::string suite;
  std::size_t J = 0, T = 0, K = 0;
  std::vector<AblationRow> rows;
};

struct AblationOptions {
  std::size_t J = 25, T = 20, K = 60;
  /// Train and evaluate every preset on `data` when set.
  const DatasetManifest* data = nullptr;
  TrainRecipe recipe = TrainRecipe::desk();
  EvalOptions eval;
  /// Channel widths divided by this factor for the training runs (counts
  /// always use the full widths).
  std::size_t width_divisor = 1;
  std::uint64_t seed = 0;
};

AblationReport run_ablation_suite(const std::string& suite, const AblationOptions& options);
void write_ablation_markdown(std::ostream& out, const AblationReport& report);
void write_ablation_csv(std::ostream& out, const AblationReport& report);

// ------------------------------------------------------------------ SMP report

struct SmpRow {
  std::string sequence_id;
  std::size_t rank = 0;  // 1-based
  std::size_t joint = 0;
  std::size_t count = 0;
};

/// Top-k joints chosen by spatial max-pooling for every sequence of the
/// requested split (all sequences when `split` is empty), one deterministic
/// clip sampling each.
template <typename Real>
std::vector<SmpRow> smp_report(Model<Real>& model, const DatasetManifest& manifest, std::size_t top_k,
                               std::uint64_t seed, std::optional<Split> split = std::nullopt,
                               std::size_t reference_joint = 0);
void write_smp_csv(std::ostream& out, std::span<const SmpRow> rows);

// ------------------------------------------------------------------ gradcheck

/// Preset at J=4, T=5, K=3 with every channel width divided by 8.
ModelConfig small_gradcheck_config(const std::string& preset);

struct ModelGradcheckOptions {
  std::size_t coordinates = 256;
  double epsilon = 1e-6;
  std::size_t batch = 2;
  std::uint64_t seed = 0;
  /// See GradcheckOptions::relative_floor.
  double relative_floor = 1e-6;
};

/// Smoothed cross-entropy of a double-precision model in training mode on
/// random inputs, analytic gradient versus central differences over a seeded
/// sample of parameter coordinates.
GradcheckResult model_gradcheck(const ModelConfig& cfg, const ModelGradcheckOptions& options = {});

}  // namespace sgn
