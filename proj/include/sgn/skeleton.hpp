// SPDX-License-Identifier: Apache-2.0
//
// Skeleton sequences, the JSON-lines dataset format, preprocessing and
// augmentation, and the synthetic dataset generator.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sgn/tensor.hpp"

namespace sgn {

using Point3 = std::array<double, 3>;
using Frame = std::vector<Point3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

enum class Split { train, val, test };

std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct SkeletonSequence {
  std::string id;
  int label = 0;
  Split split = Split::train;
  std::vector<Frame> frames;
  /// Track index when the sequence came from a multi-person recording.
  std::optional<int> person_id;
  /// Recording the sequence came from; person tracks of one recording share it.
  /// Empty means "same as id".
  std::string source_id;

  std::size_t length() const { return frames.size(); }
  std::size_t joints() const { return frames.empty() ? 0 : frames.front().size(); }
  const std::string& source() const { return source_id.empty() ? id : source_id; }
};

struct DatasetManifest {
  std::size_t J = 0;
  std::size_t K = 0;
  std::vector<std::string> class_names;
  std::vector<SkeletonSequence> sequences;

  /// Throws SchemaError/DataError on the first violated invariant.
  void validate() const;
  std::vector<const SkeletonSequence*> with_split(Split s) const;
};

// ------------------------------------------------------------ file format

DatasetManifest read_dataset(std::istream& in);
DatasetManifest parse_dataset(const std::string& path);
void write_dataset(const DatasetManifest& m, std::ostream& out);
/// Writes through a temporary file so a failure never leaves a partial file.
void write_dataset(const DatasetManifest& m, const std::string& path);

// ------------------------------------------------------------ preprocessing

/// Subtracts the first-frame position of `ref_joint` from every joint.
SkeletonSequence translate_to_reference(const SkeletonSequence& seq, std::size_t ref_joint = 0);

/// frames[t][p] is person p's skeleton in frame t. All-zero tracks are dropped.
std::vector<SkeletonSequence> split_multi_person(const std::vector<std::vector<Frame>>& frames,
                                                 const SkeletonSequence& meta);

/// Frame indices chosen by clip sampling: one uniform draw from each of T
/// near-equal contiguous clips. Short sequences first repeat every index
/// ceil(T/T_raw) times.
std::vector<std::size_t> clip_indices(std::size_t t_raw, std::size_t T, std::mt19937_64& rng);
SkeletonSequence sample_clips(const SkeletonSequence& seq, std::size_t T, std::mt19937_64& rng);

/// R = Rz·Ry·Rx, angles in degrees.
Mat3 rotation_matrix(double x_deg, double y_deg, double z_deg);
SkeletonSequence rotate(const SkeletonSequence& seq, const Mat3& r);
/// Draws one angle per axis uniformly in [-max, max] and rotates about the origin.
SkeletonSequence random_rotation_augment(const SkeletonSequence& seq,
                                         const std::array<double, 3>& max_degrees,
                                         std::mt19937_64& rng);

/// Backward difference along the frame axis (axis rank-3 of [...×T×J×3]);
/// the first frame gets zero velocity.
template <typename Real>
Tensor<Real> compute_velocity(const Tensor<Real>& positions);

/// [T×J×3] tensor of the sequence's coordinates.
template <typename Real>
Tensor<Real> to_tensor(const SkeletonSequence& seq);

/// Stream for one sequence, a function of (seed, key) only.
std::mt19937_64 derived_rng(std::uint64_t seed, std::string_view key);

// ------------------------------------------------------------ synthetic data

struct SyntheticConfig {
  std::size_t J = 15;
  std::size_t K = 8;
  std::size_t frames = 40;
  std::size_t per_class = 40;
  double noise = 0.01;
  double test_fraction = 0.25;
  std::uint64_t seed = 0;
  /// Motion template of each class; empty selects the default set for K.
  std::vector<std::string> templates;

  void validate() const;
};

/// Template names understood by the generator. "<name>~perm" is the joint
/// permutation of <name> (left arm and left leg chains swapped), "<name>~rev"
/// its time reversal.
std::vector<std::string> synthetic_template_names();
std::vector<std::string> default_templates(std::size_t K);

/// Noise-free template of one sequence; `variation` in [0,1)^4 sets amplitude,
/// speed, phase and body scale.
std::vector<Frame> synthetic_template(std::string_view name, std::size_t J, std::size_t frames,
                                      const std::array<double, 4>& variation);

/// The joint permutation used by "~perm" templates (an involution fixing joint 0).
std::vector<std::size_t> role_swap_permutation(std::size_t J);

DatasetManifest generate_synthetic(const SyntheticConfig& cfg);

}  // namespace sgn
