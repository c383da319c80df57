// SPDX-License-Identifier: Apache-2.0
#include "sgn/skeleton.hpp"

#include <cmath>
#include <numbers>

#include "sgn/errors.hpp"

namespace sgn {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw SchemaError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

void DatasetManifest::validate() const {
  if (J == 0) throw SchemaError("dataset: J must be positive");
  if (K == 0) throw SchemaError("dataset: K must be positive");
  if (!class_names.empty() && class_names.size() != K) {
    throw SchemaError("dataset: " + std::to_string(class_names.size()) + " class names for K=" +
                      std::to_string(K));
  }
  for (const SkeletonSequence& s : sequences) {
    if (s.frames.empty()) throw SchemaError("sequence '" + s.id + "' has no frames");
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= K) {
      throw SchemaError("sequence '" + s.id + "' has label " + std::to_string(s.label) +
                        " outside [0, " + std::to_string(K) + ")");
    }
    for (std::size_t t = 0; t < s.frames.size(); ++t) {
      if (s.frames[t].size() != J) {
        throw SchemaError("sequence '" + s.id + "' frame " + std::to_string(t) + " has " +
                          std::to_string(s.frames[t].size()) + " joints, dataset J=" +
                          std::to_string(J));
      }
      for (const Point3& p : s.frames[t]) {
        for (double v : p) {
          if (!std::isfinite(v)) throw DataError("sequence '" + s.id + "' has a non-finite coordinate");
        }
      }
    }
  }
}

std::vector<const SkeletonSequence*> DatasetManifest::with_split(Split s) const {
  std::vector<const SkeletonSequence*> out;
  for (const SkeletonSequence& q : sequences) {
    if (q.split == s) out.push_back(&q);
  }
  return out;
}

SkeletonSequence translate_to_reference(const SkeletonSequence& seq, std::size_t ref_joint) {
  if (seq.frames.empty()) throw DataError("translate_to_reference: sequence '" + seq.id + "' is empty");
  if (ref_joint >= seq.joints()) {
    throw ConfigError("translate_to_reference: reference joint " + std::to_string(ref_joint) +
                      " >= J=" + std::to_string(seq.joints()));
  }
  SkeletonSequence out = seq;
  const Point3 origin = seq.frames.front()[ref_joint];
  for (Frame& f : out.frames) {
    for (Point3& p : f) {
      for (int a = 0; a < 3; ++a) p[a] -= origin[a];
    }
  }
  return out;
}

std::vector<SkeletonSequence> split_multi_person(const std::vector<std::vector<Frame>>& frames,
                                                 const SkeletonSequence& meta) {
  if (frames.empty()) throw DataError("split_multi_person: no frames");
  const std::size_t persons = frames.front().size();
  if (persons == 0) throw DataError("split_multi_person: frames carry no persons");
  for (const auto& f : frames) {
    if (f.size() != persons) throw SchemaError("split_multi_person: person count varies across frames");
  }
  std::vector<SkeletonSequence> out;
  for (std::size_t p = 0; p < persons; ++p) {
    bool all_zero = true;
    for (const auto& f : frames) {
      for (const Point3& q : f[p]) all_zero = all_zero && q[0] == 0 && q[1] == 0 && q[2] == 0;
    }
    if (all_zero) continue;
    SkeletonSequence s;
    s.label = meta.label;
    s.split = meta.split;
    s.source_id = meta.source();
    if (persons == 1) {
      s.id = meta.id;
      s.person_id = meta.person_id;
    } else {
      s.id = meta.id + "#" + std::to_string(p);
      s.person_id = static_cast<int>(p);
    }
    if (s.source_id == s.id) s.source_id.clear();
    s.frames.reserve(frames.size());
    for (const auto& f : frames) s.frames.push_back(f[p]);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::size_t> clip_indices(std::size_t t_raw, std::size_t T, std::mt19937_64& rng) {
  if (T == 0) throw ConfigError("sample_clips: target length must be positive");
  if (t_raw == 0) throw DataError("sample_clips: empty sequence");
  const std::size_t repeat = t_raw >= T ? 1 : (T + t_raw - 1) / t_raw;
  const std::size_t length = t_raw * repeat;
  std::vector<std::size_t> out(T);
  for (std::size_t i = 0; i < T; ++i) {
    const std::size_t lo = i * length / T;
    const std::size_t hi = (i + 1) * length / T;
    std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
    out[i] = pick(rng) / repeat;
  }
  return out;
}

SkeletonSequence sample_clips(const SkeletonSequence& seq, std::size_t T, std::mt19937_64& rng) {
  const auto idx = clip_indices(seq.length(), T, rng);
  SkeletonSequence out = seq;
  out.frames.clear();
  out.frames.reserve(T);
  for (std::size_t i : idx) out.frames.push_back(seq.frames[i]);
  return out;
}

Mat3 rotation_matrix(double x_deg, double y_deg, double z_deg) {
  const double k = std::numbers::pi / 180.0;
  const double cx = std::cos(x_deg * k), sx = std::sin(x_deg * k);
  const double cy = std::cos(y_deg * k), sy = std::sin(y_deg * k);
  const double cz = std::cos(z_deg * k), sz = std::sin(z_deg * k);
  const Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  const Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  auto mul = [](const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int l = 0; l < 3; ++l) c[i][j] += a[i][l] * b[l][j];
      }
    }
    return c;
  };
  return mul(rz, mul(ry, rx));
}

SkeletonSequence rotate(const SkeletonSequence& seq, const Mat3& r) {
  SkeletonSequence out = seq;
  for (Frame& f : out.frames) {
    for (Point3& p : f) {
      const Point3 q = p;
      for (int i = 0; i < 3; ++i) p[i] = r[i][0] * q[0] + r[i][1] * q[1] + r[i][2] * q[2];
    }
  }
  return out;
}

SkeletonSequence random_rotation_augment(const SkeletonSequence& seq,
                                         const std::array<double, 3>& max_degrees,
                                         std::mt19937_64& rng) {
  double angle[3];
  for (int a = 0; a < 3; ++a) {
    if (!(max_degrees[a] >= 0)) throw ConfigError("rotation range must be non-negative");
    std::uniform_real_distribution<double> u(-max_degrees[a], max_degrees[a]);
    angle[a] = max_degrees[a] == 0 ? 0.0 : u(rng);
  }
  return rotate(seq, rotation_matrix(angle[0], angle[1], angle[2]));
}

template <typename Real>
Tensor<Real> compute_velocity(const Tensor<Real>& positions) {
  const Shape s = positions.shape();
  if (s.size() < 3 || s.back() != 3) {
    throw DimensionError("compute_velocity: expected [...xTxJx3], got " + shape_string(s));
  }
  const std::size_t frames = s[s.size() - 3];
  const std::size_t frame_size = s[s.size() - 2] * 3;
  const std::size_t outer = positions.size() / (frames * frame_size);
  Tensor<Real> v(s);
  const Real* p = positions.data().data();
  Real* out = v.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * frames * frame_size;
    for (std::size_t t = 1; t < frames; ++t) {
      for (std::size_t i = 0; i < frame_size; ++i) {
        const std::size_t at = base + t * frame_size + i;
        out[at] = p[at] - p[at - frame_size];
      }
    }
  }
  return v;
}

template <typename Real>
Tensor<Real> to_tensor(const SkeletonSequence& seq) {
  if (seq.frames.empty()) throw DataError("sequence '" + seq.id + "' is empty");
  const std::size_t J = seq.joints();
  Tensor<Real> out({seq.length(), J, 3});
  Real* d = out.data().data();
  for (const Frame& f : seq.frames) {
    if (f.size() != J) throw SchemaError("sequence '" + seq.id + "' has ragged frames");
    for (const Point3& p : f) {
      for (double v : p) *d++ = static_cast<Real>(v);
    }
  }
  return out;
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::string_view key) {
  // FNV-1a over the key, then both halves through seed_seq.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

template Tensor<float> compute_velocity<float>(const Tensor<float>&);
template Tensor<double> compute_velocity<double>(const Tensor<double>&);
template Tensor<float> to_tensor<float>(const SkeletonSequence&);
template Tensor<double> to_tensor<double>(const SkeletonSequence&);

}  // namespace sgn
