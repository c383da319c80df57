// SPDX-License-Identifier: Apache-2.0
//
// Synthetic skeleton actions. A 15-joint stick figure with the pelvis fixed at
// the origin; x points to the figure's left, y up, z forward.
//
//   0 pelvis   1 neck     2 head
//   3 l_shoulder 4 l_elbow 5 l_hand   6 r_shoulder 7 r_elbow 8 r_hand
//   9 l_hip   10 l_knee  11 l_foot   12 r_hip     13 r_knee 14 r_foot
//
// Joints past 15 are midpoints of bones.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "sgn/errors.hpp"
#include "sgn/skeleton.hpp"

namespace sgn {

namespace {

constexpr std::size_t kBaseJoints = 15;
constexpr double kPi = std::numbers::pi;
constexpr double kUpperArm = 0.28, kForearm = 0.26, kThigh = 0.45, kShin = 0.45;

const std::pair<std::size_t, std::size_t> kBones[] = {
    {1, 0}, {2, 1}, {3, 1}, {4, 3}, {5, 4}, {6, 1}, {7, 6},
    {8, 7}, {9, 0}, {10, 9}, {11, 10}, {12, 0}, {13, 12}, {14, 13}};

const char* const kBaseTemplates[] = {"hand_raise", "sit_down", "wave", "kick", "arms_spread", "bow"};

Point3 operator+(Point3 a, const Point3& b) {
  for (int i = 0; i < 3; ++i) a[i] += b[i];
  return a;
}

Point3 operator*(double s, Point3 a) {
  for (double& v : a) v *= s;
  return a;
}

// Direction of a limb hanging down, swung by `abduct` sideways (sign picks the
// side) and then by `flex` forward.
Point3 limb(double abduct, double flex) {
  return {std::sin(abduct) * std::cos(flex), -std::cos(abduct) * std::cos(flex), std::sin(flex)};
}

// Rotation about the x axis through the origin; positive leans forward.
Point3 lean(const Point3& p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {p[0], c * p[1] - s * p[2], s * p[1] + c * p[2]};
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Up-and-back-down profile over the active window.
double bump(double s, double onset) { return std::sin(kPi * clamp01((s - onset) / (1.0 - onset))); }

// Monotone 0→1 profile.
double ramp(double s, double onset) {
  const double x = clamp01((s - onset) / 0.7);
  return x * x * (3 - 2 * x);
}

struct Pose {
  double torso_lean = 0;
  double l_arm_abduct = 0, l_arm_flex = 0, l_elbow = 0;
  double r_arm_abduct = 0, r_arm_flex = 0, r_elbow = 0;
  double l_leg_flex = 0, l_knee = 0;
  double r_leg_flex = 0, r_knee = 0;
};

Frame assemble(const Pose& q, double scale) {
  Frame f(kBaseJoints);
  f[0] = {0, 0, 0};
  f[1] = lean({0, 0.5, 0}, q.torso_lean);
  f[2] = lean({0, 0.72, 0}, q.torso_lean);
  f[3] = lean({0.18, 0.46, 0}, q.torso_lean);
  f[6] = lean({-0.18, 0.46, 0}, q.torso_lean);
  f[4] = f[3] + kUpperArm * limb(q.l_arm_abduct, q.l_arm_flex);
  f[5] = f[4] + kForearm * limb(q.l_arm_abduct + q.l_elbow, q.l_arm_flex);
  f[7] = f[6] + kUpperArm * limb(-q.r_arm_abduct, q.r_arm_flex);
  f[8] = f[7] + kForearm * limb(-(q.r_arm_abduct + q.r_elbow), q.r_arm_flex);
  f[9] = {0.1, -0.06, 0};
  f[12] = {-0.1, -0.06, 0};
  f[10] = f[9] + kThigh * limb(0, q.l_leg_flex);
  f[11] = f[10] + kShin * limb(0, q.l_leg_flex - q.l_knee);
  f[13] = f[12] + kThigh * limb(0, q.r_leg_flex);
  f[14] = f[13] + kShin * limb(0, q.r_leg_flex - q.r_knee);
  for (Point3& p : f) p = scale * p;
  return f;
}

Pose base_pose(std::string_view name, double s, const std::array<double, 4>& v) {
  const double amp = 0.75 + 0.25 * v[0];
  const double onset = 0.25 * v[1];
  const double phase = 2 * kPi * v[2];
  Pose q;
  if (name == "hand_raise") {
    q.l_arm_abduct = amp * 0.95 * kPi * bump(s, onset);
  } else if (name == "sit_down") {
    const double r = amp * ramp(s, onset);
    q.l_leg_flex = q.r_leg_flex = r * kPi / 2;
    q.l_knee = q.r_knee = r * kPi / 2;
    q.torso_lean = 0.35 * r;
    q.l_arm_flex = q.r_arm_flex = 0.6 * r;
  } else if (name == "wave") {
    q.r_arm_abduct = amp * 0.7 * kPi;
    q.r_elbow = 0.45 * std::sin(4 * kPi * s + phase);
  } else if (name == "kick") {
    q.r_leg_flex = amp * (kPi / 3) * bump(s, onset);
    q.r_knee = 0.3 * q.r_leg_flex;
  } else if (name == "arms_spread") {
    q.l_arm_abduct = q.r_arm_abduct = amp * (kPi / 2) * bump(s, onset);
  } else if (name == "bow") {
    q.torso_lean = amp * 0.8 * bump(s, onset);
    q.l_arm_flex = q.r_arm_flex = 0.5 * q.torso_lean;
  } else {
    throw ConfigError("unknown synthetic template '" + std::string(name) + "'");
  }
  return q;
}

struct TemplateName {
  std::string base;
  bool perm = false;
  bool rev = false;
};

TemplateName split_template(std::string_view name) {
  TemplateName t;
  std::size_t pos = name.find('~');
  t.base = std::string(name.substr(0, pos));
  while (pos != std::string_view::npos) {
    const std::size_t next = name.find('~', pos + 1);
    const std::string_view mod = name.substr(pos + 1, next == std::string_view::npos ? next : next - pos - 1);
    if (mod == "perm") {
      t.perm = !t.perm;
    } else if (mod == "rev") {
      t.rev = !t.rev;
    } else {
      throw ConfigError("unknown template modifier '~" + std::string(mod) + "' in '" +
                        std::string(name) + "'");
    }
    pos = next;
  }
  return t;
}

}  // namespace

std::vector<std::string> synthetic_template_names() {
  return {std::begin(kBaseTemplates), std::end(kBaseTemplates)};
}

std::vector<std::string> default_templates(std::size_t K) {
  const std::vector<std::string> all{"hand_raise", "hand_raise~perm", "sit_down", "sit_down~rev",
                                     "wave",       "kick",            "arms_spread", "bow"};
  if (K < 4 || K > all.size()) {
    throw ConfigError("synthetic data: default templates cover K in [4, 8], got K=" +
                      std::to_string(K) + "; list templates explicitly");
  }
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(K)};
}

std::vector<std::size_t> role_swap_permutation(std::size_t J) {
  if (J < kBaseJoints) throw ConfigError("synthetic data needs J >= 15");
  std::vector<std::size_t> p(J);
  for (std::size_t k = 0; k < J; ++k) p[k] = k;
  for (std::size_t i = 0; i < 3; ++i) std::swap(p[3 + i], p[9 + i]);
  return p;
}

std::vector<Frame> synthetic_template(std::string_view name, std::size_t J, std::size_t frames,
                                      const std::array<double, 4>& variation) {
  if (J < kBaseJoints) throw ConfigError("synthetic data needs J >= 15, got " + std::to_string(J));
  if (frames == 0) throw ConfigError("synthetic data needs at least one frame");
  const TemplateName t = split_template(name);
  const double scale = 0.9 + 0.2 * variation[3];
  std::vector<Frame> out(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const double s = frames == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(frames - 1);
    Frame f = assemble(base_pose(t.base, s, variation), scale);
    for (std::size_t k = kBaseJoints; k < J; ++k) {
      const auto [a, b] = kBones[(k - kBaseJoints) % std::size(kBones)];
      f.push_back(0.5 * (f[a] + f[b]));
    }
    out[i] = std::move(f);
  }
  if (t.perm) {
    const auto perm = role_swap_permutation(J);
    for (Frame& f : out) {
      Frame g(J);
      for (std::size_t k = 0; k < J; ++k) g[k] = f[perm[k]];
      f = std::move(g);
    }
  }
  if (t.rev) std::reverse(out.begin(), out.end());
  return out;
}

void SyntheticConfig::validate() const {
  if (J < kBaseJoints) throw ConfigError("synthetic: J must be >= 15, got " + std::to_string(J));
  if (frames == 0) throw ConfigError("synthetic: frames must be positive");
  if (per_class == 0) throw ConfigError("synthetic: per_class must be positive");
  if (!(noise >= 0)) throw ConfigError("synthetic: noise stddev must be >= 0");
  if (!(test_fraction >= 0 && test_fraction < 1)) {
    throw ConfigError("synthetic: test_fraction must be in [0, 1)");
  }
  const std::vector<std::string> names = templates.empty() ? default_templates(K) : templates;
  if (names.size() != K) {
    throw ConfigError("synthetic: " + std::to_string(names.size()) + " templates for K=" +
                      std::to_string(K));
  }
  const std::set<std::string> known(names.begin(), names.end());
  if (known.size() != names.size()) throw ConfigError("synthetic: duplicate template");
  bool perm_pair = false, rev_pair = false;
  for (const std::string& n : names) {
    const TemplateName t = split_template(n);
    base_pose(t.base, 0.0, {0, 0, 0, 0});
    if (t.perm && !t.rev && known.count(t.base)) perm_pair = true;
    if (t.rev && !t.perm && known.count(t.base)) rev_pair = true;
  }
  if (!perm_pair || !rev_pair) {
    throw ConfigError("synthetic: templates need a '<name>~perm' and a '<name>~rev' class "
                      "alongside their base classes");
  }
}

DatasetManifest generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::vector<std::string> names = cfg.templates.empty() ? default_templates(cfg.K) : cfg.templates;
  DatasetManifest m;
  m.J = cfg.J;
  m.K = cfg.K;
  m.class_names = names;
  const auto n_test = static_cast<std::size_t>(std::lround(cfg.per_class * cfg.test_fraction));
  for (std::size_t c = 0; c < cfg.K; ++c) {
    for (std::size_t i = 0; i < cfg.per_class; ++i) {
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "-%04zu", i);
      SkeletonSequence s;
      s.id = names[c] + suffix;
      s.label = static_cast<int>(c);
      s.split = i < n_test ? Split::test : Split::train;
      std::mt19937_64 rng = derived_rng(cfg.seed, s.id);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const std::array<double, 4> variation{unit(rng), unit(rng), unit(rng), unit(rng)};
      s.frames = synthetic_template(names[c], cfg.J, cfg.frames, variation);
      std::uniform_real_distribution<double> shift(-0.5, 0.5);
      const Point3 offset{shift(rng), shift(rng), shift(rng)};
      std::normal_distribution<double> noise(0.0, cfg.noise);
      for (Frame& f : s.frames) {
        for (Point3& p : f) {
          for (int a = 0; a < 3; ++a) p[a] += offset[a] + (cfg.noise > 0 ? noise(rng) : 0.0);
        }
      }
      m.sequences.push_back(std::move(s));
    }
  }
  return m;
}

}  // namespace sgn
