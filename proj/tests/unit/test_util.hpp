// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <vector>

#include "sgn/tensor.hpp"

namespace sgn::testing {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.storage()) v = u(rng);
  return t;
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Permutes axis `axis` of a tensor: out[..., i, ...] = in[..., perm[i], ...].
template <typename Real>
Tensor<Real> permute_axis(const Tensor<Real>& x, std::size_t axis, const std::vector<std::size_t>& perm) {
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Tensor<Real> out(s);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < inner; ++k) out[(o * n + i) * inner + k] = x[(o * n + perm[i]) * inner + k];
    }
  }
  return out;
}

}  // namespace sgn::testing
