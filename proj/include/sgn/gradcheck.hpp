// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "sgn/tape.hpp"

namespace sgn {

struct GradcheckOptions {
  double epsilon = 1e-6;
  /// Coordinates compared; 0 means every coordinate of every parameter.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
  /// Denominator floor of the relative error, so that coordinates whose true
  /// gradient is ~0 are judged on absolute error.
  double relative_floor = 1e-6;
};

struct GradcheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t coordinates = 0;
};

/// Builds the scalar objective on a fresh tape each time it is called.
using LossBuilder = std::function<Var<double>(Tape<double>&)>;

/// Compares tape gradients of `loss` with respect to `params` against central
/// differences (f(p+ε) − f(p−ε)) / 2ε. Parameters are restored afterwards and
/// their gradients left holding the analytic values.
GradcheckResult gradcheck(const LossBuilder& loss, std::span<Tensor<double>* const> params,
                          const GradcheckOptions& options = {});

}  // namespace sgn
