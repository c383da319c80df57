// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "sgn/errors.hpp"

namespace sgn {

using Shape = std::vector<std::size_t>;

/// Number of elements described by `shape` (1 for rank 0).
std::size_t numel(const Shape& shape);

/// "[2x3x4]" style rendering used in error messages.
std::string shape_string(const Shape& shape);

enum class Precision { f32, f64 };

/// Process-wide numeric settings. Training defaults to 32-bit; gradient
/// verification always runs in 64-bit.
struct NumericConfig {
  Precision precision = Precision::f32;
  bool strict = false;
};

NumericConfig& numeric_config();

inline bool strict_mode() { return numeric_config().strict; }

/// RAII toggle for strict NaN/Inf checking.
class StrictModeGuard {
 public:
  explicit StrictModeGuard(bool on) : previous_(numeric_config().strict) {
    numeric_config().strict = on;
  }
  ~StrictModeGuard() { numeric_config().strict = previous_; }
  StrictModeGuard(const StrictModeGuard&) = delete;
  StrictModeGuard& operator=(const StrictModeGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major array with an optional gradient buffer of the same shape.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;

  explicit Tensor(Shape shape, Real fill = Real(0))
      : shape_(std::move(shape)), data_(numel(shape_), fill) {
    validate_shape();
  }

  Tensor(Shape shape, std::vector<Real> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != numel(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  Tensor(Shape shape, std::initializer_list<Real> values)
      : Tensor(std::move(shape), std::vector<Real>(values)) {}

  static Tensor scalar(Real v) { return Tensor(Shape{}, std::vector<Real>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }

  Real item() const {
    if (data_.size() != 1) {
      throw ContractError("item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
  }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) {
    requires_grad_ = on;
    if (on) ensure_grad();
  }

  bool has_grad() const { return !data_.empty() && grad_.size() == data_.size(); }
  std::span<Real> grad() {
    ensure_grad();
    return grad_;
  }
  std::span<const Real> grad() const { return grad_; }
  void ensure_grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), Real(0));
  }
  void zero_grad() {
    if (!grad_.empty()) std::fill(grad_.begin(), grad_.end(), Real(0));
  }

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape shape) const {
    if (numel(shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                           shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  /// Bitwise equality of shape and values.
  bool identical(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  void validate_shape() const {
    for (std::size_t d : shape_) {
      if (d == 0) {
        throw DimensionError("tensor dimensions must be positive, got " +
                             shape_string(shape_));
      }
    }
  }

  Shape shape_;
  std::vector<Real> data_;
  std::vector<Real> grad_;
  bool requires_grad_ = false;
};

/// Element-type conversion (used to move between 32- and 64-bit models).
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  std::vector<To> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return Tensor<To>(t.shape(), std::move(out));
}

/// Throws NumericError if `values` holds NaN or Inf.
template <typename Real>
void check_finite(std::span<const Real> values, const std::string& where);

extern template void check_finite<float>(std::span<const float>, const std::string&);
extern template void check_finite<double>(std::span<const double>, const std::string&);

/// Stops glibc from returning freed tensor buffers to the kernel. The tape
/// allocates and frees the same large blocks every step, and without this
/// each one is a fresh mmap. No-op on other C libraries.
void keep_freed_memory();

}  // namespace sgn
