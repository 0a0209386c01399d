#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <type_traits>
#include <cstdint>
#include <new>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace omnilab::num {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& shape);
std::int64_t shape_numel(const Shape& shape);

/// Raised when operand shapes are incompatible. `node()` names the graph
/// node (op kind plus id) that rejected its inputs, or is empty for plain
/// tensor helpers.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string node, const std::string& detail)
      : std::invalid_argument(node.empty() ? detail : node + ": " + detail),
        node_(std::move(node)) {}
  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

/// Raised when a forward value contains NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string node, const std::string& detail)
      : std::runtime_error(node + ": " + detail), node_(std::move(node)) {}
  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

/// Cache-line aligned allocation. Vectorised reductions peel a prefix that
/// depends on the buffer address, so a fixed alignment keeps their
/// summation order, and therefore results, identical from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), alignment));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

/// Dense row-major array. Dimensions are strictly positive and the buffer
/// always holds exactly product(shape) elements.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : shape_{1}, data_(1, T(0)) {}

  explicit BasicTensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(checked_numel(shape_)), fill);
  }

  BasicTensor(Shape shape, const std::vector<T>& data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (static_cast<std::size_t>(checked_numel(shape_)) != data_.size()) {
      throw ShapeError({}, "buffer of " + std::to_string(data_.size()) +
                               " elements does not fit shape " +
                               shape_str(shape_));
    }
  }

  static BasicTensor scalar(T v) { return BasicTensor(Shape{1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  std::int64_t size() const noexcept {
    return static_cast<std::int64_t>(data_.size());
  }

  /// Dimension `axis`; negative values count from the back.
  std::int64_t dim(int axis) const {
    const int r = rank();
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
      throw ShapeError({}, "axis " + std::to_string(axis) +
                               " out of range for shape " + shape_str(shape_));
    }
    return shape_[static_cast<std::size_t>(a)];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  T operator[](std::int64_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  T item() const {
    if (data_.size() != 1) {
      throw ShapeError({}, "item() on tensor of shape " + shape_str(shape_));
    }
    return data_[0];
  }

  BasicTensor reshaped(Shape shape) const {
    BasicTensor out;
    if (checked_numel(shape) != size()) {
      throw ShapeError({}, "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    if constexpr (std::is_same_v<T, float> || std::is_same_v<T, double>) {
      // A value is Inf or NaN iff its exponent bits are all ones. An
      // integer max over the masked exponents vectorises, unlike
      // std::isfinite in a loop with an early exit.
      using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
      constexpr Bits mask = sizeof(T) == 4 ? Bits(0x7f800000u) : Bits(0x7ff0000000000000ull);
      Bits top = 0;
      for (T v : data_) top = std::max(top, Bits(std::bit_cast<Bits>(v) & mask));
      return top != mask;
    } else {
      for (T v : data_) {
        if (!std::isfinite(v)) return false;
      }
      return true;
    }
  }

  template <class U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(shape_);
    std::copy(data_.begin(), data_.end(), out.ptr());
    return out;
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static std::int64_t checked_numel(const Shape& shape) {
    if (shape.empty()) throw ShapeError({}, "tensor shape must be non-empty");
    for (auto d : shape) {
      if (d <= 0) {
        throw ShapeError({}, "non-positive dimension in shape " +
                                 shape_str(shape));
      }
    }
    return shape_numel(shape);
  }

  Shape shape_;
  std::vector<T, AlignedAllocator<T>> data_;
};

using Tensor = BasicTensor<float>;

inline std::int64_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace omnilab::num
