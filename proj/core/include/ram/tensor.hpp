#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <new>
#include <vector>

namespace ram {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Raised when operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller violates an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense row-major array. Rank-2 is the working form for every graph op;
/// vectors are 1xN and scalars 1x1.
/// 64-byte aligned storage, so vectorized kernels see the same alignment
/// (and hence the same summation order) for every buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlignment = 64;
  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlignment)));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(kAlignment)); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, const std::vector<T>& values);
  Tensor(std::size_t rows, std::size_t cols, T fill = T(0)) : Tensor(Shape{rows, cols}, fill) {}

  /// Builds a matrix from nested row literals; rows must be equally long.
  static Tensor from_rows(std::initializer_list<std::initializer_list<T>> rows);
  static Tensor scalar(T value) { return Tensor(Shape{1, 1}, std::vector<T>{value}); }
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<T> row(std::size_t r) { return std::span<T>(values_).subspan(r * cols(), cols()); }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(values_).subspan(r * cols(), cols());
  }

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

  void fill(T value);
  bool all_finite() const;
  T item() const;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < values_.size(); ++i) out[i] = static_cast<U>(values_[i]);
    out.set_requires_grad(requires_grad_);
    return out;
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  Shape shape_;
  std::vector<T, AlignedAllocator<T>> values_;
  bool requires_grad_ = false;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace ram
