#include "ram/tensor.hpp"

#include <cmath>
#include <sstream>

namespace ram {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

void check_dims(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  values_.assign(shape_size(shape_), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, const std::vector<T>& values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  check_dims(shape_);
  if (shape_size(shape_) != values_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not match " + std::to_string(values_.size()) +
                         " values");
  }
}

template <typename T>
Tensor<T> Tensor<T>::from_rows(std::initializer_list<std::initializer_list<T>> rows) {
  if (rows.size() == 0) throw DimensionError("from_rows needs at least one row");
  const std::size_t cols = rows.begin()->size();
  std::vector<T> values;
  values.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged rows in from_rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor(Shape{rows.size(), cols}, std::move(values));
}

template <typename T>
Tensor<T> Tensor<T>::identity(std::size_t n) {
  Tensor out(n, n);
  for (std::size_t i = 0; i < n; ++i) out.at(i, i) = T(1);
  return out;
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? 1 : shape_.front();
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? shape_[0] : values_.size() / shape_[0];
}

template <typename T>
void Tensor<T>::fill(T value) {
  for (auto& v : values_) v = value;
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (auto v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
T Tensor<T>::item() const {
  if (values_.size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
  return values_[0];
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace ram
