#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace clnet {

/// Raised whenever an operation receives tensors whose shapes violate its
/// contract. The message always names the offending shapes.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

/// Dense N-dimensional array, row-major, owning its buffer. All extents must
/// be >= 1. The scalar type is float on the training/eval path and double in
/// gradient-check mode.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), S(0)) {}

  Tensor(std::vector<int> shape, std::vector<S> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor full(std::vector<int> shape, S value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& buffer() { return data_; }
  const std::vector<S>& buffer() const { return data_; }

  S& operator[](std::size_t i) { return data_[i]; }
  const S& operator[](std::size_t i) const { return data_[i]; }

  template <typename... I>
  S& at(I... idx) {
    return data_[offset(idx...)];
  }
  template <typename... I>
  const S& at(I... idx) const {
    return data_[offset(idx...)];
  }

  /// Same buffer, new shape; element count must be preserved.
  Tensor reshaped(std::vector<int> new_shape) const& {
    Tensor t(std::move(new_shape), data_);
    return t;
  }
  Tensor reshaped(std::vector<int> new_shape) && {
    if (checked_size(new_shape) != data_.size()) {
      throw ShapeError("reshape " + shape_str(shape_) + " -> " +
                       shape_str(new_shape) + " changes element count");
    }
    shape_ = std::move(new_shape);
    return std::move(*this);
  }

  template <typename T>
  Tensor<T> cast() const {
    std::vector<T> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
    return Tensor<T>(shape_, std::move(out));
  }

  void fill(S value) {
    for (auto& v : data_) v = value;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  template <typename... I>
  std::size_t offset(I... idx) const {
    const int ix[] = {static_cast<int>(idx)...};
    const int n = static_cast<int>(sizeof...(idx));
    if (n != rank()) {
      throw ShapeError("index rank " + std::to_string(n) +
                       " does not match tensor rank " + std::to_string(rank()));
    }
    std::size_t off = 0;
    for (int k = 0; k < n; ++k) {
      off = off * static_cast<std::size_t>(shape_[static_cast<std::size_t>(k)]) +
            static_cast<std::size_t>(ix[k]);
    }
    return off;
  }

  static std::size_t checked_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
      if (e < 1) throw ShapeError("tensor extent must be >= 1, got shape " + shape_str(shape));
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<S> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace clnet
