#pragma once

#include <algorithm>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "ambc/errors.hpp"
#include "ambc/types.hpp"

namespace ambc {

/// Dense row-major array with shape metadata. Activations use N x H x W x C.
template <typename Scalar>
class Tensor {
 public:
  using Storage = VectorX<Scalar>;
  using RowMap = Eigen::Map<RowMatrixX<Scalar>>;
  using ConstRowMap = Eigen::Map<const RowMatrixX<Scalar>>;

  Tensor() = default;

  explicit Tensor(std::vector<Index> shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
    data_ = Storage::Constant(checked_size(shape_), fill);
  }

  Tensor(std::initializer_list<Index> shape) : Tensor(std::vector<Index>(shape)) {}

  Tensor(std::vector<Index> shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size()) throw ShapeError("tensor data length does not match its shape");
  }

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const { return data_.size(); }

  Storage& values() { return data_; }
  const Storage& values() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& operator()(Index n, Index y, Index x, Index c) { return data_[offset(n, y, x, c)]; }
  Scalar operator()(Index n, Index y, Index x, Index c) const { return data_[offset(n, y, x, c)]; }

  /// View as a (size / cols) x cols row-major matrix; for NHWC this is pixels x channels.
  RowMap as_rows(Index cols) {
    return RowMap(data_.data(), cols == 0 ? 0 : size() / cols, cols);
  }
  ConstRowMap as_rows(Index cols) const {
    return ConstRowMap(data_.data(), cols == 0 ? 0 : size() / cols, cols);
  }
  /// Pixels x channels view of a rank-4 tensor.
  RowMap pixels() { return as_rows(shape_.back()); }
  ConstRowMap pixels() const { return as_rows(shape_.back()); }

  void reshape(std::vector<Index> shape) {
    if (checked_size(shape) != size()) throw ShapeError("reshape must preserve element count");
    shape_ = std::move(shape);
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  static Index checked_size(const std::vector<Index>& shape) {
    Index n = 1;
    for (Index d : shape) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  Index offset(Index n, Index y, Index x, Index c) const {
    return ((n * shape_[1] + y) * shape_[2] + x) * shape_[3] + c;
  }

  std::vector<Index> shape_;
  Storage data_;
};

inline std::string shape_string(const std::vector<Index>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s + "]";
}

template <typename Scalar>
void require_rank4(const Tensor<Scalar>& t, const char* what) {
  if (t.rank() != 4) throw ShapeError(std::string(what) + ": expected an N x H x W x C tensor, got " + shape_string(t.shape()));
}

}  // namespace ambc
