#pragma once

#include "ambc/tensor.hpp"

namespace ambc::nn {

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.values().cwiseMax(Scalar(0)));
}

/// Passes the gradient where x > 0; the subgradient at 0 is 0.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& x) {
  if (!grad_out.same_shape(x)) throw ShapeError("relu_backward: gradient shape mismatch");
  return Tensor<Scalar>(x.shape(), (x.values().array() > Scalar(0)).select(grad_out.values(), Scalar(0)).matrix());
}

}  // namespace ambc::nn
