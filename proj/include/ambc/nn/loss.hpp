#pragma once

#include "ambc/tensor.hpp"

namespace ambc::nn {

template <typename Scalar>
struct LossResult {
  double loss = 0.0;
  Tensor<Scalar> grad;
};

/// Sum over the batch of squared Frobenius errors; gradient 2 (pred - target).
template <typename Scalar>
LossResult<Scalar> mse_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (!pred.same_shape(target))
    throw ShapeError("mse_loss: prediction " + shape_string(pred.shape()) + " vs target " +
                     shape_string(target.shape()));
  LossResult<Scalar> out;
  const VectorX<Scalar> diff = pred.values() - target.values();
  out.loss = diff.template cast<double>().squaredNorm();
  out.grad = Tensor<Scalar>(pred.shape(), (Scalar(2) * diff).eval());
  return out;
}

}  // namespace ambc::nn
