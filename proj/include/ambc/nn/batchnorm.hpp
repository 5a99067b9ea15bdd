#pragma once

#include "ambc/tensor.hpp"

namespace ambc::nn {

enum class Mode { unset, train, eval };

template <typename Scalar>
struct BatchNormLayer {
  Index channels = 0;
  VectorX<Scalar> gamma;
  VectorX<Scalar> beta;
  VectorX<Scalar> running_mean;
  VectorX<Scalar> running_var;
  Scalar eps = Scalar(1e-5);
  Scalar momentum = Scalar(0.1);

  BatchNormLayer() = default;
  explicit BatchNormLayer(Index c)
      : channels(c),
        gamma(VectorX<Scalar>::Ones(c)),
        beta(VectorX<Scalar>::Zero(c)),
        running_mean(VectorX<Scalar>::Zero(c)),
        running_var(VectorX<Scalar>::Ones(c)) {}
};

template <typename Scalar>
struct BatchNormCache {
  Mode mode = Mode::unset;
  Tensor<Scalar> x_hat;
  VectorX<Scalar> inv_std;
  VectorX<Scalar> batch_mean;
  VectorX<Scalar> batch_var;
  Index count = 0;
};

template <typename Scalar>
struct BatchNormBackward {
  Tensor<Scalar> grad_input;
  VectorX<Scalar> grad_gamma;
  VectorX<Scalar> grad_beta;
};

/// Per-channel normalization over N, H, W without side effects. Train mode uses
/// batch statistics (stored in the cache); eval mode reads the running estimates.
template <typename Scalar>
Tensor<Scalar> batchnorm_apply(const Tensor<Scalar>& x, const BatchNormLayer<Scalar>& layer, Mode mode,
                               BatchNormCache<Scalar>* cache = nullptr) {
  require_rank4(x, "batchnorm");
  if (x.dim(3) != layer.channels) throw ShapeError("batchnorm: channel count does not match the layer");
  if (mode == Mode::unset) throw StateError("batchnorm: mode must be train or eval");
  const auto rows = x.pixels();
  const Index count = rows.rows();

  VectorX<Scalar> mean, var;
  if (mode == Mode::train) {
    if (count < 2) throw ParameterError("batchnorm: train mode needs N*H*W >= 2");
    mean = rows.colwise().mean().transpose();
    var = (rows.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  } else {
    mean = layer.running_mean;
    var = layer.running_var;
  }
  const VectorX<Scalar> inv_std = (var.array() + layer.eps).rsqrt().matrix();

  Tensor<Scalar> x_hat(x.shape());
  x_hat.pixels() = (rows.rowwise() - mean.transpose()).array().rowwise() * inv_std.transpose().array();
  Tensor<Scalar> out(x.shape());
  out.pixels() = (x_hat.pixels().array().rowwise() * layer.gamma.transpose().array()).rowwise() +
                 layer.beta.transpose().array();
  if (cache) {
    cache->mode = mode;
    cache->x_hat = std::move(x_hat);
    cache->inv_std = inv_std;
    cache->batch_mean = std::move(mean);
    cache->batch_var = std::move(var);
    cache->count = count;
  }
  return out;
}

/// batchnorm_apply plus, in train mode, the momentum update of the running
/// statistics (unbiased batch variance).
template <typename Scalar>
Tensor<Scalar> batchnorm_forward(const Tensor<Scalar>& x, BatchNormLayer<Scalar>& layer, Mode mode,
                                 BatchNormCache<Scalar>* cache = nullptr) {
  BatchNormCache<Scalar> local;
  BatchNormCache<Scalar>& c = cache ? *cache : local;
  Tensor<Scalar> out = batchnorm_apply(x, layer, mode, &c);
  if (mode == Mode::train) {
    const Scalar unbias = Scalar(c.count) / Scalar(c.count - 1);
    layer.running_mean = (Scalar(1) - layer.momentum) * layer.running_mean + layer.momentum * c.batch_mean;
    layer.running_var = (Scalar(1) - layer.momentum) * layer.running_var + layer.momentum * unbias * c.batch_var;
  }
  return out;
}

template <typename Scalar>
BatchNormBackward<Scalar> batchnorm_backward(const Tensor<Scalar>& grad_out, const BatchNormCache<Scalar>& cache,
                                             const BatchNormLayer<Scalar>& layer) {
  if (!grad_out.same_shape(cache.x_hat)) throw ShapeError("batchnorm_backward: gradient shape mismatch");
  const auto g = grad_out.pixels();
  const auto x_hat = cache.x_hat.pixels();
  BatchNormBackward<Scalar> result;
  result.grad_beta = g.colwise().sum().transpose();
  result.grad_gamma = (g.array() * x_hat.array()).colwise().sum().transpose();
  result.grad_input = Tensor<Scalar>(grad_out.shape());
  const VectorX<Scalar> scale = (layer.gamma.array() * cache.inv_std.array()).matrix();
  if (cache.mode == Mode::eval) {
    result.grad_input.pixels() = g.array().rowwise() * scale.transpose().array();
    return result;
  }
  // dx = gamma * inv_std * (g - mean(g) - x_hat * mean(g * x_hat))
  const Scalar inv_count = Scalar(1) / Scalar(g.rows());
  const VectorX<Scalar> mean_g = result.grad_beta * inv_count;
  const VectorX<Scalar> mean_gx = result.grad_gamma * inv_count;
  result.grad_input.pixels() =
      ((g.rowwise() - mean_g.transpose()).array() - x_hat.array().rowwise() * mean_gx.transpose().array())
          .rowwise() *
      scale.transpose().array();
  return result;
}

}  // namespace ambc::nn
