#pragma once

#include <cmath>

#include "ambc/rng.hpp"
#include "ambc/tensor.hpp"

namespace ambc::nn {

/// Stride-1 "same" convolution with zero padding. Filters are K x k x k x C_in.
template <typename Scalar>
struct ConvLayer {
  Index out_channels = 0;
  Index in_channels = 0;
  Index kernel = 3;
  VectorX<Scalar> filters;
  VectorX<Scalar> bias;

  ConvLayer() = default;
  ConvLayer(Index k_out, Index c_in, Index kernel_size)
      : out_channels(k_out),
        in_channels(c_in),
        kernel(kernel_size),
        filters(VectorX<Scalar>::Zero(k_out * kernel_size * kernel_size * c_in)),
        bias(VectorX<Scalar>::Zero(k_out)) {
    if (k_out <= 0 || c_in <= 0) throw ParameterError("convolution channel counts must be positive");
    if (kernel_size <= 0 || kernel_size % 2 == 0) throw ParameterError("convolution kernel size must be odd");
  }

  Index patch_size() const { return kernel * kernel * in_channels; }
  Index padding() const { return kernel / 2; }

  Eigen::Map<RowMatrixX<Scalar>> filter_matrix() { return {filters.data(), out_channels, patch_size()}; }
  Eigen::Map<const RowMatrixX<Scalar>> filter_matrix() const { return {filters.data(), out_channels, patch_size()}; }

  Scalar& weight(Index k, Index dy, Index dx, Index c) {
    return filters[((k * kernel + dy) * kernel + dx) * in_channels + c];
  }

  /// He-uniform over fan-in k*k*C_in; bias zero.
  void init_he_uniform(Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(patch_size()));
    for (Index i = 0; i < filters.size(); ++i) filters[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    bias.setZero();
  }
};

template <typename Scalar>
struct ConvGrads {
  VectorX<Scalar> filters;
  VectorX<Scalar> bias;
};

template <typename Scalar>
struct ConvBackward {
  Tensor<Scalar> grad_input;
  ConvGrads<Scalar> grads;
};

namespace detail {

/// (N*H*W) x (k*k*C) patch matrix, patch order (dy, dx, c).
template <typename Scalar>
RowMatrixX<Scalar> im2col(const Tensor<Scalar>& input, Index kernel) {
  const Index n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const Index pad = kernel / 2;
  RowMatrixX<Scalar> cols = RowMatrixX<Scalar>::Zero(n * h * w, kernel * kernel * c);
  const Scalar* src = input.data();
  for (Index b = 0; b < n; ++b)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        Scalar* row = cols.data() + ((b * h + y) * w + x) * cols.cols();
        for (Index dy = 0; dy < kernel; ++dy) {
          const Index sy = y + dy - pad;
          if (sy < 0 || sy >= h) continue;
          for (Index dx = 0; dx < kernel; ++dx) {
            const Index sx = x + dx - pad;
            if (sx < 0 || sx >= w) continue;
            const Scalar* px = src + ((b * h + sy) * w + sx) * c;
            std::copy(px, px + c, row + (dy * kernel + dx) * c);
          }
        }
      }
  return cols;
}

template <typename Scalar>
void col2im_add(const RowMatrixX<Scalar>& cols, Index kernel, Tensor<Scalar>& grad_input) {
  const Index n = grad_input.dim(0), h = grad_input.dim(1), w = grad_input.dim(2), c = grad_input.dim(3);
  const Index pad = kernel / 2;
  Scalar* dst = grad_input.data();
  for (Index b = 0; b < n; ++b)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        const Scalar* row = cols.data() + ((b * h + y) * w + x) * cols.cols();
        for (Index dy = 0; dy < kernel; ++dy) {
          const Index sy = y + dy - pad;
          if (sy < 0 || sy >= h) continue;
          for (Index dx = 0; dx < kernel; ++dx) {
            const Index sx = x + dx - pad;
            if (sx < 0 || sx >= w) continue;
            Scalar* px = dst + ((b * h + sy) * w + sx) * c;
            const Scalar* g = row + (dy * kernel + dx) * c;
            for (Index ch = 0; ch < c; ++ch) px[ch] += g[ch];
          }
        }
      }
}

template <typename Scalar>
void check_conv_input(const Tensor<Scalar>& input, const ConvLayer<Scalar>& layer) {
  require_rank4(input, "conv2d");
  if (input.dim(3) != layer.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(3)) + " channels, layer expects " +
                     std::to_string(layer.in_channels));
}

}  // namespace detail

/// out[n,y,x,k] = bias[k] + sum filters[k,dy,dx,c] * padded[n, y+dy, x+dx, c].
/// `use_bias = false` evaluates the purely linear part.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const ConvLayer<Scalar>& layer, bool use_bias = true) {
  detail::check_conv_input(input, layer);
  Tensor<Scalar> out({input.dim(0), input.dim(1), input.dim(2), layer.out_channels});
  auto out_rows = out.pixels();
  if (layer.kernel == 1) {
    out_rows.noalias() = input.pixels() * layer.filter_matrix().transpose();
  } else {
    const RowMatrixX<Scalar> cols = detail::im2col(input, layer.kernel);
    out_rows.noalias() = cols * layer.filter_matrix().transpose();
  }
  if (use_bias) out_rows.rowwise() += layer.bias.transpose();
  return out;
}

/// Exact reverse-mode gradients of conv2d_forward at `input`.
template <typename Scalar>
ConvBackward<Scalar> conv2d_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& input,
                                     const ConvLayer<Scalar>& layer, bool need_input_grad = true) {
  detail::check_conv_input(input, layer);
  if (grad_out.rank() != 4 || grad_out.dim(0) != input.dim(0) || grad_out.dim(1) != input.dim(1) ||
      grad_out.dim(2) != input.dim(2) || grad_out.dim(3) != layer.out_channels)
    throw ShapeError("conv2d_backward: gradient shape " + shape_string(grad_out.shape()) +
                     " does not match the forward output");
  ConvBackward<Scalar> result;
  const auto g = grad_out.pixels();
  result.grads.bias = g.colwise().sum().transpose();
  result.grads.filters.resize(layer.filters.size());
  Eigen::Map<RowMatrixX<Scalar>> grad_w(result.grads.filters.data(), layer.out_channels, layer.patch_size());
  if (layer.kernel == 1) {
    grad_w.noalias() = g.transpose() * input.pixels();
    if (need_input_grad) {
      result.grad_input = Tensor<Scalar>(input.shape());
      result.grad_input.pixels().noalias() = g * layer.filter_matrix();
    }
    return result;
  }
  const RowMatrixX<Scalar> cols = detail::im2col(input, layer.kernel);
  grad_w.noalias() = g.transpose() * cols;
  if (need_input_grad) {
    const RowMatrixX<Scalar> grad_cols = g * layer.filter_matrix();
    result.grad_input = Tensor<Scalar>(input.shape());
    detail::col2im_add(grad_cols, layer.kernel, result.grad_input);
  }
  return result;
}

/// Fully connected map on flattened samples: out = W x + b, W is out x in.
template <typename Scalar>
struct DenseLayer {
  Index in_features = 0;
  Index out_features = 0;
  VectorX<Scalar> weights;
  VectorX<Scalar> bias;

  DenseLayer() = default;
  DenseLayer(Index out, Index in)
      : in_features(in),
        out_features(out),
        weights(VectorX<Scalar>::Zero(out * in)),
        bias(VectorX<Scalar>::Zero(out)) {}

  Eigen::Map<RowMatrixX<Scalar>> matrix() { return {weights.data(), out_features, in_features}; }
  Eigen::Map<const RowMatrixX<Scalar>> matrix() const { return {weights.data(), out_features, in_features}; }

  void init_he_uniform(Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in_features));
    for (Index i = 0; i < weights.size(); ++i) weights[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    bias.setZero();
  }
};

/// Input rows are samples (N x in); returns N x out.
template <typename Scalar>
RowMatrixX<Scalar> dense_forward(const Eigen::Ref<const RowMatrixX<Scalar>>& input, const DenseLayer<Scalar>& layer,
                                 bool use_bias = true) {
  if (input.cols() != layer.in_features) throw ShapeError("dense: input width does not match the layer");
  RowMatrixX<Scalar> out = input * layer.matrix().transpose();
  if (use_bias) out.rowwise() += layer.bias.transpose();
  return out;
}

}  // namespace ambc::nn
