#pragma once

// Residual denoising network: B structurally identical blocks, each of which
// predicts a residual noise S_i from its input and subtracts it
// (Y_i = Y_{i-1} - S_i), followed by a reconstruction layer that combines the
// P denoised slices into one Ma x Mb estimate.
//
// Block layout for L layers: Conv+BN+ReLU, (L-2) x Conv+BN+ReLU, Conv.
// In analysis mode BN and ReLU are bypassed and biases are treated as zero,
// which makes the network a linear map of its input.

#include <string>
#include <vector>

#include "ambc/nn/activation.hpp"
#include "ambc/nn/batchnorm.hpp"
#include "ambc/nn/conv.hpp"
#include "ambc/nn/optimizer.hpp"
#include "ambc/rng.hpp"
#include "ambc/tensor.hpp"

namespace ambc {

using nn::Mode;

enum class ReconKind : std::uint32_t { per_pixel = 0, dense = 1 };

const char* to_string(ReconKind kind);
ReconKind recon_kind_from_string(const std::string& name);

struct CrldHyper {
  Index blocks = 3;
  Index layers = 8;
  Index filters = 64;
  Index ma = 8;
  Index mb = 8;
  Index p = 2;
  Index kernel = 3;
  ReconKind recon = ReconKind::per_pixel;
  bool analysis = false;

  friend bool operator==(const CrldHyper&, const CrldHyper&) = default;
};

void validate(const CrldHyper& hyper);

/// Closed-form trainable parameter count (conv weights and biases, BN gamma/beta,
/// reconstruction weights and bias).
Index crld_parameter_count(const CrldHyper& hyper);

template <typename Scalar>
struct CrldBlock {
  std::vector<nn::ConvLayer<Scalar>> convs;      // L layers
  std::vector<nn::BatchNormLayer<Scalar>> norms;  // first L-1 layers
};

template <typename Scalar>
struct BlockOutput {
  Tensor<Scalar> y;         // Y_i
  Tensor<Scalar> residual;  // S_i
};

template <typename Scalar>
class CrldModel {
 public:
  struct LayerCache {
    Tensor<Scalar> conv_input;
    nn::BatchNormCache<Scalar> norm;
    Tensor<Scalar> pre_activation;
  };
  struct BlockCache {
    std::vector<LayerCache> layers;
  };
  struct ForwardCache {
    std::vector<BlockCache> blocks;
    Tensor<Scalar> recon_input;
  };
  struct Gradients {
    std::vector<VectorX<Scalar>> params;  // aligned with for_each_parameter order
    Tensor<Scalar> input;
  };

  CrldModel() = default;

  /// He-uniform convolutions, zero biases, unit BN scale.
  static CrldModel build(const CrldHyper& hyper, Rng& rng) {
    validate(hyper);
    CrldModel m;
    m.hyper_ = hyper;
    const Index f = hyper.filters, k = hyper.kernel, p = hyper.p;
    for (Index b = 0; b < hyper.blocks; ++b) {
      CrldBlock<Scalar> block;
      for (Index l = 0; l < hyper.layers; ++l) {
        const Index c_in = l == 0 ? p : f;
        const Index c_out = l == hyper.layers - 1 ? p : f;
        nn::ConvLayer<Scalar> conv(c_out, c_in, k);
        conv.init_he_uniform(rng);
        block.convs.push_back(std::move(conv));
        if (l + 1 < hyper.layers) block.norms.emplace_back(c_out);
      }
      m.blocks_.push_back(std::move(block));
    }
    if (hyper.recon == ReconKind::per_pixel) {
      m.recon_conv_ = nn::ConvLayer<Scalar>(1, p, 1);
      m.recon_conv_.init_he_uniform(rng);
    } else {
      m.recon_dense_ = nn::DenseLayer<Scalar>(hyper.ma * hyper.mb, hyper.ma * hyper.mb * p);
      m.recon_dense_.init_he_uniform(rng);
    }
    return m;
  }

  const CrldHyper& hyper() const { return hyper_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }
  bool analysis() const { return hyper_.analysis; }
  void set_analysis(bool on) { hyper_.analysis = on; }

  std::vector<CrldBlock<Scalar>>& blocks() { return blocks_; }
  const std::vector<CrldBlock<Scalar>>& blocks() const { return blocks_; }
  nn::ConvLayer<Scalar>& recon_conv() { return recon_conv_; }
  const nn::ConvLayer<Scalar>& recon_conv() const { return recon_conv_; }
  nn::DenseLayer<Scalar>& recon_dense() { return recon_dense_; }
  const nn::DenseLayer<Scalar>& recon_dense() const { return recon_dense_; }

  /// Visits every parameter in checkpoint order as f(name, vector, trainable).
  /// Biases and BN affine terms are frozen in analysis mode.
  template <typename F>
  void for_each_parameter(F&& f) {
    visit_parameters(*this, f);
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    visit_parameters(*this, f);
  }

  /// BN running statistics in checkpoint order.
  template <typename F>
  void for_each_running_stat(F&& f) {
    for (auto& block : blocks_)
      for (auto& norm : block.norms) {
        f(norm.running_mean);
        f(norm.running_var);
      }
  }
  template <typename F>
  void for_each_running_stat(F&& f) const {
    for (const auto& block : blocks_)
      for (const auto& norm : block.norms) {
        f(norm.running_mean);
        f(norm.running_var);
      }
  }

  Index parameter_count() const {
    Index n = 0;
    for_each_parameter([&](const std::string&, const VectorX<Scalar>& v, bool trainable) {
      if (trainable) n += v.size();
    });
    return n;
  }

  /// Stacked observations N x Ma x Mb x P -> estimates N x Ma x Mb x 1. Train
  /// mode normalizes with batch statistics and updates the running estimates.
  Tensor<Scalar> forward(const Tensor<Scalar>& y, ForwardCache* cache = nullptr) {
    ForwardCache local;
    ForwardCache* c = cache ? cache : (mode_ == Mode::train ? &local : nullptr);
    Tensor<Scalar> out = run(y, c);
    if (mode_ == Mode::train && !hyper_.analysis) update_running_stats(*c);
    return out;
  }

  /// Side-effect-free forward; in train mode batch statistics are used but not stored.
  Tensor<Scalar> predict(const Tensor<Scalar>& y) const { return run(y, nullptr); }

  /// One denoising block: returns Y_i = Y_prev - S_i together with S_i.
  BlockOutput<Scalar> block_forward(Index i, const Tensor<Scalar>& y_prev) const {
    check_mode();
    check_geometry(y_prev, "block_forward");
    BlockOutput<Scalar> out;
    out.residual = subnetwork(blocks_.at(static_cast<std::size_t>(i)), y_prev, nullptr);
    out.y = Tensor<Scalar>(y_prev.shape(), (y_prev.values() - out.residual.values()).eval());
    return out;
  }

  /// Reverse pass for an upstream gradient on the output of forward(y, &cache).
  Gradients backward(const Tensor<Scalar>& grad_out, const ForwardCache& cache, bool need_input = false) const {
    Gradients grads;
    for_each_parameter([&](const std::string&, const VectorX<Scalar>& v, bool) {
      grads.params.push_back(VectorX<Scalar>::Zero(v.size()));
    });
    std::size_t cursor = grads.params.size();

    // Reconstruction.
    Tensor<Scalar> d;
    const Tensor<Scalar>& recon_in = cache.recon_input;
    if (hyper_.recon == ReconKind::per_pixel) {
      auto back = nn::conv2d_backward(grad_out, recon_in, recon_conv_);
      grads.params[cursor - 2] = std::move(back.grads.filters);
      if (!hyper_.analysis) grads.params[cursor - 1] = std::move(back.grads.bias);
      d = std::move(back.grad_input);
    } else {
      const Index n = recon_in.dim(0);
      const auto g = grad_out.as_rows(hyper_.ma * hyper_.mb);
      const auto x = recon_in.as_rows(recon_in.size() / n);
      RowMatrixX<Scalar> gw = g.transpose() * x;
      grads.params[cursor - 2] = Eigen::Map<const VectorX<Scalar>>(gw.data(), gw.size());
      if (!hyper_.analysis) grads.params[cursor - 1] = g.colwise().sum().transpose();
      d = Tensor<Scalar>(recon_in.shape());
      d.as_rows(recon_in.size() / n).noalias() = g * recon_dense_.matrix();
    }
    cursor -= 2;

    for (Index b = hyper_.blocks - 1; b >= 0; --b) {
      const auto& block = blocks_[static_cast<std::size_t>(b)];
      const auto& bc = cache.blocks[static_cast<std::size_t>(b)];
      // Y_i = Y_prev - S_i(Y_prev): the subnetwork sees -dY_i.
      Tensor<Scalar> ds(d.shape(), (-d.values()).eval());
      const std::size_t block_params = params_per_block();
      cursor -= block_params;
      Tensor<Scalar> d_in = subnetwork_backward(block, bc, ds, grads.params, cursor);
      d.values() += d_in.values();
    }
    if (need_input) grads.input = std::move(d);
    return grads;
  }

  /// Trainable parameters paired with their gradients, for the optimizer.
  std::vector<nn::ParamSlot<Scalar>> trainable_slots(const Gradients& grads) {
    std::vector<nn::ParamSlot<Scalar>> slots;
    std::size_t i = 0;
    for_each_parameter([&](const std::string& name, VectorX<Scalar>& v, bool trainable) {
      if (trainable) slots.push_back({name, &v, &grads.params[i]});
      ++i;
    });
    return slots;
  }

  template <typename Other>
  CrldModel<Other> cast() const {
    CrldModel<Other> out;
    out.hyper_ = hyper_;
    out.mode_ = mode_;
    for (const auto& block : blocks_) {
      CrldBlock<Other> nb;
      for (const auto& conv : block.convs) nb.convs.push_back(cast_conv<Other>(conv));
      for (const auto& norm : block.norms) {
        nn::BatchNormLayer<Other> n2(norm.channels);
        n2.gamma = norm.gamma.template cast<Other>();
        n2.beta = norm.beta.template cast<Other>();
        n2.running_mean = norm.running_mean.template cast<Other>();
        n2.running_var = norm.running_var.template cast<Other>();
        n2.eps = static_cast<Other>(norm.eps);
        n2.momentum = static_cast<Other>(norm.momentum);
        nb.norms.push_back(std::move(n2));
      }
      out.blocks_.push_back(std::move(nb));
    }
    if (hyper_.recon == ReconKind::per_pixel) {
      out.recon_conv_ = cast_conv<Other>(recon_conv_);
    } else {
      out.recon_dense_.in_features = recon_dense_.in_features;
      out.recon_dense_.out_features = recon_dense_.out_features;
      out.recon_dense_.weights = recon_dense_.weights.template cast<Other>();
      out.recon_dense_.bias = recon_dense_.bias.template cast<Other>();
    }
    return out;
  }

 private:
  template <typename>
  friend class CrldModel;

  template <typename Other>
  static nn::ConvLayer<Other> cast_conv(const nn::ConvLayer<Scalar>& in) {
    nn::ConvLayer<Other> out(in.out_channels, in.in_channels, in.kernel);
    out.filters = in.filters.template cast<Other>();
    out.bias = in.bias.template cast<Other>();
    return out;
  }

  template <typename Self, typename F>
  static void visit_parameters(Self& self, F& f) {
    const bool free = !self.hyper_.analysis;
    for (std::size_t b = 0; b < self.blocks_.size(); ++b) {
      auto& block = self.blocks_[b];
      const std::string prefix = "block" + std::to_string(b) + ".layer";
      for (std::size_t l = 0; l < block.convs.size(); ++l) {
        const std::string layer = prefix + std::to_string(l);
        f(layer + ".filters", block.convs[l].filters, true);
        f(layer + ".bias", block.convs[l].bias, free);
        if (l < block.norms.size()) {
          f(layer + ".bn.gamma", block.norms[l].gamma, free);
          f(layer + ".bn.beta", block.norms[l].beta, free);
        }
      }
    }
    if (self.hyper_.recon == ReconKind::per_pixel) {
      f(std::string("recon.filters"), self.recon_conv_.filters, true);
      f(std::string("recon.bias"), self.recon_conv_.bias, free);
    } else {
      f(std::string("recon.weights"), self.recon_dense_.weights, true);
      f(std::string("recon.bias"), self.recon_dense_.bias, free);
    }
  }

  std::size_t params_per_block() const { return static_cast<std::size_t>(2 * hyper_.layers + 2 * (hyper_.layers - 1)); }

  void check_mode() const {
    if (mode_ == Mode::unset) throw StateError("CRLD model mode is unset; call set_mode(train|eval) first");
  }

  void check_geometry(const Tensor<Scalar>& y, const char* what) const {
    if (y.rank() != 4 || y.dim(1) != hyper_.ma || y.dim(2) != hyper_.mb || y.dim(3) != hyper_.p)
      throw ShapeError(std::string(what) + ": expected N x " + std::to_string(hyper_.ma) + " x " +
                       std::to_string(hyper_.mb) + " x " + std::to_string(hyper_.p) + ", got " +
                       shape_string(y.shape()));
  }

  Tensor<Scalar> subnetwork(const CrldBlock<Scalar>& block, const Tensor<Scalar>& input, BlockCache* cache) const {
    const bool linear = hyper_.analysis;
    const std::size_t layers = block.convs.size();
    if (cache) cache->layers.resize(layers);
    Tensor<Scalar> x = input;
    for (std::size_t l = 0; l < layers; ++l) {
      Tensor<Scalar> z = nn::conv2d_forward(x, block.convs[l], !linear);
      if (cache) cache->layers[l].conv_input = std::move(x);
      if (l + 1 == layers || linear) {
        x = std::move(z);
        continue;
      }
      Tensor<Scalar> normed =
          nn::batchnorm_apply(z, block.norms[l], mode_, cache ? &cache->layers[l].norm : nullptr);
      x = nn::relu_forward(normed);
      if (cache) cache->layers[l].pre_activation = std::move(normed);
    }
    return x;
  }

  Tensor<Scalar> subnetwork_backward(const CrldBlock<Scalar>& block, const BlockCache& cache, Tensor<Scalar> d,
                                     std::vector<VectorX<Scalar>>& grads, std::size_t offset) const {
    const bool linear = hyper_.analysis;
    const std::size_t layers = block.convs.size();
    // Per layer l: filters at 4l, bias at 4l+1, gamma 4l+2, beta 4l+3 (last layer has no BN).
    for (std::size_t li = layers; li-- > 0;) {
      const std::size_t base = offset + 4 * li;
      if (li + 1 < layers && !linear) {
        d = nn::relu_backward(d, cache.layers[li].pre_activation);
        auto bn = nn::batchnorm_backward(d, cache.layers[li].norm, block.norms[li]);
        grads[base + 2] = std::move(bn.grad_gamma);
        grads[base + 3] = std::move(bn.grad_beta);
        d = std::move(bn.grad_input);
      }
      auto conv = nn::conv2d_backward(d, cache.layers[li].conv_input, block.convs[li]);
      grads[base] = std::move(conv.grads.filters);
      if (!linear) grads[base + 1] = std::move(conv.grads.bias);
      d = std::move(conv.grad_input);
    }
    return d;
  }

  Tensor<Scalar> run(const Tensor<Scalar>& y, ForwardCache* cache) const {
    check_mode();
    check_geometry(y, "CRLD forward");
    if (cache) cache->blocks.resize(blocks_.size());
    Tensor<Scalar> current = y;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      Tensor<Scalar> s = subnetwork(blocks_[b], current, cache ? &cache->blocks[b] : nullptr);
      current.values() -= s.values();
    }
    const bool bias = !hyper_.analysis;
    const Index n = y.dim(0);
    Tensor<Scalar> out;
    if (hyper_.recon == ReconKind::per_pixel) {
      out = nn::conv2d_forward(current, recon_conv_, bias);
    } else {
      out = Tensor<Scalar>({n, hyper_.ma, hyper_.mb, 1});
      out.as_rows(hyper_.ma * hyper_.mb) = nn::dense_forward<Scalar>(current.as_rows(current.size() / n), recon_dense_, bias);
    }
    if (cache) cache->recon_input = std::move(current);
    return out;
  }

  void update_running_stats(const ForwardCache& cache) {
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      for (std::size_t l = 0; l < blocks_[b].norms.size(); ++l) {
        auto& norm = blocks_[b].norms[l];
        const auto& c = cache.blocks[b].layers[l].norm;
        const Scalar unbias = Scalar(c.count) / Scalar(c.count - 1);
        norm.running_mean = (Scalar(1) - norm.momentum) * norm.running_mean + norm.momentum * c.batch_mean;
        norm.running_var = (Scalar(1) - norm.momentum) * norm.running_var + norm.momentum * unbias * c.batch_var;
      }
  }

  CrldHyper hyper_;
  Mode mode_ = Mode::unset;
  std::vector<CrldBlock<Scalar>> blocks_;
  nn::ConvLayer<Scalar> recon_conv_;
  nn::DenseLayer<Scalar> recon_dense_;
};

/// Zeroes every subnetwork weight and bias so each block is the identity map.
template <typename Scalar>
void zero_residual_branches(CrldModel<Scalar>& model) {
  for (auto& block : model.blocks())
    for (auto& conv : block.convs) {
      conv.filters.setZero();
      conv.bias.setZero();
    }
}

/// Sets the reconstruction to the per-pixel mean over the P slices (the LS map).
template <typename Scalar>
void set_recon_channel_average(CrldModel<Scalar>& model) {
  const Index p = model.hyper().p;
  if (model.hyper().recon == ReconKind::per_pixel) {
    model.recon_conv().filters.setConstant(Scalar(1) / Scalar(p));
    model.recon_conv().bias.setZero();
    return;
  }
  auto& dense = model.recon_dense();
  dense.weights.setZero();
  dense.bias.setZero();
  auto w = dense.matrix();
  for (Index m = 0; m < dense.out_features; ++m)
    for (Index k = 0; k < p; ++k) w(m, m * p + k) = Scalar(1) / Scalar(p);
}

}  // namespace ambc
