#pragma once

// Offline training of a CRLD on a Dataset with the summed squared-error cost,
// early stopping on validation loss, and online NMSE evaluation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "ambc/crld.hpp"
#include "ambc/dataset.hpp"
#include "ambc/estimators.hpp"
#include "ambc/nn/loss.hpp"
#include "ambc/nn/optimizer.hpp"

namespace ambc {

struct TrainOptions {
  Index batch_size = 128;
  Index max_epochs = 50;
  Index patience = 5;
  double val_fraction = 0.1;
  nn::OptimizerConfig optimizer;
  /// Learning rate multiplier applied after every epoch.
  double lr_decay = 1.0;
  bool strict_determinism = true;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const TrainOptions&, const TrainOptions&) = default;
};

struct EpochRecord {
  Index epoch = 0;  // 0 is the untrained model
  double train_loss = 0.0;  // J_MSE summed over the training split
  double val_loss = 0.0;    // J_MSE summed over the validation split
  double train_loss_mean = 0.0;
  double val_loss_mean = 0.0;
  double learning_rate = 0.0;
  bool is_best = false;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> events;
  Index best_epoch = 0;
  Index stop_epoch = 0;

  double best_val_loss_mean() const;
  /// epoch,train_loss,val_loss,is_best with per-example mean losses.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

template <typename Scalar>
struct TrainResult {
  CrldModel<Scalar> model;
  TrainHistory history;
};

using TrainLogger = std::function<void(const EpochRecord&)>;

namespace detail {

template <typename Scalar>
double dataset_loss(const CrldModel<Scalar>& model, const Dataset& ds, const std::vector<Index>& idx) {
  double total = 0.0;
  constexpr std::size_t chunk = 512;
  for (std::size_t b = 0; b < idx.size(); b += chunk) {
    const std::size_t e = std::min(idx.size(), b + chunk);
    auto [y, x] = gather_batch<Scalar>(ds, idx, b, e);
    total += nn::mse_loss(model.predict(y), x).loss;
  }
  return total;
}

template <typename Scalar>
std::string locate_nonfinite(const CrldModel<Scalar>& model, const typename CrldModel<Scalar>::Gradients& grads) {
  std::string where = "unknown";
  std::size_t i = 0;
  model.for_each_parameter([&](const std::string& name, const VectorX<Scalar>&, bool) {
    if (where == "unknown" && i < grads.params.size() && !grads.params[i].allFinite()) where = name;
    ++i;
  });
  return where;
}

}  // namespace detail

/// Mini-batch backpropagation on J_MSE; the optimizer sees the batch-mean gradient.
/// Returns the best-validation snapshot in eval mode.
template <typename Scalar>
TrainResult<Scalar> train(CrldModel<Scalar> model, const Dataset& ds, const TrainOptions& opts,
                          const TrainLogger& log = {}) {
  opts.validate();
  const CrldHyper& h = model.hyper();
  if (ds.ma != h.ma || ds.mb != h.mb || ds.p != h.p)
    throw ShapeError("train: dataset geometry does not match the model");
  const Index k = ds.size();
  if (k < 2) throw ParameterError("train: at least two examples are needed for a train/validation split");

  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Index(0));
  Rng split_rng(mix_seed(opts.seed, 0xA11));
  std::shuffle(order.begin(), order.end(), split_rng.engine());
  Index n_val = static_cast<Index>(std::llround(opts.val_fraction * static_cast<double>(k)));
  n_val = std::clamp<Index>(n_val, 1, k - 1);
  std::vector<Index> val(order.end() - n_val, order.end());
  std::vector<Index> tr(order.begin(), order.end() - n_val);
  const auto n_tr = static_cast<double>(tr.size());
  const auto n_va = static_cast<double>(val.size());

  TrainResult<Scalar> result;
  TrainHistory& hist = result.history;
  nn::Optimizer<Scalar> optimizer(opts.optimizer);

  model.set_mode(Mode::eval);
  EpochRecord init;
  init.epoch = 0;
  init.train_loss = detail::dataset_loss(model, ds, tr);
  init.val_loss = detail::dataset_loss(model, ds, val);
  init.train_loss_mean = init.train_loss / n_tr;
  init.val_loss_mean = init.val_loss / n_va;
  init.learning_rate = opts.optimizer.learning_rate;
  init.is_best = true;
  hist.epochs.push_back(init);
  if (log) log(init);
  double best = init.val_loss;
  CrldModel<Scalar> best_model = model;
  Index since_best = 0;

  for (Index epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(opts.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(tr.begin(), tr.end(), shuffle_rng.engine());
    model.set_mode(Mode::train);
    double epoch_loss = 0.0;
    Index batch_no = 0;
    for (std::size_t b = 0; b < tr.size(); b += static_cast<std::size_t>(opts.batch_size), ++batch_no) {
      const std::size_t e = std::min(tr.size(), b + static_cast<std::size_t>(opts.batch_size));
      auto [y, x] = gather_batch<Scalar>(ds, tr, b, e);
      typename CrldModel<Scalar>::ForwardCache cache;
      const Tensor<Scalar> out = model.forward(y, &cache);
      auto loss = nn::mse_loss(out, x);
      if (!std::isfinite(loss.loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
      auto grads = model.backward(loss.grad, cache);
      const auto scale = Scalar(1) / static_cast<Scalar>(e - b);
      for (auto& g : grads.params) g *= scale;
      auto slots = model.trainable_slots(grads);
      try {
        optimizer.step(slots);
      } catch (const NumericError&) {
        throw NumericError("train: non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no) + ", parameter block " + detail::locate_nonfinite(model, grads));
      }
      epoch_loss += loss.loss;
    }
    model.set_mode(Mode::eval);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss;
    rec.train_loss_mean = epoch_loss / n_tr;
    rec.val_loss = detail::dataset_loss(model, ds, val);
    rec.val_loss_mean = rec.val_loss / n_va;
    rec.learning_rate = optimizer.config().learning_rate;
    if (!std::isfinite(rec.val_loss))
      throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch));
    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_model = model;
      rec.is_best = true;
      hist.best_epoch = epoch;
      since_best = 0;
      hist.events.push_back("epoch " + std::to_string(epoch) + ": new best validation loss");
    } else {
      ++since_best;
    }
    hist.epochs.push_back(rec);
    hist.stop_epoch = epoch;
    if (log) log(rec);
    if (since_best >= opts.patience) {
      hist.events.push_back("epoch " + std::to_string(epoch) + ": early stop after " + std::to_string(opts.patience) +
                            " epochs without improvement");
      break;
    }
    optimizer.set_learning_rate(optimizer.config().learning_rate * opts.lr_decay);
  }
  if (hist.stop_epoch == opts.max_epochs) hist.events.push_back("reached max_epochs");
  best_model.set_mode(Mode::eval);
  result.model = std::move(best_model);
  return result;
}

/// NMSE of the model on `trials` fresh examples drawn at cfg's operating point.
template <typename Scalar>
NmseEstimate evaluate(const CrldModel<Scalar>& model, const SystemConfig& cfg, Link link, Index trials,
                      std::uint64_t seed) {
  if (model.mode() != Mode::eval) throw StateError("evaluate: model must be in eval mode");
  if (trials < 1) throw ParameterError("evaluate: trials must be at least 1");
  const Dataset ds = generate_dataset(cfg, link, trials, seed);
  if (ds.ma != model.hyper().ma || ds.mb != model.hyper().mb || ds.p != model.hyper().p)
    throw ShapeError("evaluate: operating-point geometry does not match the model");
  std::vector<Index> idx(static_cast<std::size_t>(trials));
  std::iota(idx.begin(), idx.end(), Index(0));
  NmseAccumulator acc;
  constexpr std::size_t chunk = 512;
  const Index w = ds.label_width();
  for (std::size_t b = 0; b < idx.size(); b += chunk) {
    const std::size_t e = std::min(idx.size(), b + chunk);
    auto [y, x] = gather_batch<Scalar>(ds, idx, b, e);
    const Tensor<Scalar> out = model.predict(y);
    for (Index n = 0; n < static_cast<Index>(e - b); ++n) {
      // Ma x Mb estimate reshaped row-major into the M-vector.
      const auto est = out.values().segment(n * w, w).template cast<double>();
      const auto truth = x.values().segment(n * w, w).template cast<double>();
      acc.add((truth - est).squaredNorm(), truth.squaredNorm());
    }
  }
  return acc.result();
}

}  // namespace ambc
