#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ambc/errors.hpp"
#include "ambc/types.hpp"

namespace ambc::nn {

enum class OptimizerKind { adam, sgd_momentum };

const char* to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// A trainable parameter and its gradient, both flat.
template <typename Scalar>
struct ParamSlot {
  std::string name;
  VectorX<Scalar>* value = nullptr;
  const VectorX<Scalar>* grad = nullptr;
};

template <typename Scalar>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  const OptimizerConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  long steps() const { return step_; }

  /// Applies one update to every slot. All gradients are validated before any
  /// parameter is touched.
  void step(std::span<const ParamSlot<Scalar>> slots) {
    if (first_.empty()) {
      for (const auto& s : slots) {
        first_.push_back(VectorX<Scalar>::Zero(s.value->size()));
        second_.push_back(VectorX<Scalar>::Zero(s.value->size()));
      }
    }
    if (first_.size() != slots.size()) throw ShapeError("optimizer: parameter set changed between steps");
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& s = slots[i];
      if (s.grad->size() != s.value->size() || first_[i].size() != s.value->size())
        throw ShapeError("optimizer: gradient shape mismatch for " + s.name);
      if (!s.grad->allFinite()) throw NumericError("optimizer: non-finite gradient in parameter " + s.name);
    }
    ++step_;
    const auto lr = static_cast<Scalar>(config_.learning_rate);
    if (config_.kind == OptimizerKind::sgd_momentum) {
      const auto mu = static_cast<Scalar>(config_.momentum);
      for (std::size_t i = 0; i < slots.size(); ++i) {
        first_[i] = mu * first_[i] - lr * *slots[i].grad;
        *slots[i].value += first_[i];
      }
      return;
    }
    const auto b1 = static_cast<Scalar>(config_.beta1);
    const auto b2 = static_cast<Scalar>(config_.beta2);
    const auto eps = static_cast<Scalar>(config_.eps);
    const auto t = static_cast<double>(step_);
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(config_.beta1, t));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(config_.beta2, t));
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& g = *slots[i].grad;
      first_[i] = b1 * first_[i] + (Scalar(1) - b1) * g;
      second_[i] = b2 * second_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
      slots[i].value->array() -=
          lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + eps);
    }
  }

 private:
  OptimizerConfig config_;
  std::vector<VectorX<Scalar>> first_;
  std::vector<VectorX<Scalar>> second_;
  long step_ = 0;
};

inline const char* to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd_momentum"; }

inline OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::sgd_momentum;
  throw ParameterError("unknown optimizer '" + name + "' (expected adam or sgd_momentum)");
}

}  // namespace ambc::nn
