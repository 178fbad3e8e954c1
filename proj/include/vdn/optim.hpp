#pragma once

#include <span>
#include <vector>

#include "vdn/tensor.hpp"

namespace vdn {

/// Piecewise-constant learning rate: base · γ^(number of milestones <= epoch).
/// Epochs are counted from 0.
struct MultiStepSchedule {
  double base_lr = 0.1;
  std::vector<int> milestones;
  double gamma = 0.1;

  double lr_at(int epoch) const;
};

struct SgdConfig {
  MultiStepSchedule schedule;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  /// When positive, the gradient over all non-frozen elements is rescaled to
  /// at most this L2 norm before the update. 0 disables clipping.
  double clip_norm = 0.0;
};

/// SGD with heavy-ball momentum:
///   v <- momentum·v + grad + weight_decay·param
///   param <- param - lr(epoch)·v
/// Clipping, when enabled, scales the raw gradient first.
/// Weight decay only touches parameters with `weight_decay` set. Frozen
/// elements keep their value and a zero velocity.
class Sgd {
 public:
  explicit Sgd(SgdConfig config) : config_(std::move(config)) {}

  /// `params` must be passed in the same order on every call.
  void step(std::span<Parameter* const> params, int epoch);

  const SgdConfig& config() const noexcept { return config_; }
  const std::vector<std::vector<double>>& velocity() const noexcept { return velocity_; }

 private:
  SgdConfig config_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace vdn
