#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vdn/dataset.hpp"
#include "vdn/network.hpp"
#include "vdn/optim.hpp"

namespace vdn {

struct TrainOptions {
  SgdConfig optim;
  int epochs = 1;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  /// Weight of the L0.5 slope penalty; 0 leaves it out of the objective.
  double omega = 0.0;
  /// Runs after every optimizer step.
  std::function<void(Network&)> after_step;
};

struct EpochTrace {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;         // mean task loss over the epoch's batches
  double regularizer = 0.0;  // L0.5 value at the end of the epoch
  double napl = 0.0;
  double train_accuracy = 0.0;  // running accuracy over the epoch's batches
  double test_accuracy = 0.0;
  std::size_t frozen = 0;
};

/// Sum of |1 - slope|^0.5 over all non-frozen slopes of the network.
double slope_penalty(const Network& net);

double accuracy(const Network& net, const Dataset& data, std::span<const std::size_t> idx);

/// Minibatch SGD on cross-entropy (+ omega·L0.5). Deterministic in the seed.
/// Throws NumericError naming the epoch when the loss stops being finite.
std::vector<EpochTrace> train(Network& net, const Dataset& data, const TrainOptions& options);

}  // namespace vdn
