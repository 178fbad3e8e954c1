#include "vdn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vdn/error.hpp"
#include "vdn/pathmetrics.hpp"

namespace vdn {

double slope_penalty(const Network& net) {
  double total = 0.0;
  for (const auto& l : net.layers())
    for (std::size_t i = 0; i < l.slopes.tensor.size(); ++i)
      if (!l.slopes.is_frozen(i)) total += std::sqrt(std::abs(1.0 - l.slopes.tensor[i]));
  return total;
}

namespace {

std::size_t argmax_row(const Tensor& t, std::size_t r) {
  const std::size_t c = t.cols();
  const double* row = t.data() + r * c;
  return static_cast<std::size_t>(std::max_element(row, row + c) - row);
}

std::size_t frozen_slopes(const Network& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers()) n += l.slopes.frozen_count();
  return n;
}

}  // namespace

double accuracy(const Network& net, const Dataset& data, std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  constexpr std::size_t chunk = 1024;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < idx.size(); start += chunk) {
    const auto part = idx.subspan(start, std::min(chunk, idx.size() - start));
    const Tensor out = forward(net, data.rows(part));
    for (std::size_t r = 0; r < part.size(); ++r)
      if (argmax_row(out, r) == data.labels[part[r]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

std::vector<EpochTrace> train(Network& net, const Dataset& data, const TrainOptions& options) {
  if (data.train.empty()) throw SpecError("train: dataset has no training samples");
  if (options.batch_size == 0) throw SpecError("train: batch size must be positive");
  Sgd sgd(options.optim);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order = data.train;
  const auto params = net.parameters();
  std::vector<EpochTrace> trace;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0, correct = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(options.batch_size, order.size() - start));
      for (Parameter* p : params) p->tensor.zero_grad();
      Tape tape;
      const std::vector<std::size_t> labels = data.labels_of(idx);
      Var logits = forward(tape, net, tape.constant(data.rows(idx)));
      Var loss;
      try {
        loss = cross_entropy(logits, labels);
      } catch (const NumericError& e) {
        throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
      }
      const double task = loss.value()[0];
      if (!std::isfinite(task))
        throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": loss is " +
                           std::to_string(task));
      for (std::size_t r = 0; r < idx.size(); ++r)
        if (argmax_row(logits.value(), r) == labels[r]) ++correct;
      Var objective = loss;
      if (options.omega != 0.0) {
        for (auto& layer : net.layers()) {
          if (layer.slopes.empty()) continue;
          Var pen = l05_penalty(tape.parameter(layer.slopes), layer.slopes.frozen);
          objective = add(objective, scale(pen, options.omega));
        }
      }
      tape.backward(objective);
      sgd.step(params, epoch);
      if (options.after_step) options.after_step(net);
      loss_sum += task;
      ++batches;
    }
    EpochTrace t;
    t.epoch = epoch;
    t.lr = options.optim.schedule.lr_at(epoch);
    t.loss = loss_sum / static_cast<double>(batches);
    t.regularizer = slope_penalty(net);
    t.napl = napl(net);
    t.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    t.test_accuracy = accuracy(net, data, data.test);
    t.frozen = frozen_slopes(net);
    trace.push_back(t);
  }
  return trace;
}

}  // namespace vdn
