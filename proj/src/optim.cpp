#include "vdn/optim.hpp"

#include <cmath>

#include "vdn/error.hpp"

namespace vdn {

double MultiStepSchedule::lr_at(int epoch) const {
  double lr = base_lr;
  for (int m : milestones)
    if (m <= epoch) lr *= gamma;
  return lr;
}

void Sgd::step(std::span<Parameter* const> params, int epoch) {
  if (velocity_.empty()) {
    velocity_.reserve(params.size());
    for (const Parameter* p : params) velocity_.emplace_back(p->tensor.size(), 0.0);
  }
  if (velocity_.size() != params.size())
    throw Error("Sgd::step: parameter list changed between steps");
  const double lr = config_.schedule.lr_at(epoch);
  double scale = 1.0;
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const Parameter* p : params) {
      if (!p->tensor.has_grad()) continue;
      const auto& g = p->tensor.grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!p->is_frozen(i)) sq += g[i] * g[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto& v = velocity_[k];
    if (v.size() != p.tensor.size()) throw Error("Sgd::step: parameter shape changed between steps");
    if (!p.tensor.has_grad()) continue;
    const auto& g = p.tensor.grad();
    const double wd = p.weight_decay ? config_.weight_decay : 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (p.is_frozen(i)) {
        v[i] = 0.0;
        continue;
      }
      v[i] = config_.momentum * v[i] + scale * g[i] + wd * p.tensor[i];
      p.tensor[i] -= lr * v[i];
    }
  }
}

}  // namespace vdn
