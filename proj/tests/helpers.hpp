#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "vdn/tensor.hpp"

namespace vdn::test {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

/// Values with |v| in [gap, 1], random sign: keeps kinks out of reach of a
/// finite-difference step.
inline Tensor away_from_zero(Shape shape, std::mt19937_64& rng, double gap = 0.05) {
  std::uniform_real_distribution<double> u(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

inline Parameter param(Tensor t) {
  Parameter p;
  p.tensor = std::move(t);
  return p;
}

}  // namespace vdn::test
