#pragma once

// Residual-to-feedforward block constructions.
//
// A residual block computes R(x) = φ(W̄x + b̄) + x. Both constructions below
// build F(x) = W2·φ(W1·x + b1) + b2 with hidden width 2n: the upper half of
// the hidden layer carries x through φ in a region where φ acts linearly,
// the lower half reproduces φ(W̄x + b̄).

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vdn::reparam {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ActivationDescriptor {
  std::string name;
  std::function<double(double)> fn;
  /// Point where φ is differentiable, with φ(c) and φ'(c).
  double c = 0.0;
  double value_at_c = 0.0;
  double slope_at_c = 1.0;
  /// Lower bound used by the ReLU shift construction, when known.
  std::optional<double> lower_bound;

  double operator()(double x) const { return fn(x); }

  static ActivationDescriptor tanh(double c = 0.0);
  static ActivationDescriptor sigmoid(double c = 0.0);
  static ActivationDescriptor softplus(double c = 0.0);
  static ActivationDescriptor relu();
  static ActivationDescriptor by_name(const std::string& name, double c = 0.0);
};

struct ResidualBlock {
  Matrix weight;  // n×n
  Vector bias;    // n

  std::size_t width() const { return static_cast<std::size_t>(bias.size()); }
  Vector operator()(const Vector& x, const ActivationDescriptor& act) const;
};

struct FeedforwardBlock {
  Matrix w1;  // 2n×n
  Vector b1;  // 2n
  Matrix w2;  // n×2n
  Vector b2;  // n

  std::size_t hidden_width() const { return static_cast<std::size_t>(b1.size()); }
  Vector operator()(const Vector& x, const ActivationDescriptor& act) const;
};

/// Shrink-and-shift construction: W1 = [εI; W̄], b1 = [c·1; b̄],
/// W2 = [I/(ε·φ'(c)), I], b2 = -φ(c)/(ε·φ'(c))·1. The error against R is of
/// order ε·|x|² (higher when φ''(c) vanishes). Throws when φ'(c) == 0 or
/// ε <= 0.
FeedforwardBlock reparam_local_linear(const ResidualBlock& block, const ActivationDescriptor& act,
                                      double epsilon = 1e-4);

/// Exact construction for ReLU: W1 = [I; W̄], W2 = [I, I], with the identity
/// half shifted by s = max(0, -lower_bound) and shifted back by b2 = -s·1.
/// F == R whenever every input coordinate is >= lower_bound.
FeedforwardBlock reparam_relu(const ResidualBlock& block, double lower_bound);

struct Deviation {
  double max_abs = 0.0;  // max over samples of |F(x) - R(x)|_inf
  std::size_t argmax = 0;
  Vector witness;
};

Deviation verify_reparam(const ResidualBlock& block, const FeedforwardBlock& ff,
                         const ActivationDescriptor& act, std::span<const Vector> samples);

enum class WitnessCase { singular, invertible };

struct NoninjectivityWitness {
  Vector x1;
  Vector x2;
  WitnessCase kind = WitnessCase::invertible;
  double condition = 0.0;
};

inline constexpr double kSingularCondition = 1e12;

/// Two distinct inputs that x -> ReLU(Wx + b) maps to bit-identical outputs.
/// W with condition number above kSingularCondition is treated as singular
/// and the pair differs by a null-space direction; otherwise both inputs are
/// pulled back from the negative orthant. Throws if the pair cannot be
/// verified.
NoninjectivityWitness noninjectivity_witness(const Matrix& w, const Vector& b);

/// ReLU(Wx + b).
Vector relu_layer(const Matrix& w, const Vector& b, const Vector& x);

}  // namespace vdn::reparam
