#include "vdn/reparam.hpp"

#include <cmath>
#include <limits>

#include "vdn/error.hpp"

namespace vdn::reparam {

ActivationDescriptor ActivationDescriptor::tanh(double c) {
  const double t = std::tanh(c);
  return {"tanh", [](double x) { return std::tanh(x); }, c, t, 1.0 - t * t, std::nullopt};
}

ActivationDescriptor ActivationDescriptor::sigmoid(double c) {
  auto s = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return {"sigmoid", s, c, s(c), s(c) * (1.0 - s(c)), std::nullopt};
}

ActivationDescriptor ActivationDescriptor::softplus(double c) {
  auto sp = [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
  return {"softplus", sp, c, sp(c), 1.0 / (1.0 + std::exp(-c)), std::nullopt};
}

ActivationDescriptor ActivationDescriptor::relu() {
  // Differentiable at any c > 0; the shift construction does not use c.
  return {"relu", [](double x) { return x > 0.0 ? x : 0.0; }, 1.0, 1.0, 1.0, 0.0};
}

ActivationDescriptor ActivationDescriptor::by_name(const std::string& name, double c) {
  if (name == "tanh") return tanh(c);
  if (name == "sigmoid") return sigmoid(c);
  if (name == "softplus") return softplus(c);
  if (name == "relu") return relu();
  throw Error("unknown activation '" + name + "'");
}

Vector ResidualBlock::operator()(const Vector& x, const ActivationDescriptor& act) const {
  Vector z = weight * x + bias;
  return z.unaryExpr([&](double v) { return act(v); }) + x;
}

Vector FeedforwardBlock::operator()(const Vector& x, const ActivationDescriptor& act) const {
  Vector h = (w1 * x + b1).unaryExpr([&](double v) { return act(v); });
  return w2 * h + b2;
}

static void check_block(const ResidualBlock& block) {
  if (block.weight.rows() != block.weight.cols() || block.weight.rows() != block.bias.size())
    throw ShapeError("residual block needs a square weight matching the bias length");
}

FeedforwardBlock reparam_local_linear(const ResidualBlock& block, const ActivationDescriptor& act,
                                      double epsilon) {
  check_block(block);
  if (!(epsilon > 0.0)) throw Error("reparam_local_linear: epsilon must be positive");
  if (act.slope_at_c == 0.0)
    throw Error("reparam_local_linear: " + act.name + " has zero derivative at c; cannot unshrink");
  const auto n = block.weight.rows();
  const Matrix I = Matrix::Identity(n, n);
  const double unshrink = 1.0 / (epsilon * act.slope_at_c);
  FeedforwardBlock ff;
  ff.w1.resize(2 * n, n);
  ff.w1 << epsilon * I, block.weight;
  ff.b1.resize(2 * n);
  ff.b1 << Vector::Constant(n, act.c), block.bias;
  ff.w2.resize(n, 2 * n);
  ff.w2 << unshrink * I, I;
  ff.b2 = Vector::Constant(n, -act.value_at_c * unshrink);
  return ff;
}

FeedforwardBlock reparam_relu(const ResidualBlock& block, double lower_bound) {
  check_block(block);
  const auto n = block.weight.rows();
  const Matrix I = Matrix::Identity(n, n);
  const double shift = std::max(0.0, -lower_bound);
  FeedforwardBlock ff;
  ff.w1.resize(2 * n, n);
  ff.w1 << I, block.weight;
  ff.b1.resize(2 * n);
  ff.b1 << Vector::Constant(n, shift), block.bias;
  ff.w2.resize(n, 2 * n);
  ff.w2 << I, I;
  ff.b2 = Vector::Constant(n, -shift);
  return ff;
}

Deviation verify_reparam(const ResidualBlock& block, const FeedforwardBlock& ff,
                         const ActivationDescriptor& act, std::span<const Vector> samples) {
  if (samples.empty()) throw Error("verify_reparam: no samples");
  Deviation d;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double dev = (ff(samples[i], act) - block(samples[i], act)).lpNorm<Eigen::Infinity>();
    if (i == 0 || dev > d.max_abs) {
      d.max_abs = dev;
      d.argmax = i;
    }
  }
  d.witness = samples[d.argmax];
  return d;
}

Vector relu_layer(const Matrix& w, const Vector& b, const Vector& x) {
  return (w * x + b).cwiseMax(0.0);
}

namespace {

bool verified(const Matrix& w, const Vector& b, const Vector& x1, const Vector& x2) {
  return (x1 - x2).norm() > 1e-8 && relu_layer(w, b, x1) == relu_layer(w, b, x2);
}

}  // namespace

NoninjectivityWitness noninjectivity_witness(const Matrix& w, const Vector& b) {
  const auto n = w.rows();
  if (n < 1 || w.cols() != n || b.size() != n)
    throw ShapeError("noninjectivity_witness: need square W and matching b");
  Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smin = s(n - 1);
  const double cond = smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();

  NoninjectivityWitness out;
  out.condition = cond;
  if (cond > kSingularCondition) {
    out.kind = WitnessCase::singular;
    const Vector null = svd.matrixV().col(n - 1);
    // Base points: one pulled toward the negative orthant where possible, and
    // the origin. A short step along the null direction leaves the image
    // unchanged to working precision.
    std::vector<Vector> bases;
    bases.push_back(svd.solve(Vector(-Vector::Ones(n) - b)));
    bases.push_back(Vector::Zero(n));
    for (const Vector& x1 : bases) {
      for (double t = 1.0; t >= 1e-6; t *= 0.5) {
        const Vector x2 = x1 + t * null;
        if (verified(w, b, x1, x2)) {
          out.x1 = x1;
          out.x2 = x2;
          return out;
        }
      }
    }
    throw Error("noninjectivity_witness: could not verify a null-space pair");
  }
  out.kind = WitnessCase::invertible;
  const auto lu = w.partialPivLu();
  out.x1 = lu.solve(Vector(-Vector::Ones(n) - b));
  out.x2 = lu.solve(Vector(-2.0 * Vector::Ones(n) - b));
  if (!verified(w, b, out.x1, out.x2))
    throw Error("noninjectivity_witness: negative-orthant pair failed verification");
  return out;
}

}  // namespace vdn::reparam
