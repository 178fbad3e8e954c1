#include <cmath>
#include <random>

#include <doctest.h>

#include "vdn/error.hpp"
#include "vdn/reparam.hpp"

using namespace vdn::reparam;

namespace {

ResidualBlock random_block(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ResidualBlock b{Matrix(n, n), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    b.bias(i) = g(rng);
    for (Eigen::Index k = 0; k < n; ++k) b.weight(i, k) = g(rng) / std::sqrt(static_cast<double>(n));
  }
  return b;
}

// Uniform in the ball of the given radius.
std::vector<Vector> ball_samples(Eigen::Index n, std::size_t count, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vector> xs;
  for (std::size_t i = 0; i < count; ++i) {
    Vector v(n);
    for (auto& c : v) c = g(rng);
    v *= radius * std::pow(u(rng), 1.0 / static_cast<double>(n)) / v.norm();
    xs.push_back(v);
  }
  return xs;
}

double deviation(const ResidualBlock& block, const ActivationDescriptor& act, double eps,
                 const std::vector<Vector>& xs) {
  return verify_reparam(block, reparam_local_linear(block, act, eps), act, xs).max_abs;
}

}  // namespace

TEST_SUITE("reparam") {

TEST_CASE("local-linear construction matrices") {
  std::mt19937_64 rng(1);
  const auto block = random_block(3, rng);
  const auto act = ActivationDescriptor::sigmoid(0.5);
  const double eps = 1e-3;
  const auto ff = reparam_local_linear(block, act, eps);
  CHECK(ff.w1.rows() == 6);
  CHECK(ff.w1.cols() == 3);
  CHECK(ff.w2.rows() == 3);
  CHECK(ff.w2.cols() == 6);
  CHECK(ff.hidden_width() == 6);
  CHECK(ff.w1.topRows(3).isApprox(eps * Matrix::Identity(3, 3), 0.0));
  CHECK(ff.w1.bottomRows(3) == block.weight);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(ff.b1(i) == 0.5);
    CHECK(ff.b1(3 + i) == block.bias(i));
    CHECK(ff.w2(i, i) == doctest::Approx(1.0 / (eps * act.slope_at_c)).epsilon(1e-15));
    CHECK(ff.w2(i, 3 + i) == 1.0);
    CHECK(ff.b2(i) == doctest::Approx(-act.value_at_c / (eps * act.slope_at_c)).epsilon(1e-15));
  }
}

TEST_CASE("identity block with tanh recovers x as epsilon shrinks") {
  ResidualBlock zero{Matrix::Zero(1, 1), Vector::Zero(1)};
  const auto act = ActivationDescriptor::tanh();
  Vector x(1);
  x << 0.8;
  CHECK(zero(x, act)(0) == 0.8);
  double previous = INFINITY;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const auto ff = reparam_local_linear(zero, act, eps);
    const double err = std::abs(ff(x, act)(0) - 0.8);
    CHECK(err == doctest::Approx(std::abs(std::tanh(eps * 0.8) / eps - 0.8)).epsilon(1e-6));
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("zero derivative and bad epsilon are rejected") {
  ResidualBlock b{Matrix::Identity(2, 2), Vector::Zero(2)};
  ActivationDescriptor flat{"flat", [](double) { return 1.0; }, 0.0, 1.0, 0.0, std::nullopt};
  CHECK_THROWS_AS(reparam_local_linear(b, flat), vdn::Error);
  CHECK_THROWS_AS(reparam_local_linear(b, ActivationDescriptor::tanh(), 0.0), vdn::Error);
  CHECK_THROWS_AS(ActivationDescriptor::by_name("gelu"), vdn::Error);
}

TEST_CASE("tanh at c = 0 converges at second order") {
  // tanh has no quadratic term at 0, so the remainder is about eps^2 |x|^3 / 3.
  std::mt19937_64 rng(2);
  const auto block = random_block(4, rng);
  const auto xs = ball_samples(4, 1000, 1.0, rng);
  const auto act = ActivationDescriptor::tanh();
  const double e1 = deviation(block, act, 1e-3, xs);
  const double e2 = deviation(block, act, 5e-4, xs);
  const double e3 = deviation(block, act, 2.5e-4, xs);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(e1 < 1e-6);
}

TEST_CASE("softplus at c = 0 and tanh off-center converge at first order") {
  std::mt19937_64 rng(3);
  const auto block = random_block(4, rng);
  const auto xs = ball_samples(4, 1000, 1.0, rng);
  for (const auto& act : {ActivationDescriptor::softplus(0.0), ActivationDescriptor::tanh(0.5),
                          ActivationDescriptor::sigmoid(1.0)}) {
    const double e1 = deviation(block, act, 1e-3, xs);
    const double e2 = deviation(block, act, 5e-4, xs);
    const double e3 = deviation(block, act, 2.5e-4, xs);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
    CHECK(e2 / e3 == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("deviation is bounded by K epsilon") {
  // K estimated at two epsilons and validated at a third.
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto block = random_block(4, rng);
    const auto xs = ball_samples(4, 300, 1.0, rng);
    for (const auto& act : {ActivationDescriptor::tanh(), ActivationDescriptor::softplus()}) {
      const double k = std::max(deviation(block, act, 1e-2, xs) / 1e-2, deviation(block, act, 5e-3, xs) / 5e-3);
      const double third = deviation(block, act, 1e-3, xs);
      CHECK(third <= 2.0 * k * 1e-3);
    }
  }
}

TEST_CASE("default epsilon stays below 1e-3 for tanh on the unit ball") {
  std::mt19937_64 rng(5);
  const auto block = random_block(4, rng);
  const auto xs = ball_samples(4, 1000, 1.0, rng);
  CHECK(deviation(block, ActivationDescriptor::tanh(), 1e-4, xs) < 1e-3);
}

TEST_CASE("tanh remainder grows with the cube of the radius") {
  std::mt19937_64 rng(6);
  const auto block = random_block(4, rng);
  const auto act = ActivationDescriptor::tanh();
  // Same directions, scaled radii.
  const auto unit = ball_samples(4, 500, 1.0, rng);
  auto scaled = [&](double r) {
    std::vector<Vector> out;
    for (const auto& x : unit) out.push_back(r * x);
    return out;
  };
  const double a = deviation(block, act, 1e-2, scaled(1.0));
  const double b = deviation(block, act, 1e-2, scaled(2.0));
  CHECK(b / a == doctest::Approx(8.0).epsilon(0.05));
  const auto soft = ActivationDescriptor::softplus();
  const double sa = deviation(block, soft, 1e-3, scaled(1.0));
  const double sb = deviation(block, soft, 1e-3, scaled(2.0));
  CHECK(sb / sa == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("relu shift construction is exact on its domain") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 5.0);
  const auto relu = ActivationDescriptor::relu();
  const auto block = random_block(4, rng);
  const auto ff = reparam_relu(block, -2.0);
  CHECK(ff.hidden_width() == 8);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(ff.b1(i) == 2.0);
    CHECK(ff.b2(i) == -2.0);
  }
  std::vector<Vector> xs;
  for (int i = 0; i < 10000; ++i) {
    Vector x(4);
    for (auto& c : x) c = u(rng);
    xs.push_back(x);
  }
  CHECK(verify_reparam(block, ff, relu, xs).max_abs <= 1e-12);
}

TEST_CASE("relu construction with non-negative inputs needs no shift") {
  std::mt19937_64 rng(8);
  const auto block = random_block(3, rng);
  const auto ff = reparam_relu(block, 0.0);
  CHECK(ff.b1.head(3).isZero(0.0));
  CHECK(ff.b2.isZero(0.0));
  const auto relu = ActivationDescriptor::relu();
  Vector x(3);
  x << 0.0, 1.5, 3.0;
  CHECK((ff(x, relu) - block(x, relu)).cwiseAbs().maxCoeff() == 0.0);
  // Positive lower bounds also give a zero shift.
  CHECK(reparam_relu(block, 1.0).b2.isZero(0.0));
}

TEST_CASE("out-of-domain input is reported with a witness") {
  std::mt19937_64 rng(9);
  const auto block = random_block(3, rng);
  const auto ff = reparam_relu(block, -1.0);
  const auto relu = ActivationDescriptor::relu();
  Vector good = Vector::Constant(3, 0.5), bad = Vector::Constant(3, -4.0);
  std::vector<Vector> xs{good, bad, good};
  const auto dev = verify_reparam(block, ff, relu, xs);
  CHECK(dev.max_abs > 1.0);
  CHECK(dev.argmax == 1);
  CHECK(dev.witness == bad);
}

TEST_CASE("mismatched construction shows a large deviation") {
  std::mt19937_64 rng(10);
  const auto a = random_block(4, rng);
  const auto b = random_block(4, rng);
  const auto act = ActivationDescriptor::tanh();
  const auto xs = ball_samples(4, 100, 1.0, rng);
  CHECK(verify_reparam(a, reparam_local_linear(b, act), act, xs).max_abs > 1e-2);
  CHECK_THROWS_AS(verify_reparam(a, reparam_local_linear(a, act), act, {}), vdn::Error);
}

TEST_CASE("witness for the zero matrix") {
  const Matrix w = Matrix::Zero(3, 3);
  const Vector b = Vector::Constant(3, 0.7);
  const auto wit = noninjectivity_witness(w, b);
  CHECK(wit.kind == WitnessCase::singular);
  CHECK((wit.x1 - wit.x2).norm() > 1e-8);
  CHECK(relu_layer(w, b, wit.x1) == relu_layer(w, b, wit.x2));
}

TEST_CASE("witness for the identity") {
  const Matrix w = Matrix::Identity(4, 4);
  const Vector b = Vector::Zero(4);
  const auto wit = noninjectivity_witness(w, b);
  CHECK(wit.kind == WitnessCase::invertible);
  CHECK(wit.x1 == Vector::Constant(4, -1.0));
  CHECK(wit.x2 == Vector::Constant(4, -2.0));
  CHECK(relu_layer(w, b, wit.x1).isZero(0.0));
}

TEST_CASE("witness for random invertible and rank-deficient matrices") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix w(4, 4);
    Vector b(4);
    for (auto& v : w.reshaped()) v = g(rng);
    for (auto& v : b) v = g(rng);
    if (trial % 2 == 1) w.col(3) = w.col(0) - 2.0 * w.col(1);
    const auto wit = noninjectivity_witness(w, b);
    CHECK(wit.kind == (trial % 2 == 1 ? WitnessCase::singular : WitnessCase::invertible));
    CHECK((wit.x1 - wit.x2).norm() > 1e-8);
    CHECK(relu_layer(w, b, wit.x1) == relu_layer(w, b, wit.x2));
  }
  CHECK_THROWS_AS(noninjectivity_witness(Matrix::Zero(2, 3), Vector::Zero(2)), vdn::ShapeError);
}

}  // TEST_SUITE
