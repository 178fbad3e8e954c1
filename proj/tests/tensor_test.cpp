#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>

#include "helpers.hpp"
#include "vdn/autodiff.hpp"
#include "vdn/error.hpp"
#include "vdn/optim.hpp"

using namespace vdn;
using vdn::test::away_from_zero;
using vdn::test::param;
using vdn::test::random_tensor;

TEST_SUITE("tensor") {

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t(1, 2) == 1.5);
  CHECK_FALSE(t.has_grad());
  CHECK(t.grad().size() == 6);
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST_CASE("matmul values") {
  Tape tape;
  auto eye = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  auto m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(tape.value(matmul(eye, tape.constant(m))) == m);

  auto row = tape.constant(Tensor::matrix(1, 2, {1, 2}));
  auto col = tape.constant(Tensor::matrix(2, 1, {3, 4}));
  CHECK(tape.value(matmul(row, col))[0] == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape tape;
  auto a = tape.constant(Tensor({2, 3}));
  auto b = tape.constant(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum(A*B) matches finite differences") {
  std::mt19937_64 rng(7);
  auto A = param(random_tensor({3, 3}, rng));
  const auto B = random_tensor({3, 3}, rng);
  const double err = grad_check([&](Tape& t) { return sum(matmul(t.parameter(A), t.constant(B))); }, A);
  CHECK(err < 1e-6);
  // d sum(AB) / dA_ik = sum_j B_kj
  Tape tape;
  A.tensor.zero_grad();
  tape.backward(sum(matmul(tape.parameter(A), tape.constant(B))));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(A.tensor.grad()[i * 3 + k] == doctest::Approx(B(k, 0) + B(k, 1) + B(k, 2)).epsilon(1e-14));
}

TEST_CASE("prelu forward and slope gradient") {
  Tape tape;
  auto slope = param(Tensor::vector({0.5}));
  const std::vector<std::size_t> map{0};
  auto y = prelu(tape.constant(Tensor::matrix(1, 1, {-2})), tape.parameter(slope), map);
  CHECK(tape.value(y)[0] == -1.0);
  tape.backward(sum(y));
  CHECK(slope.tensor.grad()[0] == -2.0);

  Tape t2;
  auto pos = prelu(t2.constant(Tensor::matrix(1, 1, {3})), t2.constant(Tensor::vector({0.7})), map);
  CHECK(t2.value(pos)[0] == 3.0);
}

TEST_CASE("prelu at exactly zero takes the identity branch") {
  Tape tape;
  auto slope = param(Tensor::vector({0.3}));
  auto x = param(Tensor::matrix(1, 1, {0.0}));
  const std::vector<std::size_t> map{0};
  auto y = prelu(tape.parameter(x), tape.parameter(slope), map);
  tape.backward(sum(y));
  CHECK(x.tensor.grad()[0] == 1.0);
  CHECK(slope.tensor.grad()[0] == 0.0);
}

TEST_CASE("prelu rejects out-of-range unit map") {
  Tape tape;
  const std::vector<std::size_t> map{0, 2};
  CHECK_THROWS_AS(prelu(tape.constant(Tensor({1, 2})), tape.constant(Tensor::vector({0.1, 0.2})), map),
                  ShapeError);
}

TEST_CASE("layer and channel unit maps") {
  std::mt19937_64 rng(11);
  const auto x = away_from_zero({4, 3}, rng);
  auto channel = param(Tensor::vector({0.1, 0.5, 0.9}));
  auto layer = param(Tensor::vector({0.25}));
  const std::vector<std::size_t> cmap{0, 1, 2}, lmap{0, 0, 0};
  CHECK(grad_check([&](Tape& t) { return sum(prelu(t.constant(x), t.parameter(channel), cmap)); },
                   channel) < 1e-8);
  CHECK(grad_check([&](Tape& t) { return sum(prelu(t.constant(x), t.parameter(layer), lmap)); }, layer) <
        1e-8);
}

TEST_CASE("l05 penalty values") {
  Tape tape;
  const std::vector<std::uint8_t> none2(2, 0), none1(1, 0);
  CHECK(tape.value(l05_penalty(tape.constant(Tensor::vector({1, 1})), none2))[0] == 0.0);
  CHECK(tape.value(l05_penalty(tape.constant(Tensor::vector({0.75})), none1))[0] == 0.5);
  CHECK(tape.value(l05_penalty(tape.constant(Tensor::vector({0, 0.75})), none2))[0] == 1.5);
}

TEST_CASE("l05 penalty ignores frozen slopes") {
  auto s = param(Tensor::vector({0.0, 1.0, 0.75}));
  const std::vector<std::uint8_t> frozen{1, 1, 0};
  Tape tape;
  auto pen = l05_penalty(tape.parameter(s), frozen);
  CHECK(tape.value(pen)[0] == 0.5);
  tape.backward(pen);
  CHECK(s.tensor.grad()[0] == 0.0);
  CHECK(s.tensor.grad()[1] == 0.0);
  CHECK(s.tensor.grad()[2] != 0.0);
}

TEST_CASE("l05 penalty gradient and clamp") {
  auto s = param(Tensor::vector({0.5}));
  const std::vector<std::uint8_t> none(1, 0);
  CHECK(grad_check([&](Tape& t) { return l05_penalty(t.parameter(s), none); }, s) < 1e-4);

  // Below the guard the magnitude is evaluated at the guard: 0.5 / sqrt(1e-4) = 50.
  for (double alpha : {1.0 - 1e-6, 1.0 + 1e-6}) {
    auto near = param(Tensor::vector({alpha}));
    Tape tape;
    tape.backward(l05_penalty(tape.parameter(near), none));
    CHECK(std::abs(near.tensor.grad()[0]) == doctest::Approx(50.0).epsilon(1e-12));
    CHECK((alpha < 1.0 ? near.tensor.grad()[0] < 0.0 : near.tensor.grad()[0] > 0.0));
  }
  auto exact = param(Tensor::vector({1.0}));
  Tape tape;
  tape.backward(l05_penalty(tape.parameter(exact), none));
  CHECK(exact.tensor.grad()[0] == 0.0);
}

double cross_entropy_oracle(const Tensor& logits, const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double denom = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) denom += std::exp(logits(r, c));
    total += -std::log(std::exp(logits(r, labels[r])) / denom);
  }
  return total / static_cast<double>(logits.rows());
}

TEST_CASE("cross entropy of uniform logits is ln C") {
  for (std::size_t c = 2; c <= 10; ++c) {
    Tape tape;
    std::vector<std::size_t> labels{0, c - 1};
    auto loss = cross_entropy(tape.constant(Tensor({2, c}, 0.3)), labels);
    CHECK(std::abs(tape.value(loss)[0] - std::log(static_cast<double>(c))) < 1e-12);
  }
}

TEST_CASE("cross entropy decreases with the correct-class margin") {
  double previous = INFINITY;
  for (double margin = 0.0; margin <= 10.0; margin += 0.5) {
    Tape tape;
    std::vector<std::size_t> labels{1};
    auto loss = cross_entropy(tape.constant(Tensor::matrix(1, 3, {0.0, margin, 0.0})), labels);
    const double v = tape.value(loss)[0];
    CHECK(v < previous);
    previous = v;
  }
}

TEST_CASE("cross entropy matches direct summation") {
  std::mt19937_64 rng(3);
  const auto logits = random_tensor({4, 3}, rng, -3.0, 3.0);
  const std::vector<std::size_t> labels{0, 2, 1, 2};
  Tape tape;
  auto loss = cross_entropy(tape.constant(logits), labels);
  CHECK(std::abs(tape.value(loss)[0] - cross_entropy_oracle(logits, labels)) < 1e-10);

  auto p = param(logits);
  CHECK(grad_check([&](Tape& t) { return cross_entropy(t.parameter(p), labels); }, p) < 1e-6);
}

TEST_CASE("cross entropy is stable for large logits and rejects non-finite ones") {
  Tape tape;
  std::vector<std::size_t> labels{0};
  auto loss = cross_entropy(tape.constant(Tensor::matrix(1, 2, {1000.0, 0.0})), labels);
  CHECK(std::isfinite(tape.value(loss)[0]));
  CHECK_THROWS_AS(cross_entropy(tape.constant(Tensor::matrix(1, 2, {NAN, 0.0})), labels), NumericError);
  std::vector<std::size_t> bad{5};
  CHECK_THROWS_AS(cross_entropy(tape.constant(Tensor::matrix(1, 2, {0.0, 0.0})), bad), ShapeError);
}

TEST_CASE("backward of sum gives ones") {
  auto x = param(Tensor({2, 3}, 4.0));
  Tape tape;
  tape.backward(sum(tape.parameter(x)));
  for (double g : x.tensor.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward rejects non-scalar loss") {
  Tape tape;
  auto x = tape.constant(Tensor({2, 2}));
  CHECK_THROWS_AS(tape.backward(x), ShapeError);
}

TEST_CASE("a parameter used twice receives the summed gradient") {
  auto x = param(Tensor::matrix(1, 2, {1.0, -2.0}));
  Tape tape;
  auto v = tape.parameter(x);
  tape.backward(sum(add(scale(v, 3.0), scale(v, 4.0))));
  CHECK(x.tensor.grad()[0] == 7.0);
  CHECK(x.tensor.grad()[1] == 7.0);
}

TEST_CASE("repeated backward accumulates until reset") {
  auto x = param(Tensor::matrix(1, 1, {2.0}));
  for (int i = 0; i < 3; ++i) {
    Tape tape;
    tape.backward(sum(scale(tape.parameter(x), 2.0)));
  }
  CHECK(x.tensor.grad()[0] == 6.0);
  x.tensor.zero_grad();
  CHECK(x.tensor.grad()[0] == 0.0);
}

TEST_CASE("grad_check on a linear graph is at rounding level") {
  std::mt19937_64 rng(5);
  auto w = param(random_tensor({3, 2}, rng));
  const auto x = random_tensor({4, 3}, rng);
  const auto b = random_tensor({2}, rng);
  const double err =
      grad_check([&](Tape& t) { return sum(add_bias(matmul(t.constant(x), t.parameter(w)), t.constant(b))); }, w);
  CHECK(err < 1e-9);
}

TEST_CASE("mul_channel and add_bias gradients") {
  std::mt19937_64 rng(9);
  const auto x = random_tensor({5, 4}, rng);
  auto gain = param(random_tensor({4}, rng));
  auto bias = param(random_tensor({4}, rng));
  const std::vector<std::size_t> labels{0, 1, 2, 3, 0};
  CHECK(grad_check([&](Tape& t) { return cross_entropy(mul_channel(t.constant(x), t.parameter(gain)), labels); },
                   gain) < 1e-6);
  CHECK(grad_check([&](Tape& t) { return cross_entropy(add_bias(t.constant(x), t.parameter(bias)), labels); },
                   bias) < 1e-6);
}

TEST_CASE("composite matmul, prelu and loss gradient") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = away_from_zero({6, 3}, rng, 0.2);
    // Diagonal-dominant weight keeps the pre-activations away from zero.
    auto w = param(Tensor::matrix(3, 3, {1.0, 0.01, 0.0, 0.0, 1.0, 0.01, 0.01, 0.0, 1.0}));
    auto s = param(Tensor::vector({0.2, 0.6, -0.3}));
    const std::vector<std::size_t> map{0, 1, 2};
    const std::vector<std::size_t> labels{0, 1, 2, 0, 1, 2};
    auto build = [&](Tape& t) {
      return cross_entropy(prelu(matmul(t.constant(x), t.parameter(w)), t.parameter(s), map), labels);
    };
    CHECK(grad_check(build, w) < 1e-5);
    CHECK(grad_check(build, s) < 1e-5);
  }
}

TEST_CASE("tape records in topological order") {
  Tape tape;
  auto a = tape.constant(Tensor::matrix(1, 1, {1.0}));
  auto b = scale(a, 2.0);
  auto c = add(a, b);
  auto d = sum(c);
  for (auto v : {b, c, d})
    for (std::size_t in : tape.inputs(v)) CHECK(in < v.id());
  CHECK(tape.kind(d) == OpKind::sum);
}

TEST_CASE("sgd plain step") {
  auto p = param(Tensor::vector({1.0}));
  p.tensor.grad()[0] = 1.0;
  Sgd opt(SgdConfig{MultiStepSchedule{0.1, {}, 0.1}, 0.0, 0.0});
  std::vector<Parameter*> ps{&p};
  opt.step(ps, 0);
  CHECK(p.tensor[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("sgd momentum recurrence") {
  auto p = param(Tensor::vector({0.0}));
  Sgd opt(SgdConfig{MultiStepSchedule{1.0, {}, 0.1}, 0.9, 0.0});
  std::vector<Parameter*> ps{&p};
  for (int i = 0; i < 2; ++i) {
    p.tensor.grad()[0] = 1.0;
    opt.step(ps, 0);
  }
  CHECK(p.tensor[0] == doctest::Approx(-2.9).epsilon(1e-15));
}

TEST_CASE("multistep schedule") {
  MultiStepSchedule s{0.1, {2}, 0.1};
  CHECK(s.lr_at(1) == 0.1);
  CHECK(s.lr_at(2) == doctest::Approx(0.01).epsilon(1e-15));
  MultiStepSchedule two{0.01, {20, 25}, 0.1};
  CHECK(two.lr_at(19) == 0.01);
  CHECK(two.lr_at(24) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(two.lr_at(25) == doctest::Approx(1e-4).epsilon(1e-15));
}

TEST_CASE("sgd skips frozen elements and decay-exempt parameters") {
  auto w = param(Tensor::vector({1.0, 1.0}));
  w.frozen = {0, 1};
  auto slope = param(Tensor::vector({0.5}));
  slope.weight_decay = false;
  Sgd opt(SgdConfig{MultiStepSchedule{0.1, {}, 0.1}, 0.9, 0.5});
  std::vector<Parameter*> ps{&w, &slope};
  w.tensor.grad() = {1.0, 1.0};
  slope.tensor.grad()[0] = 0.0;
  opt.step(ps, 0);
  CHECK(w.tensor[0] == doctest::Approx(1.0 - 0.1 * 1.5).epsilon(1e-15));
  CHECK(w.tensor[1] == 1.0);
  CHECK(opt.velocity()[0][1] == 0.0);
  CHECK(slope.tensor[0] == 0.5);
}

TEST_CASE("sgd gradient clipping bounds the update") {
  auto p = param(Tensor::vector({0.0, 0.0}));
  Sgd opt(SgdConfig{MultiStepSchedule{1.0, {}, 0.1}, 0.0, 0.0, 1.0});
  std::vector<Parameter*> ps{&p};
  p.tensor.grad() = {30.0, 40.0};
  opt.step(ps, 0);
  CHECK(p.tensor[0] == doctest::Approx(-0.6).epsilon(1e-15));
  CHECK(p.tensor[1] == doctest::Approx(-0.8).epsilon(1e-15));
  p.tensor.grad() = {0.3, 0.4};
  opt.step(ps, 0);
  CHECK(p.tensor[0] == doctest::Approx(-0.9).epsilon(1e-15));
}

TEST_CASE("random primitive gradient checks") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = away_from_zero({3, 4}, rng);
    auto w = param(random_tensor({4, 2}, rng));
    auto s = param(Tensor::vector({0.3}));
    const std::vector<std::size_t> map{0, 0, 0, 0};
    CHECK(grad_check([&](Tape& t) { return sum(scale(matmul(t.constant(x), t.parameter(w)), 0.7)); }, w) < 1e-8);
    CHECK(grad_check([&](Tape& t) { return sum(prelu(t.constant(x), t.parameter(s), map)); }, s) < 1e-8);
    auto xp = vdn::test::param(x);
    CHECK(grad_check([&](Tape& t) { return sum(relu(t.parameter(xp))); }, xp) < 1e-8);
  }
}

}  // TEST_SUITE
