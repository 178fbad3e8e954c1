#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <doctest.h>

#include "vdn/error.hpp"
#include "vdn/network.hpp"
#include "vdn/pathmetrics.hpp"

using namespace vdn;

namespace {

// Independent reference: recursive probability tree over one stage at a
// time, accumulating (length -> probability) without any convolution.
void tree(const std::vector<Stage>& stages, std::size_t i, std::size_t length, double prob,
          std::map<std::size_t, double>& out);

void tree_span(const std::vector<Stage>& inner, std::size_t j, std::size_t length, double prob,
               const std::vector<Stage>& rest, std::size_t i, std::map<std::size_t, double>& out) {
  if (j == inner.size()) {
    tree(rest, i, length, prob, out);
    return;
  }
  const Stage& s = inner[j];
  if (s.kind == Stage::Kind::nonlinear) {
    if (s.p < 1.0) tree_span(inner, j + 1, length, prob * (1.0 - s.p), rest, i, out);
    if (s.p > 0.0) tree_span(inner, j + 1, length + 1, prob * s.p, rest, i, out);
  } else {
    // Nested span: enumerate its own outcomes first.
    std::map<std::size_t, double> sub;
    tree(s.inner, 0, 0, 1.0, sub);
    tree_span(inner, j + 1, length, prob * 0.5, rest, i, out);
    for (auto [k, q] : sub) tree_span(inner, j + 1, length + k, prob * 0.5 * q, rest, i, out);
  }
}

void tree(const std::vector<Stage>& stages, std::size_t i, std::size_t length, double prob,
          std::map<std::size_t, double>& out) {
  if (i == stages.size()) {
    out[length] += prob;
    return;
  }
  const Stage& s = stages[i];
  if (s.kind == Stage::Kind::nonlinear) {
    if (s.p < 1.0) tree(stages, i + 1, length, prob * (1.0 - s.p), out);
    if (s.p > 0.0) tree(stages, i + 1, length + 1, prob * s.p, out);
  } else {
    tree(stages, i + 1, length, prob * 0.5, out);
    tree_span(s.inner, 0, length, prob * 0.5, stages, i + 1, out);
  }
}

double tv_against_tree(const PathProfile& p, const PathLengthDistribution& d) {
  std::map<std::size_t, double> ref;
  tree(p.stages, 0, 0, 1.0, ref);
  double tv = 0.0;
  const std::size_t n = std::max(d.mass.size(), ref.empty() ? 0 : ref.rbegin()->first + 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = k < d.mass.size() ? d.mass[k] : 0.0;
    const double b = ref.count(k) ? ref[k] : 0.0;
    tv += std::abs(a - b);
  }
  return 0.5 * tv;
}

PathProfile random_profile(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution span(0.3);
  PathProfile p;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    if (span(rng)) {
      std::vector<Stage> inner;
      for (int k = 0; k < 2; ++k) inner.push_back(Stage::nonlinear(u(rng) < 0.2 ? 1.0 : u(rng)));
      p.stages.push_back(Stage::residual(std::move(inner)));
    } else {
      p.stages.push_back(Stage::nonlinear(u(rng) < 0.2 ? 0.0 : u(rng)));
    }
  }
  return p;
}

Network prelu_net(Granularity g) {
  return relu_to_prelu(build(NetworkSpec::feedforward({4, 8, 8, 8, 2}), 0), g);
}

}  // namespace

TEST_SUITE("pathmetrics") {

TEST_CASE("profile from frozen flags") {
  auto net = prelu_net(Granularity::channel);
  auto& slopes = net.layers()[0].slopes;
  for (std::size_t k = 0; k < 5; ++k) {
    slopes.tensor[k] = 1.0;
    slopes.frozen.resize(8, 0);
    slopes.frozen[k] = 1;
  }
  const auto prof = profile_of(net);
  REQUIRE(prof.stages.size() == 3);
  CHECK(prof.stages[0].p == 0.375);
  CHECK(prof.stages[1].p == 1.0);

  auto all = prelu_net(Granularity::channel);
  for (auto& l : all.layers())
    if (!l.slopes.empty()) {
      for (double& s : l.slopes.tensor.values()) s = 1.0;
      l.slopes.frozen.assign(l.slopes.tensor.size(), 1);
    }
  for (const auto& s : profile_of(all).stages) CHECK(s.p == 0.0);
  CHECK(average_slope(all) == 1.0);
  CHECK(proportion_disabled(all) == 1.0);
  CHECK(napl(all) == 0.0);
}

TEST_CASE("layer-wise slope below 1 is fully nonlinear") {
  auto net = prelu_net(Granularity::layer);
  net.layers()[0].slopes.tensor[0] = 0.4;
  CHECK(profile_of(net).stages[0].p == 1.0);
  // A slope of 1 that has not been frozen still counts as linear.
  net.layers()[1].slopes.tensor[0] = 1.0;
  CHECK(profile_of(net).stages[1].p == 0.0);
}

TEST_CASE("napl of plain networks") {
  for (std::size_t depth = 2; depth <= 9; ++depth) {
    std::vector<std::size_t> widths(depth + 1, 6);
    const auto net = relu_to_prelu(build(NetworkSpec::feedforward(widths), 0), Granularity::channel);
    CHECK(napl(net) == static_cast<double>(depth - 1));
  }
  PathProfile two{{Stage::nonlinear(0.5), Stage::nonlinear(0.5)}};
  CHECK(napl(two) == 1.0);
}

TEST_CASE("napl of residual networks with block length 2") {
  for (std::size_t L = 1; L <= 6; ++L) {
    std::vector<std::size_t> widths(2 * L + 2, 4);
    auto spec = NetworkSpec::feedforward(widths);
    for (std::size_t s = 0; s < L; ++s) spec.spans.push_back({2 * s, 2 * s + 1});
    const auto net = relu_to_prelu(build(spec, 0), Granularity::channel);
    const auto prof = profile_of(net);
    CHECK(napl(prof) == doctest::Approx(static_cast<double>(L)).epsilon(1e-15));
    CHECK(tv_against_tree(prof, path_length_distribution(prof)) < 1e-12);
  }
}

TEST_CASE("distribution basics") {
  const auto single = path_length_distribution(PathProfile{{Stage::nonlinear(0.3)}});
  REQUIRE(single.mass.size() == 2);
  CHECK(single.mass[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(single.mass[1] == doctest::Approx(0.3).epsilon(1e-15));
  const auto empty = path_length_distribution(PathProfile{});
  REQUIRE(empty.mass.size() == 1);
  CHECK(empty.mass[0] == 1.0);
  const auto oracle_empty = enumerate_paths_oracle(PathProfile{});
  CHECK(total_variation(oracle_empty, empty) == 0.0);
  const auto oracle_single = enumerate_paths_oracle(PathProfile{{Stage::nonlinear(0.3)}});
  CHECK(total_variation(oracle_single, single) < 1e-15);
}

TEST_CASE("convolution, library oracle and probability tree agree") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto prof = random_profile(rng);
    const auto d = path_length_distribution(prof);
    CHECK(total_variation(d, enumerate_paths_oracle(prof)) <= 1e-12);
    CHECK(tv_against_tree(prof, d) <= 1e-12);
    CHECK(std::abs(d.mean() - napl(prof)) <= 1e-10);
    CHECK(std::abs(d.total() - 1.0) <= 1e-12);
    for (double m : d.mass) CHECK(m >= 0.0);
  }
}

TEST_CASE("plain stage order does not matter") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Stage> stages;
  for (int i = 0; i < 7; ++i) stages.push_back(Stage::nonlinear(u(rng)));
  const auto ref = path_length_distribution(PathProfile{stages});
  for (int t = 0; t < 10; ++t) {
    std::shuffle(stages.begin(), stages.end(), rng);
    CHECK(total_variation(path_length_distribution(PathProfile{stages}), ref) < 1e-14);
  }
}

TEST_CASE("oracle rejects oversized choice spaces") {
  std::vector<Stage> stages(kOracleMaxChoices + 1, Stage::nonlinear(0.5));
  CHECK_THROWS_AS(enumerate_paths_oracle(PathProfile{stages}), Error);
  // Stages with p in {0, 1} are not choices.
  std::vector<Stage> fixed(40, Stage::nonlinear(1.0));
  CHECK(enumerate_paths_oracle(PathProfile{fixed}).mass.back() == 1.0);
}

TEST_CASE("layer-wise networks give a point mass") {
  auto net = prelu_net(Granularity::layer);
  net.layers()[1].slopes.tensor[0] = 1.0;
  net.layers()[1].slopes.frozen = {1};
  const auto d = path_length_distribution(profile_of(net));
  CHECK(d.support_size() == 1);
  CHECK(d.mass[2] == 1.0);
  CHECK(napl(net) == 2.0);
}

TEST_CASE("average slope and disabled proportion") {
  auto net = relu_to_prelu(build(NetworkSpec::feedforward({2, 1, 1, 2}), 0), Granularity::channel);
  net.layers()[1].slopes.tensor[0] = 1.0;
  net.layers()[1].slopes.frozen = {1};
  CHECK(average_slope(net) == 0.5);
  CHECK(proportion_disabled(net) == 0.5);

  auto fresh = prelu_net(Granularity::channel);
  CHECK(proportion_disabled(fresh) == 0.0);
  auto twelve = relu_to_prelu(build(NetworkSpec::feedforward({2, 6, 6, 2}), 0), Granularity::channel);
  auto& s = twelve.layers()[0].slopes;
  s.frozen.assign(6, 0);
  for (std::size_t k : {0, 2, 4}) {
    s.tensor[k] = 1.0;
    s.frozen[k] = 1;
  }
  CHECK(proportion_disabled(twelve) == 0.25);
  CHECK(mixed_layer_count(twelve) == 1);
}

TEST_CASE("average slope is invariant under layer to channel expansion") {
  auto net = prelu_net(Granularity::layer);
  net.layers()[0].slopes.tensor[0] = 0.2;
  net.layers()[1].slopes.tensor[0] = 0.7;
  net.layers()[2].slopes.tensor[0] = 0.1;
  const auto expanded = replace_nonlinear_layerwise_with_channelwise(net);
  CHECK(average_slope(expanded) == doctest::Approx(average_slope(net)).epsilon(1e-15));
}

TEST_CASE("histogram json round trip") {
  const auto d = path_length_distribution(PathProfile{{Stage::nonlinear(0.25), Stage::nonlinear(0.5)}});
  const auto j = to_json(d);
  CHECK(j.contains("lengths"));
  CHECK(j.contains("mass"));
  CHECK(j["lengths"].size() == j["mass"].size());
  CHECK(distribution_from_json(j).mass == d.mass);
}

}  // TEST_SUITE
