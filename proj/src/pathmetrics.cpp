#include "vdn/pathmetrics.hpp"

#include <cmath>
#include <cstdint>
#include <optional>

#include "vdn/error.hpp"

namespace vdn {

Stage Stage::nonlinear(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("nonlinear fraction must lie in [0, 1]");
  return Stage{Kind::nonlinear, p, {}};
}

Stage Stage::residual(std::vector<Stage> inner) { return Stage{Kind::residual, 0.0, std::move(inner)}; }

namespace {

std::size_t max_length(const std::vector<Stage>& stages) {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.kind == Stage::Kind::nonlinear ? 1 : max_length(s.inner);
  return n;
}

double expected_length(const std::vector<Stage>& stages) {
  double total = 0.0;
  for (const auto& s : stages)
    total += s.kind == Stage::Kind::nonlinear ? s.p : 0.5 * expected_length(s.inner);
  return total;
}

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

std::vector<double> mass_of(const std::vector<Stage>& stages) {
  std::vector<double> mass{1.0};
  for (const auto& s : stages) {
    if (s.kind == Stage::Kind::nonlinear) {
      mass = convolve(mass, {1.0 - s.p, s.p});
    } else {
      auto inner = mass_of(s.inner);
      for (auto& m : inner) m *= 0.5;
      inner[0] += 0.5;
      mass = convolve(mass, inner);
    }
  }
  return mass;
}

// A binary decision of the enumeration is either the channel class at a
// nonlinear stage or the skip/branch decision of a span.
void collect_choices(const std::vector<Stage>& stages, std::vector<const Stage*>& out) {
  for (const auto& s : stages) {
    if (s.kind == Stage::Kind::nonlinear) {
      if (s.p > 0.0 && s.p < 1.0) out.push_back(&s);
    } else {
      out.push_back(&s);
      collect_choices(s.inner, out);
    }
  }
}

// Walks the profile under a fixed assignment of every choice. Returns the
// path length; choices inside skipped spans are ignored.
std::size_t walk(const std::vector<Stage>& stages, const std::vector<const Stage*>& choices,
                 std::uint32_t bits) {
  auto bit_of = [&](const Stage* s) {
    for (std::size_t k = 0; k < choices.size(); ++k)
      if (choices[k] == s) return ((bits >> k) & 1u) != 0;
    return false;
  };
  std::size_t length = 0;
  for (const auto& s : stages) {
    if (s.kind == Stage::Kind::nonlinear) {
      if (s.p >= 1.0 || (s.p > 0.0 && bit_of(&s))) ++length;
    } else if (bit_of(&s)) {
      length += walk(s.inner, choices, bits);
    }
  }
  return length;
}

}  // namespace

std::size_t PathProfile::max_length() const { return vdn::max_length(stages); }

double PathLengthDistribution::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < mass.size(); ++k) m += static_cast<double>(k) * mass[k];
  return m;
}

double PathLengthDistribution::total() const {
  double t = 0.0;
  for (double m : mass) t += m;
  return t;
}

std::size_t PathLengthDistribution::support_size(double tol) const {
  std::size_t n = 0;
  for (double m : mass)
    if (m > tol) ++n;
  return n;
}

double total_variation(const PathLengthDistribution& a, const PathLengthDistribution& b) {
  const std::size_t n = std::max(a.mass.size(), b.mass.size());
  double tv = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = k < a.mass.size() ? a.mass[k] : 0.0;
    const double y = k < b.mass.size() ? b.mass[k] : 0.0;
    tv += std::abs(x - y);
  }
  return 0.5 * tv;
}

PathProfile profile_of(const Network& net) {
  const auto& spec = net.spec();
  auto stage_of = [&](std::size_t i) -> std::optional<Stage> {
    const auto a = spec.layers[i].activation;
    if (a == Activation::identity) return std::nullopt;
    if (a == Activation::relu) return Stage::nonlinear(1.0);
    const auto& layer = net.layers()[i];
    std::size_t nonlinear = 0;
    for (std::size_t c = 0; c < layer.unit_map.size(); ++c)
      if (layer.slopes.tensor[layer.unit_map[c]] != 1.0) ++nonlinear;
    return Stage::nonlinear(static_cast<double>(nonlinear) /
                            static_cast<double>(layer.unit_map.size()));
  };
  PathProfile profile;
  std::size_t next_span = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (next_span < spec.spans.size() && spec.spans[next_span].first == i) {
      const auto& span = spec.spans[next_span++];
      std::vector<Stage> inner;
      for (std::size_t j = span.first; j <= span.last; ++j)
        if (auto s = stage_of(j)) inner.push_back(*s);
      profile.stages.push_back(Stage::residual(std::move(inner)));
      i = span.last;
      continue;
    }
    if (auto s = stage_of(i)) profile.stages.push_back(*s);
  }
  return profile;
}

double napl(const PathProfile& profile) { return expected_length(profile.stages); }

PathLengthDistribution path_length_distribution(const PathProfile& profile) {
  return {mass_of(profile.stages)};
}

PathLengthDistribution enumerate_paths_oracle(const PathProfile& profile) {
  std::vector<const Stage*> choices;
  collect_choices(profile.stages, choices);
  if (choices.size() > kOracleMaxChoices)
    throw Error("enumerate_paths_oracle: " + std::to_string(choices.size()) +
                " binary choices exceed the limit of " + std::to_string(kOracleMaxChoices));
  PathLengthDistribution out;
  out.mass.assign(profile.max_length() + 1, 0.0);
  const std::uint32_t combos = 1u << choices.size();
  for (std::uint32_t bits = 0; bits < combos; ++bits) {
    double weight = 1.0;
    for (std::size_t k = 0; k < choices.size(); ++k) {
      const bool on = (bits >> k) & 1u;
      const Stage& s = *choices[k];
      if (s.kind == Stage::Kind::nonlinear)
        weight *= on ? s.p : 1.0 - s.p;
      else
        weight *= 0.5;
    }
    out.mass[walk(profile.stages, choices, bits)] += weight;
  }
  return out;
}

double average_slope(const Network& net) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& l : net.layers())
    for (double a : l.slopes.tensor.values()) {
      total += a;
      ++n;
    }
  return n ? total / static_cast<double>(n) : 0.0;
}

double proportion_disabled(const Network& net) {
  std::size_t disabled = 0, n = 0;
  for (const auto& l : net.layers())
    for (double a : l.slopes.tensor.values()) {
      disabled += a == 1.0 ? 1 : 0;
      ++n;
    }
  return n ? static_cast<double>(disabled) / static_cast<double>(n) : 0.0;
}

std::size_t mixed_layer_count(const Network& net) {
  std::size_t mixed = 0;
  for (const auto& l : net.layers()) {
    bool linear = false, nonlinear = false;
    for (auto u : l.unit_map) (l.slopes.tensor[u] == 1.0 ? linear : nonlinear) = true;
    if (linear && nonlinear) ++mixed;
  }
  return mixed;
}

nlohmann::json to_json(const PathLengthDistribution& d) {
  nlohmann::json lengths = nlohmann::json::array();
  for (std::size_t k = 0; k < d.mass.size(); ++k) lengths.push_back(k);
  return {{"lengths", lengths}, {"mass", d.mass}};
}

PathLengthDistribution distribution_from_json(const nlohmann::json& j) {
  const auto lengths = j.at("lengths").get<std::vector<std::size_t>>();
  const auto mass = j.at("mass").get<std::vector<double>>();
  if (lengths.size() != mass.size()) throw Error("histogram: lengths and mass differ in size");
  PathLengthDistribution d;
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    if (lengths[k] >= d.mass.size()) d.mass.resize(lengths[k] + 1, 0.0);
    d.mass[lengths[k]] += mass[k];
  }
  return d;
}

}  // namespace vdn
