#include "vdn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "vdn/error.hpp"

namespace vdn {

void Dataset::validate() const {
  if (features.rank() != 2 || features.rows() != labels.size())
    throw SpecError("dataset: feature rows and label count differ");
  for (double v : features.values())
    if (!std::isfinite(v)) throw SpecError("dataset: non-finite feature value");
  for (auto l : labels)
    if (l >= classes) throw SpecError("dataset: label " + std::to_string(l) + " outside " +
                                      std::to_string(classes) + " classes");
  std::vector<int> seen(labels.size(), 0);
  for (const auto* part : {&train, &test})
    for (auto i : *part) {
      if (i >= labels.size()) throw SpecError("dataset: split index out of range");
      if (seen[i]++) throw SpecError("dataset: split index " + std::to_string(i) + " used twice");
    }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw SpecError("dataset: split does not cover every sample");
}

Tensor Dataset::rows(std::span<const std::size_t> idx) const {
  const std::size_t f = features.cols();
  Tensor out({idx.size(), f});
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy_n(features.data() + idx[r] * f, f, out.data() + r * f);
  return out;
}

std::vector<std::size_t> Dataset::labels_of(std::span<const std::size_t> idx) const {
  std::vector<std::size_t> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = labels[idx[r]];
  return out;
}

std::string_view to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::gaussian_mixture: return "gaussian-mixture";
    case SyntheticKind::spirals: return "spirals";
    case SyntheticKind::hierarchical_xor: return "hierarchical-xor";
  }
  return "unknown";
}

SyntheticKind parse_synthetic_kind(std::string_view s) {
  for (auto k : {SyntheticKind::gaussian_mixture, SyntheticKind::spirals,
                 SyntheticKind::hierarchical_xor})
    if (s == to_string(k)) return k;
  throw SpecError("unknown synthetic dataset kind '" + std::string(s) + "'");
}

void stratified_split(Dataset& data, double train_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5a17c0ffeeull);
  std::vector<std::vector<std::size_t>> by_class(data.classes);
  for (std::size_t i = 0; i < data.labels.size(); ++i) by_class[data.labels[i]].push_back(i);
  data.train.clear();
  data.test.clear();
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(members.size())));
    data.train.insert(data.train.end(), members.begin(), members.begin() + n_train);
    data.test.insert(data.test.end(), members.begin() + n_train, members.end());
  }
  std::sort(data.train.begin(), data.train.end());
  std::sort(data.test.begin(), data.test.end());
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2 || spec.size < spec.classes)
    throw SpecError("synthetic dataset needs size >= classes >= 2");
  if (spec.features == 0) throw SpecError("synthetic dataset needs at least one feature");
  if (!(spec.noise >= 0.0)) throw SpecError("synthetic dataset noise must be non-negative");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = spec.size, f = spec.features;

  Dataset data;
  data.classes = spec.classes;
  data.features = Tensor({n, f});
  data.labels.resize(n);

  switch (spec.kind) {
    case SyntheticKind::gaussian_mixture: {
      std::vector<std::vector<double>> means(spec.classes, std::vector<double>(f, 0.0));
      for (std::size_t k = 0; k < spec.classes; ++k) {
        if (spec.classes <= f) {
          means[k][k] = 3.0;
        } else {
          for (auto& m : means[k]) m = 3.0 * gauss(rng);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = i % spec.classes;
        data.labels[i] = k;
        for (std::size_t j = 0; j < f; ++j) data.features(i, j) = means[k][j] + spec.noise * gauss(rng);
      }
      break;
    }
    case SyntheticKind::spirals: {
      if (f < 2) throw SpecError("spirals need at least two features");
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = i % spec.classes;
        const double t = unit(rng);
        const double angle = 2.0 * std::numbers::pi * (static_cast<double>(k) / spec.classes + 1.25 * t);
        data.labels[i] = k;
        data.features(i, 0) = t * std::cos(angle) + spec.noise * gauss(rng);
        data.features(i, 1) = t * std::sin(angle) + spec.noise * gauss(rng);
        for (std::size_t j = 2; j < f; ++j) data.features(i, j) = spec.noise * gauss(rng);
      }
      break;
    }
    case SyntheticKind::hierarchical_xor: {
      if (f < 4 || f % 2 != 0) throw SpecError("hierarchical-xor needs an even feature count >= 4");
      if (spec.classes != 2 && spec.classes != 4)
        throw SpecError("hierarchical-xor supports 2 or 4 classes");
      std::uniform_real_distribution<double> box(-1.0, 1.0);
      const std::size_t pairs = f / 2;
      for (std::size_t i = 0; i < n; ++i) {
        unsigned coarse = 0, fine = 0;
        for (std::size_t p = 0; p < pairs; ++p) {
          const double a = box(rng), b = box(rng);
          data.features(i, 2 * p) = a;
          data.features(i, 2 * p + 1) = b;
          const unsigned bit = (a > 0.0) != (b > 0.0) ? 1u : 0u;
          if (p == 0) coarse = bit;
          if (p == 1) fine = coarse ^ bit;
        }
        data.labels[i] = spec.classes == 4 ? coarse + 2 * fine : fine;
        for (std::size_t j = 0; j < f; ++j) data.features(i, j) += spec.noise * gauss(rng);
      }
      break;
    }
  }
  data.provenance = std::string(to_string(spec.kind)) + " seed=" + std::to_string(spec.seed);
  stratified_split(data, 0.8, spec.seed);
  data.validate();
  return data;
}

}  // namespace vdn
