#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vdn/tensor.hpp"

namespace vdn {

/// Labeled samples with a fixed train/test split. Immutable once built, so
/// it may be shared read-only between workers.
struct Dataset {
  Tensor features;  // samples × features
  std::vector<std::size_t> labels;
  std::size_t classes = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::string provenance;

  std::size_t samples() const { return labels.size(); }
  std::size_t feature_count() const { return features.cols(); }

  /// Throws SpecError if the split is not a disjoint cover, a feature is not
  /// finite or a label is out of range.
  void validate() const;

  /// Gathers rows `idx` into a batch.
  Tensor rows(std::span<const std::size_t> idx) const;
  std::vector<std::size_t> labels_of(std::span<const std::size_t> idx) const;
};

enum class SyntheticKind { gaussian_mixture, spirals, hierarchical_xor };

std::string_view to_string(SyntheticKind k);
SyntheticKind parse_synthetic_kind(std::string_view s);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::hierarchical_xor;
  std::size_t size = 10000;
  std::size_t classes = 4;
  std::size_t features = 8;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

/// Deterministic in the seed; split 80/20 stratified by class.
///
/// gaussian-mixture: class k sits at 3·e_(k mod features) (plus a random
/// offset when classes > features) with isotropic noise of std `noise`.
/// spirals: interleaved arms in the first two features, remaining features
/// are noise. hierarchical-xor: features uniform in [-1, 1]; pair p yields
/// u_p = XOR of the signs of features 2p and 2p+1. The coarse label bit is
/// u_0, the fine bit is u_0 XOR u_1 (a parity of parities); further pairs are
/// distractors. 4 classes use both bits, 2 classes the fine bit. Noise
/// perturbs features after labeling.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Stratified split: round(fraction·n_k) samples of every class go to train.
void stratified_split(Dataset& data, double train_fraction, std::uint64_t seed);

}  // namespace vdn
