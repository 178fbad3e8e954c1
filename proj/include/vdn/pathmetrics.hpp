#pragma once

// Path-length analytics for networks built from PReLU layers and identity
// skips.
//
// A random input-to-output path picks, independently at every nonlinear
// layer, one channel uniformly at random, and at every residual span either
// the skip or the branch with probability 1/2 each. The path length is the
// number of nonlinear channels it passes through. A channel is linear only
// when its slope is exactly 1.

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "vdn/network.hpp"

namespace vdn {

struct Stage {
  enum class Kind { nonlinear, residual };

  Kind kind = Kind::nonlinear;
  /// Fraction of nonlinear channels (nonlinear stages only).
  double p = 1.0;
  /// Stages inside the span (residual stages only).
  std::vector<Stage> inner;

  static Stage nonlinear(double p);
  static Stage residual(std::vector<Stage> inner);
};

struct PathProfile {
  std::vector<Stage> stages;

  /// Upper bound on the path length (number of nonlinear stages).
  std::size_t max_length() const;
};

/// mass[k] = probability that a path meets exactly k nonlinear units.
struct PathLengthDistribution {
  std::vector<double> mass;

  double mean() const;
  double total() const;
  /// Number of lengths carrying more than `tol` mass.
  std::size_t support_size(double tol = 1e-12) const;
};

double total_variation(const PathLengthDistribution& a, const PathLengthDistribution& b);

PathProfile profile_of(const Network& net);

/// Normalized average path length: expected nonlinear count of a random path.
double napl(const PathProfile& profile);
inline double napl(const Network& net) { return napl(profile_of(net)); }

/// Exact distribution by convolving the per-stage mass functions.
PathLengthDistribution path_length_distribution(const PathProfile& profile);

inline constexpr std::size_t kOracleMaxChoices = 20;

/// Reference distribution by enumerating every combination of channel class
/// (nonlinear or linear) and skip decision. Stages with p in {0, 1} are not
/// choices. Throws Error when more than kOracleMaxChoices choices exist.
PathLengthDistribution enumerate_paths_oracle(const PathProfile& profile);

/// Mean over all slope parameters, frozen ones included.
double average_slope(const Network& net);
/// Fraction of slope parameters that are exactly 1.
double proportion_disabled(const Network& net);
/// Layers that hold both linear and nonlinear channels.
std::size_t mixed_layer_count(const Network& net);

/// {"lengths": [...], "mass": [...]}
nlohmann::json to_json(const PathLengthDistribution& d);
PathLengthDistribution distribution_from_json(const nlohmann::json& j);

}  // namespace vdn
