#pragma once

// Partial linearization of a trained ReLU network: the ReLUs become PReLUs,
// fine-tuning adds omega·Σ|1 - α|^0.5 to the task loss, and any slope that
// comes within the freeze threshold of 1 is pinned to exactly 1 for good.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vdn/dataset.hpp"
#include "vdn/network.hpp"
#include "vdn/optim.hpp"
#include "vdn/pathmetrics.hpp"
#include "vdn/training.hpp"

namespace vdn {

struct PostTrainConfig {
  double omega = 0.0;
  int epochs = 30;
  /// Gradients are clipped to norm 1: without normalization layers the
  /// penalty's steep gradient near α = 1 otherwise throws slopes far past 1
  /// and the network diverges.
  SgdConfig optim{MultiStepSchedule{0.01, {20, 25}, 0.1}, 0.9, 1e-4, 1.0};
  double freeze_threshold = 0.01;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PostTrainResult {
  Network network;
  std::vector<EpochTrace> trace;
};

/// Pins every non-frozen slope with |α - 1| < threshold to 1 and freezes it.
/// Returns the number of slopes frozen by this call.
std::size_t freeze_pass(Network& net, double threshold = 0.01);

/// Regularized fine-tuning with a freeze pass after every optimizer step.
PostTrainResult post_train(Network net, const Dataset& data, const PostTrainConfig& cfg);

/// Expands nonlinear layer-wise units to channel-wise ones and trains again
/// without the penalty.
PostTrainResult post_post_train(Network net, const Dataset& data, PostTrainConfig cfg);

struct SweepRecord {
  Granularity granularity = Granularity::channel;
  double omega = 0.0;
  std::uint64_t seed = 0;
  double napl = 0.0;
  double avg_slope = 0.0;
  double prop_disabled = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  std::size_t mixed_layers = 0;
  PathLengthDistribution histogram;
  std::string checkpoint;
  /// Non-empty when the run failed; metrics are then meaningless.
  std::string error;

  bool ok() const { return error.empty(); }
};

nlohmann::json to_json(const SweepRecord& r);
SweepRecord record_from_json(const nlohmann::json& j);

/// Measures a post-trained network.
SweepRecord measure(const Network& net, const Dataset& data, Granularity g, double omega,
                    std::uint64_t seed);

struct SweepOptions {
  std::size_t jobs = 1;
  /// When set, each run's network is saved here.
  std::filesystem::path checkpoint_dir;
  /// Added to the omega index in checkpoint file names.
  std::size_t index_offset = 0;
};

/// One independent post-training run per omega, starting from `base` (a
/// trained ReLU network). Failed runs are recorded, not thrown. Output order
/// follows `omegas` regardless of the number of jobs.
std::vector<SweepRecord> omega_sweep(const Network& base, const Dataset& data,
                                     std::span<const double> omegas, const PostTrainConfig& cfg,
                                     Granularity granularity, const SweepOptions& options = {});

/// `points` values spaced evenly in log(omega) from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t points);

struct OmegaProbe {
  double omega;
  Granularity granularity;
  double napl;
};

struct OmegaRange {
  double low = 0.0;
  double high = 0.0;
  std::vector<OmegaProbe> probes;
};

struct CalibrationOptions {
  double start = 1e-3;
  double factor = 4.0;
  int max_expansions = 12;
  int bisection_steps = 3;
  /// The bottom endpoint keeps NAPL at or above this fraction of the maximum.
  double low_fraction = 0.9;
  /// The top endpoint brings NAPL to or below this value.
  double high_napl = 1.0;
  std::size_t jobs = 1;
};

/// Brackets the omega range that takes every granularity in `granularities`
/// from nearly fully nonlinear (low) to NAPL <= high_napl (high), refining
/// both ends by log-space bisection.
OmegaRange calibrate_omega_range(const Network& base, const Dataset& data,
                                 const PostTrainConfig& cfg,
                                 std::span<const Granularity> granularities,
                                 const CalibrationOptions& options = {});

}  // namespace vdn
