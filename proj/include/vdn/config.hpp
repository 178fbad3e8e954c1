#pragma once

// Experiment configuration and its key-value text form.
//
// One `key = value` per line, `#` starts a comment. Lists are comma
// separated; residual spans are written as `first-last`. Written configs
// spell out every key, so a result directory can be re-run from its own
// config.txt.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vdn/dataset.hpp"
#include "vdn/linearize.hpp"
#include "vdn/network.hpp"
#include "vdn/optim.hpp"

namespace vdn {

struct DatasetConfig {
  /// "synthetic" or "idx".
  std::string source = "synthetic";
  SyntheticSpec synthetic;
  std::string idx_images;
  std::string idx_labels;
};

struct BaseTrainConfig {
  int epochs = 60;
  SgdConfig optim{MultiStepSchedule{0.1, {30, 45}, 0.1}, 0.9, 1e-4};
  std::size_t batch_size = 128;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<std::size_t> widths{8, 32, 32, 32, 32, 32, 32, 32, 4};
  std::vector<ResidualSpan> spans;
  BaseTrainConfig base;
  /// omega and seed are set per run.
  PostTrainConfig post;
  /// Explicit grid; when empty the range is calibrated and `omega_points`
  /// log-spaced values are used.
  std::vector<double> omega_grid;
  std::size_t omega_points = 10;
  double calibration_start = 1e-3;
  int calibration_bisections = 3;
  std::vector<Granularity> granularities{Granularity::channel, Granularity::layer};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string output_dir = "results";

  NetworkSpec network_spec() const;
  void validate() const;

  std::string to_text() const;
  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  /// Hierarchical-xor, 8 features, 4 classes, 8000/2000 split; width 32,
  /// depth 8.
  static ExperimentConfig reference();
};

}  // namespace vdn
