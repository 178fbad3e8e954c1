#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vdn/checkpoint.hpp"
#include "vdn/config.hpp"
#include "vdn/dataset.hpp"
#include "vdn/linearize.hpp"

namespace vdn {

using Logger = std::function<void(const std::string&)>;

Dataset make_dataset(const DatasetConfig& cfg);

/// Trains the plain ReLU network described by `spec`. The checkpoint carries
/// final accuracies; zero epochs returns the initialization.
Checkpoint base_train(const NetworkSpec& spec, const Dataset& data, const BaseTrainConfig& cfg,
                      std::uint64_t seed);

struct ExperimentResult {
  std::filesystem::path dir;
  std::vector<double> omega_grid;
  std::vector<SweepRecord> records;
};

/// Directory layout:
///   config.txt                  resolved configuration (explicit omega grid)
///   calibration.json            omega probes, when the grid was calibrated
///   checkpoints/base_s<seed>.ckpt
///   checkpoints/<granularity>_w<ii>_s<seed>.ckpt
///   records/<granularity>_w<ii>_s<seed>.json
/// followed by the files written by write_report().
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1,
                                const Logger& log = {});

/// Loads base checkpoints from `dir` when they match the configuration,
/// training and saving them otherwise.
std::vector<Network> base_networks(const ExperimentConfig& cfg, const Dataset& data,
                                   const std::filesystem::path& dir, std::size_t jobs,
                                   const Logger& log = {});

std::string base_fingerprint(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace vdn
