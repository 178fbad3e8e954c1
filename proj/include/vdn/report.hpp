#pragma once

// Report bundle written into a result directory:
//   curves.csv       granularity,omega,seed,napl,avg_slope,prop_disabled,train_acc,test_acc
//   aggregate.csv    per (granularity, omega): mean and std across seeds
//   histograms.json  [{granularity, omega, seed, lengths, mass}]
//   summary.json     channel-vs-layer test accuracy per NAPL bin
// Rows are sorted by (granularity, omega, seed), so the output does not
// depend on the order records were produced in.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vdn/linearize.hpp"

namespace vdn {

struct GapBin {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> channel;  // test accuracies of channel-wise runs in the bin
  std::vector<double> layer;
  double channel_mean = 0.0;
  double channel_std = 0.0;
  double layer_mean = 0.0;
  double layer_std = 0.0;
  /// channel_mean - layer_mean
  double gap = 0.0;
  double pooled_std = 0.0;

  bool populated() const { return !channel.empty() && !layer.empty(); }
};

/// `bins` equal-width NAPL bins covering [0, upper]; the last bin is closed.
std::vector<GapBin> binned_gaps(std::span<const SweepRecord> records, double upper, std::size_t bins);

/// Successful records sorted by (granularity, omega, seed).
std::vector<SweepRecord> sorted_records(std::vector<SweepRecord> records);

std::string curves_csv(std::span<const SweepRecord> records);

/// Reads records/*.json below `dir`; unreadable files are reported in
/// `warnings` and skipped.
std::vector<SweepRecord> read_records(const std::filesystem::path& dir,
                                      std::vector<std::string>& warnings);

struct ReportSummary {
  /// Successful records; failed ones are counted separately.
  std::size_t records = 0;
  std::size_t failed = 0;
  std::vector<std::string> warnings;
};

ReportSummary write_report(const std::filesystem::path& dir);

}  // namespace vdn
