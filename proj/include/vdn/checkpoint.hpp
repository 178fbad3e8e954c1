#pragma once

// Checkpoint container, version 1. All integers little-endian.
//
//   offset  size  field
//   0       8     magic "VDNCKPT\0"
//   8       4     format version (u32)
//   12      8     header length H in bytes (u64)
//   20      H     header, UTF-8 JSON: spec, seed, metadata, and a tensor
//                 directory [{name, shape, offset, count, frozen}]
//   20+H    8·N   payload: N IEEE-754 doubles, little-endian
//   end-8   8     FNV-1a 64 checksum over header and payload bytes (u64)
//
// Tensor offsets and counts are in doubles, relative to the payload start.
// Frozen flags are stored in the directory as lists of element indices.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "vdn/network.hpp"

namespace vdn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  int epoch = 0;
  double omega = 0.0;
  std::uint64_t seed = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::map<std::string, std::string> extra;

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  Network network;
  CheckpointMeta meta;
};

void save(const Network& net, const CheckpointMeta& meta, const std::filesystem::path& path);
/// Throws CheckpointError on missing, truncated, corrupt or version-mismatched files.
Checkpoint load(const std::filesystem::path& path);

std::string serialize(const Network& net, const CheckpointMeta& meta);
Checkpoint deserialize(const std::string& bytes);

}  // namespace vdn
