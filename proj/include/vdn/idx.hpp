#pragma once

// IDX ingestion. Images: magic 0x00000803, u32 count, u32 rows, u32 cols,
// then count·rows·cols unsigned bytes. Labels: magic 0x00000801, u32 count,
// then count unsigned bytes. Header integers are big-endian.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "vdn/dataset.hpp"
#include "vdn/error.hpp"

namespace vdn {

enum class IdxFault {
  image_magic,
  label_magic,
  truncated_header,
  truncated_images,
  truncated_labels,
  count_mismatch,
};

std::string_view to_string(IdxFault f);

class IdxError : public Error {
 public:
  IdxError(IdxFault fault, std::string file, std::size_t offset, const std::string& detail);
  IdxFault fault() const noexcept { return fault_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  IdxFault fault_;
  std::size_t offset_;
};

struct IdxOptions {
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
};

/// Pixels are scaled to [0, 1], then standardized per feature with mean and
/// standard deviation taken from the train split only.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const IdxOptions& options = {});
Dataset parse_idx(std::string_view images, std::string_view labels, const IdxOptions& options = {},
                  const std::string& image_name = "images", const std::string& label_name = "labels");

}  // namespace vdn
