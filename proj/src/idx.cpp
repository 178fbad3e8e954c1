#include "vdn/idx.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace vdn {

std::string_view to_string(IdxFault f) {
  switch (f) {
    case IdxFault::image_magic: return "bad image magic";
    case IdxFault::label_magic: return "bad label magic";
    case IdxFault::truncated_header: return "truncated header";
    case IdxFault::truncated_images: return "truncated image payload";
    case IdxFault::truncated_labels: return "truncated label payload";
    case IdxFault::count_mismatch: return "image/label count mismatch";
  }
  return "unknown";
}

IdxError::IdxError(IdxFault fault, std::string file, std::size_t offset, const std::string& detail)
    : Error("idx " + file + " @ byte " + std::to_string(offset) + ": " +
            std::string(to_string(fault)) + " (" + detail + ")"),
      fault_(fault),
      offset_(offset) {}

namespace {

std::uint32_t be32(std::string_view b, std::size_t at) {
  return (std::uint32_t(static_cast<unsigned char>(b[at])) << 24) |
         (std::uint32_t(static_cast<unsigned char>(b[at + 1])) << 16) |
         (std::uint32_t(static_cast<unsigned char>(b[at + 2])) << 8) |
         std::uint32_t(static_cast<unsigned char>(b[at + 3]));
}

std::string hex(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int i = 7; i >= 0; --i) s.push_back(digits[(v >> (4 * i)) & 0xf]);
  return s;
}

std::string fnv1a(std::string_view b) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : b) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (int i = 15; i >= 0; --i) s.push_back(digits[(h >> (4 * i)) & 0xf]);
  return s;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset parse_idx(std::string_view images, std::string_view labels, const IdxOptions& options,
                  const std::string& image_name, const std::string& label_name) {
  // Magic first: a short file with the wrong leading bytes is a magic fault.
  if (images.size() < 4)
    throw IdxError(IdxFault::truncated_header, image_name, images.size(), "need 16 header bytes");
  if (be32(images, 0) != 0x00000803u)
    throw IdxError(IdxFault::image_magic, image_name, 0,
                   "expected 0x00000803, found " + hex(be32(images, 0)));
  if (images.size() < 16)
    throw IdxError(IdxFault::truncated_header, image_name, images.size(), "need 16 header bytes");
  if (labels.size() < 4)
    throw IdxError(IdxFault::truncated_header, label_name, labels.size(), "need 8 header bytes");
  if (be32(labels, 0) != 0x00000801u)
    throw IdxError(IdxFault::label_magic, label_name, 0,
                   "expected 0x00000801, found " + hex(be32(labels, 0)));
  if (labels.size() < 8)
    throw IdxError(IdxFault::truncated_header, label_name, labels.size(), "need 8 header bytes");

  const std::size_t count = be32(images, 4), rows = be32(images, 8), cols = be32(images, 12);
  const std::size_t label_count = be32(labels, 4);
  if (count != label_count)
    throw IdxError(IdxFault::count_mismatch, label_name, 4,
                   std::to_string(count) + " images vs " + std::to_string(label_count) + " labels");
  const std::size_t pixels = rows * cols;
  if (count == 0 || pixels == 0)
    throw IdxError(IdxFault::truncated_header, image_name, 4, "zero-sized dimension");
  const std::size_t need_images = 16 + count * pixels;
  if (images.size() < need_images)
    throw IdxError(IdxFault::truncated_images, image_name, images.size(),
                   "expected " + std::to_string(need_images) + " bytes");
  const std::size_t need_labels = 8 + count;
  if (labels.size() < need_labels)
    throw IdxError(IdxFault::truncated_labels, label_name, labels.size(),
                   "expected " + std::to_string(need_labels) + " bytes");

  Dataset data;
  data.features = Tensor({count, pixels});
  data.labels.resize(count);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    data.labels[i] = static_cast<unsigned char>(labels[8 + i]);
    max_label = std::max(max_label, data.labels[i]);
    for (std::size_t j = 0; j < pixels; ++j)
      data.features(i, j) = static_cast<unsigned char>(images[16 + i * pixels + j]) / 255.0;
  }
  data.classes = std::max<std::size_t>(2, max_label + 1);
  data.provenance = "idx " + image_name + " (fnv1a " + fnv1a(images) + ") + " + label_name +
                    " (fnv1a " + fnv1a(labels) + ")";
  stratified_split(data, options.train_fraction, options.split_seed);

  for (std::size_t j = 0; j < pixels; ++j) {
    double mean = 0.0;
    for (auto i : data.train) mean += data.features(i, j);
    mean /= static_cast<double>(data.train.size());
    double var = 0.0;
    for (auto i : data.train) var += (data.features(i, j) - mean) * (data.features(i, j) - mean);
    var /= static_cast<double>(data.train.size());
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < count; ++i) data.features(i, j) = (data.features(i, j) - mean) / sd;
  }
  data.validate();
  return data;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const IdxOptions& options) {
  const std::string img = read_file(images), lab = read_file(labels);
  return parse_idx(img, lab, options, images.string(), labels.string());
}

}  // namespace vdn
