#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vdn {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient slot of the
/// same shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  /// Extents of a 2-D tensor. A 1-D tensor reads as a single row.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  bool has_grad() const noexcept { return !grad_.empty(); }
  /// Gradient slot, allocated (zero-filled) on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad() const noexcept { return grad_; }
  void zero_grad();
  void drop_grad() noexcept { grad_.clear(); }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
};

/// A trainable tensor. Elements flagged in `frozen` are never updated by the
/// optimizer; an empty mask means nothing is frozen.
struct Parameter {
  Tensor tensor;
  std::vector<std::uint8_t> frozen;
  bool weight_decay = true;

  bool is_frozen(std::size_t i) const { return !frozen.empty() && frozen[i] != 0; }
  std::size_t frozen_count() const;
  bool empty() const noexcept { return tensor.empty(); }
};

}  // namespace vdn
