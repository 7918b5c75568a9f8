#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace lptgnn {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
// Row-major strides (innermost dimension has stride 1).
std::vector<std::int64_t> row_major_strides(const Shape& shape);
// Advances a multi-index odometer-style; false once every index was visited.
bool advance_index(std::vector<std::int64_t>& idx, const Shape& shape);

// Dense row-major tensor of doubles. Every mode extent must be positive;
// rank 0 denotes a scalar holding one element.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double& at(std::initializer_list<std::int64_t> idx);
  double at(std::initializer_list<std::int64_t> idx) const;

  // Same element count, new shape; copies metadata only.
  Tensor reshaped(Shape new_shape) const;

  void fill(double value);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  void add_(const Tensor& other);       // elementwise, same shape
  void scale_(double factor);

private:
  std::int64_t flat_index(std::initializer_list<std::int64_t> idx) const;

  Shape shape_;
  std::vector<double> data_;
};

}  // namespace lptgnn
