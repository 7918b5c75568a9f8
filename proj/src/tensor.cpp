#include "lptgnn/tensor.hpp"

#include <cmath>
#include <sstream>

#include "lptgnn/errors.hpp"

namespace lptgnn {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

std::vector<std::int64_t> row_major_strides(const Shape& shape) {
  std::vector<std::int64_t> strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    strides[i] = strides[i + 1] * shape[i + 1];
  return strides;
}

bool advance_index(std::vector<std::int64_t>& idx, const Shape& shape) {
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    if (++idx[static_cast<std::size_t>(i)] < shape[static_cast<std::size_t>(i)]) return true;
    idx[static_cast<std::size_t>(i)] = 0;
  }
  return false;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size()))
    throw ShapeError("data size " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t((Shape{}));
  t.data_.assign(1, value);
  return t;
}

std::int64_t Tensor::dim(int i) const {
  if (i < 0 || i >= rank())
    throw ShapeError("mode " + std::to_string(i) + " out of range for shape " + shape_str(shape_));
  return shape_[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::flat_index(std::initializer_list<std::int64_t> idx) const {
  if (static_cast<int>(idx.size()) != rank())
    throw ShapeError("index rank " + std::to_string(idx.size()) +
                     " does not match tensor shape " + shape_str(shape_));
  std::int64_t flat = 0;
  int i = 0;
  for (std::int64_t v : idx) {
    if (v < 0 || v >= shape_[static_cast<std::size_t>(i)])
      throw ShapeError("index out of range for shape " + shape_str(shape_));
    flat = flat * shape_[static_cast<std::size_t>(i)] + v;
    ++i;
  }
  return flat;
}

double& Tensor::at(std::initializer_list<std::int64_t> idx) {
  return data_[static_cast<std::size_t>(flat_index(idx))];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
  return data_[static_cast<std::size_t>(flat_index(idx))];
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (shape_numel(new_shape) != numel())
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(new_shape));
  Tensor t;
  t.shape_ = std::move(new_shape);
  t.data_ = data_;
  return t;
}

void Tensor::fill(double value) { data_.assign(data_.size(), value); }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::add_(const Tensor& other) {
  if (!same_shape(other))
    throw ShapeError("add_ shape mismatch: " + shape_str(shape_) + " vs " + shape_str(other.shape_));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Tensor::scale_(double factor) {
  for (double& v : data_) v *= factor;
}

}  // namespace lptgnn
