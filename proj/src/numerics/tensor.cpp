#include "numerics/tensor.hpp"

#include "common/error.hpp"

namespace clinbench::numerics {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {
void check_positive(const Shape& shape) {
  for (std::size_t d : shape) {
    require(d > 0, ErrorKind::Dimension, "shape " + to_string(shape) + " has a zero dimension");
  }
}
}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_positive(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : Tensor(Adopt{}, std::move(shape), Buffer(data.begin(), data.end())) {}

Tensor::Tensor(Adopt, Shape shape, Buffer data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_positive(shape_);
  require(shape_size(shape_) == data_.size(), ErrorKind::Dimension,
          "shape " + to_string(shape_) + " does not match " + std::to_string(data_.size()) + " values");
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  require(rows.size() > 0, ErrorKind::Dimension, "matrix needs at least one row");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    require(row.size() == cols, ErrorKind::Dimension, "ragged matrix rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

double Tensor::item() const {
  require(data_.size() == 1, ErrorKind::Contract, "item() on tensor of shape " + to_string(shape_));
  return data_[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  require(rank() == 2, ErrorKind::Dimension, "at(row, col) needs a matrix, got " + to_string(shape_));
  return data_.at(row * shape_[1] + col);
}

Tensor Tensor::reshaped(Shape shape) const {
  require(shape_size(shape) == data_.size(), ErrorKind::Dimension,
          "cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  return Tensor(Adopt{}, std::move(shape), data_);
}

}  // namespace clinbench::numerics
