#include "elstm/tensor.h"

#include <algorithm>
#include <cmath>

#include "elstm/errors.h"

namespace elstm {

Tensor::Tensor(std::size_t n, double fill) : rank_(1), rows_(n), data_(n, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rank_(2), rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.rank_ = 1;
  t.rows_ = values.size();
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return vector(std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  if (values.size() != rows * cols) {
    throw DimensionError("matrix " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " given " +
                         std::to_string(values.size()) + " values");
  }
  Tensor t;
  t.rank_ = 2;
  t.rows_ = rows;
  t.cols_ = cols;
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::from_shape(std::vector<std::size_t> shape,
                          std::vector<double> values) {
  if (shape.size() == 1) {
    if (values.size() != shape[0]) {
      throw DimensionError("vector " + elstm::shape_string(shape) + " given " +
                           std::to_string(values.size()) + " values");
    }
    return vector(std::move(values));
  }
  if (shape.size() == 2) return matrix(shape[0], shape[1], std::move(values));
  throw DimensionError("unsupported tensor rank " + std::to_string(shape.size()));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::diag(std::span<const double> d) {
  Tensor t(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) t.at(i, i) = d[i];
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::vector<std::size_t> Tensor::shape() const {
  if (rank_ == 1) return {rows_};
  if (rank_ == 2) return {rows_, cols_};
  return {};
}

std::string Tensor::shape_string() const { return elstm::shape_string(shape()); }

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace elstm
