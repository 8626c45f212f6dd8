#include "dida/tensor/dense.hpp"

#include <algorithm>
#include <cmath>

#include "dida/error.hpp"

namespace dida {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("DenseMatrix: data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("DenseMatrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string DenseMatrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void DenseMatrix::add_scaled(const DenseMatrix& other, double alpha) {
  require_shape(same_shape(other), "add_scaled", *this, other);
  const double* src = other.data();
  double* dst = data_.data();
  for (std::size_t i = 0, n = data_.size(); i < n; ++i) dst[i] += alpha * src[i];
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double DenseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

void require_shape(bool ok, const char* what, const DenseMatrix& a, const DenseMatrix& b) {
  if (!ok) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

}  // namespace dida
