#include "dida/tensor/sparse.hpp"

#include <algorithm>
#include <cmath>

#include "dida/error.hpp"

namespace dida {

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrMatrix m(rows, cols);
  m.col_idx_.reserve(triplets.size());
  m.values_.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (t.row >= rows || t.col >= cols) {
      throw ContractError("CsrMatrix: entry (" + std::to_string(t.row) + "," +
                          std::to_string(t.col) + ") out of bounds");
    }
    if (i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
      throw ContractError("CsrMatrix: duplicate entry (" + std::to_string(t.row) + "," +
                          std::to_string(t.col) + ")");
    }
    if (!std::isfinite(t.value)) throw ContractError("CsrMatrix: non-finite value");
    m.row_ptr_[t.row + 1]++;
    m.col_idx_.push_back(t.col);
    m.values_.push_back(t.value);
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

double CsrMatrix::at(std::size_t r, std::size_t c) const {
  auto begin = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  auto end = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  auto it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

CsrMatrix CsrMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      t.push_back({col_idx_[p], r, values_[p]});
    }
  }
  return from_triplets(cols_, rows_, std::move(t));
}

DenseMatrix CsrMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) d(r, col_idx_[p]) = values_[p];
  }
  return d;
}

}  // namespace dida
