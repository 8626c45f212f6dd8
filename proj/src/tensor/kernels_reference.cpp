#include <algorithm>
#include <cmath>

#include "dida/error.hpp"
#include "dida/tensor/kernels.hpp"

namespace dida::kernels::reference {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require_shape(a.cols() == b.rows(), "matmul", a, b);
  DenseMatrix c(a.rows(), b.cols());
  const std::size_t inner = a.cols(), width = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out = c.data() + i * width;
    for (std::size_t t = 0; t < inner; ++t) {
      const double av = a(i, t);
      if (av == 0.0) continue;
      const double* brow = b.data() + t * width;
      for (std::size_t j = 0; j < width; ++j) out[j] += av * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require_shape(a.rows() == b.rows(), "matmul_tn", a, b);
  DenseMatrix c(a.cols(), b.cols());
  const std::size_t width = b.cols();
  for (std::size_t i = 0; i < a.cols(); ++i) {
    double* out = c.data() + i * width;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      const double av = a(r, i);
      if (av == 0.0) continue;
      const double* brow = b.data() + r * width;
      for (std::size_t j = 0; j < width; ++j) out[j] += av * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  require_shape(a.cols() == b.cols(), "matmul_nt", a, b);
  DenseMatrix c(a.rows(), b.rows());
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.data() + i * inner;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.data() + j * inner;
      double s = 0.0;
      for (std::size_t t = 0; t < inner; ++t) s += arow[t] * brow[t];
      c(i, j) = s;
    }
  }
  return c;
}

DenseMatrix spmm(const CsrMatrix& s, const DenseMatrix& x) {
  if (s.cols() != x.rows()) {
    throw ShapeError("spmm: sparse " + std::to_string(s.rows()) + "x" +
                     std::to_string(s.cols()) + " vs dense " + x.shape_str());
  }
  DenseMatrix c(s.rows(), x.cols());
  const std::size_t width = x.cols();
  const auto rp = s.row_ptr();
  const auto ci = s.col_idx();
  const auto v = s.values();
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double* out = c.data() + i * width;
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
      const double* xrow = x.data() + ci[p] * width;
      const double w = v[p];
      for (std::size_t j = 0; j < width; ++j) out[j] += w * xrow[j];
    }
  }
  return c;
}

std::vector<double> row_cosine(const DenseMatrix& a, const DenseMatrix& b, double eps,
                               std::size_t* clamped) {
  require_shape(a.same_shape(b), "row_cosine", a, b);
  std::vector<double> out(a.rows());
  std::size_t n_clamped = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t t = 0; t < a.cols(); ++t) {
      dot += a(i, t) * b(i, t);
      na += a(i, t) * a(i, t);
      nb += b(i, t) * b(i, t);
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < eps) { na = eps; ++n_clamped; }
    if (nb < eps) { nb = eps; ++n_clamped; }
    out[i] = dot / (na * nb);
  }
  if (clamped) *clamped = n_clamped;
  return out;
}

}  // namespace dida::kernels::reference
