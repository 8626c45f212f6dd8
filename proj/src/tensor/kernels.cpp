#include "dida/tensor/kernels.hpp"

#include <cmath>

#include "dida/error.hpp"

#ifdef DIDA_HAVE_OPENMP
#include <omp.h>
#endif

namespace dida::kernels {

namespace {
using Index = std::ptrdiff_t;

DenseMatrix transposed(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  const std::size_t rows = a.rows(), cols = a.cols();
  const double* ad = a.data();
  double* td = t.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) td[c * rows + r] = ad[r * cols + c];
  return t;
}
}  // namespace

int max_threads() {
#ifdef DIDA_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_num_threads(int n) {
#ifdef DIDA_HAVE_OPENMP
  omp_set_num_threads(n < 1 ? 1 : n);
#else
  (void)n;
#endif
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require_shape(a.cols() == b.rows(), "matmul", a, b);
  DenseMatrix c(a.rows(), b.cols());
  const std::size_t inner = a.cols(), width = b.cols();
  const Index rows = static_cast<Index>(a.rows());
  const double* ad = a.data();
  const double* bd = b.data();
  double* cd = c.data();
#pragma omp parallel for schedule(static) if (rows * inner * width > 32768)
  for (Index i = 0; i < rows; ++i) {
    double* out = cd + i * width;
    const double* arow = ad + i * inner;
    for (std::size_t t = 0; t < inner; ++t) {
      const double av = arow[t];
      if (av == 0.0) continue;
      const double* brow = bd + t * width;
      for (std::size_t j = 0; j < width; ++j) out[j] += av * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require_shape(a.rows() == b.rows(), "matmul_tn", a, b);
  // Row i of the result walks column i of A; a transposed copy keeps that
  // walk contiguous. Accumulation order per entry is unchanged.
  const DenseMatrix at = transposed(a);
  DenseMatrix c(a.cols(), b.cols());
  const std::size_t width = b.cols(), inner = a.rows();
  const Index out_rows = static_cast<Index>(a.cols());
  const double* ad = at.data();
  const double* bd = b.data();
  double* cd = c.data();
#pragma omp parallel for schedule(static) if (out_rows * inner * width > 32768)
  for (Index i = 0; i < out_rows; ++i) {
    double* out = cd + i * width;
    const double* arow = ad + i * inner;
    for (std::size_t r = 0; r < inner; ++r) {
      const double av = arow[r];
      if (av == 0.0) continue;
      const double* brow = bd + r * width;
      for (std::size_t j = 0; j < width; ++j) out[j] += av * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  require_shape(a.cols() == b.cols(), "matmul_nt", a, b);
  // Same sums as the dot-product form, laid out as row updates so the inner
  // loop vectorizes.
  const DenseMatrix bt = transposed(b);
  DenseMatrix c(a.rows(), b.rows());
  const std::size_t inner = a.cols(), width = b.rows();
  const Index rows = static_cast<Index>(a.rows());
  const double* ad = a.data();
  const double* bd = bt.data();
  double* cd = c.data();
#pragma omp parallel for schedule(static) if (rows * inner * width > 32768)
  for (Index i = 0; i < rows; ++i) {
    double* out = cd + i * width;
    const double* arow = ad + i * inner;
    for (std::size_t t = 0; t < inner; ++t) {
      const double av = arow[t];
      const double* brow = bd + t * width;
      for (std::size_t j = 0; j < width; ++j) out[j] += av * brow[j];
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
  const Index rows = static_cast<Index>(s.rows());
  const auto rp = s.row_ptr();
  const auto ci = s.col_idx();
  const auto v = s.values();
  const double* xd = x.data();
  double* cd = c.data();
#pragma omp parallel for schedule(static) if (s.nnz() * width > 32768)
  for (Index i = 0; i < rows; ++i) {
    double* out = cd + i * width;
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
      const double* xrow = xd + ci[p] * width;
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
  const Index rows = static_cast<Index>(a.rows());
  const std::size_t width = a.cols();
  std::size_t n_clamped = 0;
#pragma omp parallel for schedule(static) reduction(+ : n_clamped) if (rows * width > 32768)
  for (Index i = 0; i < rows; ++i) {
    const double* ar = a.data() + i * width;
    const double* br = b.data() + i * width;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t t = 0; t < width; ++t) {
      dot += ar[t] * br[t];
      na += ar[t] * ar[t];
      nb += br[t] * br[t];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < eps) { na = eps; ++n_clamped; }
    if (nb < eps) { nb = eps; ++n_clamped; }
    out[static_cast<std::size_t>(i)] = dot / (na * nb);
  }
  if (clamped) *clamped = n_clamped;
  return out;
}

}  // namespace dida::kernels
