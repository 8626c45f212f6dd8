#pragma once

#include "dida/tensor/dense.hpp"
#include "dida/tensor/sparse.hpp"

// Dense and sparse products used by the tape.
//
// Two implementations with identical signatures live here: `dida::kernels`
// parallelizes over output rows with OpenMP, `dida::kernels::reference` is
// the plain serial loop kept as the test oracle and benchmark baseline.
// Every parallel kernel assigns each output row to exactly one thread and
// accumulates that row in the same order as the serial version, so results
// are bit-identical for any thread count.
namespace dida::kernels {

// C = A * B
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// C = A^T * B
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// C = A * B^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
// C = S * X
DenseMatrix spmm(const CsrMatrix& s, const DenseMatrix& x);
// out[i] = <a_i, b_i> / (max(|a_i|, eps) * max(|b_i|, eps)); returns the
// number of clamped norms through `clamped` when non-null.
std::vector<double> row_cosine(const DenseMatrix& a, const DenseMatrix& b,
                               double eps, std::size_t* clamped = nullptr);

// Thread control for the OpenMP kernels. No-ops without OpenMP.
int max_threads();
void set_num_threads(int n);

namespace reference {
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix spmm(const CsrMatrix& s, const DenseMatrix& x);
std::vector<double> row_cosine(const DenseMatrix& a, const DenseMatrix& b,
                               double eps, std::size_t* clamped = nullptr);
}  // namespace reference

}  // namespace dida::kernels
