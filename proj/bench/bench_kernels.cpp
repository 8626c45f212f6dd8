// Serial reference vs OpenMP kernels on GCN-sized operands.
#include <benchmark/benchmark.h>

#include <algorithm>

#include "dida/rng.hpp"
#include "dida/tensor/kernels.hpp"

namespace {

using dida::CsrMatrix;
using dida::DenseMatrix;

DenseMatrix random_dense(std::size_t r, std::size_t c, std::uint64_t seed) {
  dida::Rng rng(seed);
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

CsrMatrix random_adjacency(std::size_t n, std::size_t per_row, std::uint64_t seed) {
  dida::Rng rng(seed);
  std::vector<dida::Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> cols;
    while (cols.size() < per_row) {
      std::size_t c = rng.below(n);
      if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    }
    for (std::size_t c : cols) t.push_back({i, c, 1.0 / static_cast<double>(per_row)});
  }
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  DenseMatrix a = random_dense(n, 64, 1), b = random_dense(64, 64, 2);
  for (auto _ : state) {
    auto c = Parallel ? dida::kernels::matmul(a, b) : dida::kernels::reference::matmul(a, b);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * 64 * 64));
}

template <bool Parallel>
void BM_MatmulTn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  DenseMatrix a = random_dense(n, 64, 3), b = random_dense(n, 64, 4);
  for (auto _ : state) {
    auto c = Parallel ? dida::kernels::matmul_tn(a, b) : dida::kernels::reference::matmul_tn(a, b);
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool Parallel>
void BM_Spmm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CsrMatrix s = random_adjacency(n, 20, 5);
  DenseMatrix x = random_dense(n, 64, 6);
  for (auto _ : state) {
    auto c = Parallel ? dida::kernels::spmm(s, x) : dida::kernels::reference::spmm(s, x);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(s.nnz() * 64));
}

template <bool Parallel>
void BM_RowCosine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  DenseMatrix a = random_dense(n, 64, 7), b = random_dense(n, 64, 8);
  for (auto _ : state) {
    auto c = Parallel ? dida::kernels::row_cosine(a, b, 1e-12)
                      : dida::kernels::reference::row_cosine(a, b, 1e-12);
    benchmark::DoNotOptimize(c.data());
  }
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_Matmul<true>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_MatmulTn<false>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_MatmulTn<true>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_Spmm<false>)->Arg(2048)->Arg(16384);
BENCHMARK(BM_Spmm<true>)->Arg(2048)->Arg(16384);
BENCHMARK(BM_RowCosine<false>)->Arg(8192);
BENCHMARK(BM_RowCosine<true>)->Arg(8192);

BENCHMARK_MAIN();
