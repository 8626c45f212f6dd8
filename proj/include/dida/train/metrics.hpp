#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dida/data/dataset.hpp"
#include "dida/tensor/dense.hpp"
#include "dida/train/config.hpp"

namespace dida {

// 1-based rank of the held-out score among itself and the negatives. Ties
// and NaN negatives count against the held-out item; a NaN held-out score
// ranks last.
std::size_t pessimistic_rank(double held_out, std::span<const double> negatives);

double hit_at(std::size_t rank, std::size_t k);   // 1 if rank <= k
double ndcg_at(std::size_t rank, std::size_t k);  // 1/log2(rank+1) if rank <= k

struct DomainMetrics {
  double hr = 0.0;
  double ndcg = 0.0;
  std::size_t users = 0;
  std::vector<std::size_t> ranks;  // per test entry, in test order
};

// Ranks every test entry against its candidates by cosine of the tower
// outputs. Parallel over entries; the result does not depend on `threads`.
DomainMetrics rank_candidates(const DenseMatrix& user_repr, const DenseMatrix& item_repr,
                              const std::vector<TestEntry>& test,
                              const std::vector<std::vector<std::size_t>>& candidates,
                              std::size_t top_k, int threads = 0);

struct EvalReport {
  std::array<DomainMetrics, 2> domain;
  RunConfig config;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;

  // key=value document; per-user ranks included when `with_ranks`.
  std::string to_text(bool with_ranks = true) const;
  // Metrics, ranks and seed; ignores wall-clock time and the config echo.
  bool same_result(const EvalReport& other) const;
};

}  // namespace dida
