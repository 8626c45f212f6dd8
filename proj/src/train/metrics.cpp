#include "dida/train/metrics.hpp"

#include <cmath>
#include <sstream>

#include "dida/error.hpp"
#include "dida/tensor/kernels.hpp"
#include "dida/tensor/tape.hpp"

#ifdef DIDA_HAVE_OPENMP
#include <omp.h>
#endif

namespace dida {

std::size_t pessimistic_rank(double held_out, std::span<const double> negatives) {
  if (std::isnan(held_out)) return negatives.size() + 1;
  std::size_t ahead = 0;
  for (double s : negatives) ahead += !(s < held_out);  // NaN compares false
  return ahead + 1;
}

double hit_at(std::size_t rank, std::size_t k) { return rank <= k ? 1.0 : 0.0; }

double ndcg_at(std::size_t rank, std::size_t k) {
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  return dot / (std::max(std::sqrt(na), kNormFloor) * std::max(std::sqrt(nb), kNormFloor));
}

}  // namespace

DomainMetrics rank_candidates(const DenseMatrix& user_repr, const DenseMatrix& item_repr,
                              const std::vector<TestEntry>& test,
                              const std::vector<std::vector<std::size_t>>& candidates,
                              std::size_t top_k, int threads) {
  if (candidates.size() != test.size()) throw ContractError("rank_candidates: candidate count");
  if (user_repr.cols() != item_repr.cols()) throw ShapeError("rank_candidates: widths differ");
  DomainMetrics out;
  out.users = test.size();
  out.ranks.assign(test.size(), 0);
  const auto n = static_cast<std::ptrdiff_t>(test.size());
#ifdef DIDA_HAVE_OPENMP
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(nt)
#else
  (void)threads;
#endif
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto& e = test[static_cast<std::size_t>(t)];
    const auto u = user_repr.row(e.user);
    const auto& cand = candidates[static_cast<std::size_t>(t)];
    std::vector<double> neg(cand.size());
    for (std::size_t c = 0; c < cand.size(); ++c) neg[c] = cosine(u, item_repr.row(cand[c]));
    out.ranks[static_cast<std::size_t>(t)] = pessimistic_rank(cosine(u, item_repr.row(e.item)), neg);
  }
  // Serial reduction in test order keeps the sums independent of threads.
  for (std::size_t r : out.ranks) {
    out.hr += hit_at(r, top_k);
    out.ndcg += ndcg_at(r, top_k);
  }
  if (out.users) {
    out.hr /= static_cast<double>(out.users);
    out.ndcg /= static_cast<double>(out.users);
  }
  return out;
}

std::string EvalReport::to_text(bool with_ranks) const {
  std::ostringstream s;
  s.precision(17);
  s << "# evaluation report\n";
  s << "seed=" << seed << "\n";
  s << "wall_seconds=" << wall_seconds << "\n";
  std::istringstream cfg(config.to_text());
  for (std::string line; std::getline(cfg, line);) s << "config." << line << "\n";
  const char* tags[] = {"a", "b"};
  for (int d = 0; d < 2; ++d) {
    const auto& m = domain[static_cast<std::size_t>(d)];
    s << "domain_" << tags[d] << ".users=" << m.users << "\n";
    s << "domain_" << tags[d] << ".hr@" << config.top_k << "=" << m.hr << "\n";
    s << "domain_" << tags[d] << ".ndcg@" << config.top_k << "=" << m.ndcg << "\n";
    if (with_ranks) {
      s << "domain_" << tags[d] << ".ranks=";
      for (std::size_t i = 0; i < m.ranks.size(); ++i) s << (i ? "," : "") << m.ranks[i];
      s << "\n";
    }
  }
  return s.str();
}

bool EvalReport::same_result(const EvalReport& o) const {
  for (std::size_t d = 0; d < 2; ++d) {
    if (domain[d].hr != o.domain[d].hr || domain[d].ndcg != o.domain[d].ndcg ||
        domain[d].ranks != o.domain[d].ranks || domain[d].users != o.domain[d].users)
      return false;
  }
  return seed == o.seed;
}

}  // namespace dida
