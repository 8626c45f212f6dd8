#pragma once

#include <span>
#include <vector>

#include "dida/data/dataset.hpp"
#include "dida/model/init.hpp"
#include "dida/tensor/tape.hpp"

namespace dida {

// D^{-1/2} ([[0, R], [R^T, 0]] + I) D^{-1/2} over users then items. Items
// without train interactions keep only their self-loop.
struct NormalizedAdjacency {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  SparseOperator op;

  std::size_t size() const { return num_users + num_items; }
  const CsrMatrix& matrix() const { return op.forward; }
};

NormalizedAdjacency build_bipartite_adjacency(const InteractionSet& train);
// Same construction from raw pairs; used by tests on hand-made graphs.
NormalizedAdjacency build_bipartite_adjacency(std::size_t num_users, std::size_t num_items,
                                              std::span<const Interaction> pairs);

struct GcnWeights {
  Parameter e0;                 // (m+n) x k
  std::vector<Parameter> w;     // l of k x k
  std::vector<Parameter> b;     // l of 1 x k

  static GcnWeights init(const std::string& prefix, std::size_t nodes, std::size_t k,
                         std::size_t layers, Rng& rng);
  std::size_t layers() const { return w.size(); }
  std::size_t k() const { return e0.value.cols(); }
  void collect(ParamList& out);
};

// [E_0, E_1, ..., E_l] with E_l = ReLU(A E_{l-1} W_l + b_l).
std::vector<Var> propagate(Tape& tape, const NormalizedAdjacency& adj, GcnWeights& weights);

struct NodeEmbeddings {
  Var users;  // m x (l+1)k
  Var items;  // n x (l+1)k
};

// E_0 | E_1 | ... | E_l, split after the first `num_users` rows.
NodeEmbeddings assemble_node_embeddings(std::span<const Var> layers, std::size_t num_users);

}  // namespace dida
