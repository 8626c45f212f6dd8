#include "dida/model/graph_encoder.hpp"

#include <cmath>

#include "dida/error.hpp"

namespace dida {

NormalizedAdjacency build_bipartite_adjacency(std::size_t num_users, std::size_t num_items,
                                              std::span<const Interaction> pairs) {
  if (pairs.empty()) throw ContractError("adjacency: no interactions");
  const std::size_t n = num_users + num_items;
  std::vector<double> degree(n, 1.0);  // self-loop
  for (auto [u, i] : pairs) {
    if (u >= num_users || i >= num_items) throw ContractError("adjacency: index out of range");
    degree[u] += 1.0;
    degree[num_users + i] += 1.0;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t v = 0; v < n; ++v) inv_sqrt[v] = 1.0 / std::sqrt(degree[v]);

  std::vector<Triplet> t;
  t.reserve(2 * pairs.size() + n);
  for (std::size_t v = 0; v < n; ++v) t.push_back({v, v, inv_sqrt[v] * inv_sqrt[v]});
  for (auto [u, i] : pairs) {
    const std::size_t j = num_users + i;
    // Same product order both ways keeps the matrix exactly symmetric.
    const double w = inv_sqrt[u] * inv_sqrt[j];
    t.push_back({u, j, w});
    t.push_back({j, u, w});
  }
  NormalizedAdjacency adj;
  adj.num_users = num_users;
  adj.num_items = num_items;
  adj.op = SparseOperator(CsrMatrix::from_triplets(n, n, std::move(t)));
  return adj;
}

NormalizedAdjacency build_bipartite_adjacency(const InteractionSet& train) {
  return build_bipartite_adjacency(train.num_users(), train.num_items(), train.pairs);
}

GcnWeights GcnWeights::init(const std::string& prefix, std::size_t nodes, std::size_t k,
                            std::size_t layers, Rng& rng) {
  if (layers == 0) throw ConfigError("GCN needs at least one layer");
  GcnWeights g;
  g.e0 = gaussian_parameter(prefix + ".e0", nodes, k, rng);
  for (std::size_t l = 1; l <= layers; ++l) {
    g.w.push_back(gaussian_parameter(prefix + ".w" + std::to_string(l), k, k, rng));
    g.b.push_back(gaussian_parameter(prefix + ".b" + std::to_string(l), 1, k, rng));
  }
  return g;
}

void GcnWeights::collect(ParamList& out) {
  out.push_back(&e0);
  for (std::size_t l = 0; l < w.size(); ++l) {
    out.push_back(&w[l]);
    out.push_back(&b[l]);
  }
}

std::vector<Var> propagate(Tape& tape, const NormalizedAdjacency& adj, GcnWeights& weights) {
  if (weights.e0.value.rows() != adj.size())
    throw ShapeError("propagate: E0 has " + std::to_string(weights.e0.value.rows()) +
                     " rows, graph has " + std::to_string(adj.size()) + " nodes");
  std::vector<Var> layers{tape.parameter(weights.e0)};
  for (std::size_t l = 0; l < weights.layers(); ++l) {
    Var h = spmm(adj.op, layers.back());
    layers.push_back(relu(affine(h, tape.parameter(weights.w[l]), tape.parameter(weights.b[l]))));
  }
  return layers;
}

NodeEmbeddings assemble_node_embeddings(std::span<const Var> layers, std::size_t num_users) {
  if (layers.empty()) throw ContractError("assemble: no layers");
  Var all = layers.size() == 1 ? layers[0] : concat_cols(layers);
  if (num_users > all.rows()) throw ShapeError("assemble: more users than nodes");
  return {slice_rows(all, 0, num_users), slice_rows(all, num_users, all.rows() - num_users)};
}

}  // namespace dida
