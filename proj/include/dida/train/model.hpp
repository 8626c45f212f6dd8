#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "dida/data/dataset.hpp"
#include "dida/model/disentanglement.hpp"
#include "dida/model/fusion.hpp"
#include "dida/model/graph_encoder.hpp"
#include "dida/tensor/adam.hpp"
#include "dida/train/config.hpp"

namespace dida {

// Linear decoder of the ELBO variant: k -> (l+1)k.
struct Decoder {
  Parameter w, b;
  void collect(ParamList& out);
};

// Everything one domain owns.
struct DomainModel {
  GcnWeights gcn;
  DisentangleWeights encoder;  // unused by the base variant
  FusionWeights fusion;
  Tower user_tower;
  Tower item_tower;
  Decoder decoder;  // elbo only
};

// Which codes feed each domain's fusion, in order.
enum class Code { kSpecific, kIndependent, kShared, kOtherIndependent };
std::vector<Code> fusion_codes(Variant v);

// Full parameter set of one run. The parameter census is fixed here; the
// training loop never adds or removes parameters.
class Model {
 public:
  Model(const RunConfig& config, std::size_t num_users, std::size_t items_a, std::size_t items_b);
  Model(const Model& other);
  Model(Model&& other) noexcept;
  Model& operator=(Model other) noexcept;

  const RunConfig& config() const { return config_; }
  // Evaluation parallelism does not affect results, so it may change after
  // training or loading.
  void set_eval_threads(int threads) { config_.eval_threads = threads; }
  std::size_t num_users() const { return num_users_; }
  std::size_t num_items(int d) const { return num_items_[static_cast<std::size_t>(d)]; }
  std::size_t embedding_width() const { return (config_.layers + 1) * config_.k; }
  bool disentangled() const { return config_.variant != Variant::kBase; }
  bool elbo() const { return config_.variant == Variant::kElbo; }

  DomainModel& domain(int d) { return domains_[static_cast<std::size_t>(d)]; }
  DisentangleWeights& aug_encoder() { return aug_encoder_; }
  Decoder& aug_decoder() { return aug_decoder_; }
  DomainClassifier& classifier() { return classifier_; }

  // Stable order, used by Adam and serialization.
  const ParamList& parameters() const { return params_; }
  std::size_t parameter_count() const;
  void zero_grad();

  // Binary dump: config text, dimensions, then (name, shape, values) per
  // parameter. load() checks names and shapes against the configuration.
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  void collect_params();

  RunConfig config_;
  std::size_t num_users_;
  std::array<std::size_t, 2> num_items_;
  std::array<DomainModel, 2> domains_;
  DisentangleWeights aug_encoder_;
  Decoder aug_decoder_;
  DomainClassifier classifier_;
  ParamList params_;
};

// Per-domain normalized adjacency of the train interactions.
struct DomainGraphs {
  std::array<NormalizedAdjacency, 2> adj;
  static DomainGraphs build(const PreparedData& data);
};

struct BatchPair {
  std::array<std::vector<LabeledPair>, 2> pairs;
};

enum class LossMode { kJoint, kDomainA, kDomainB };

struct LossTerms {
  Var total;
  Var prd[2];
  Var cls1;  // elbo variant: KL term
  Var cls2;  // elbo variant: reconstruction term
};

// One training forward pass over a batch pair. `noise_seed` seeds one noise
// stream per encoder branch. kDomainA / kDomainB drop the other domain's
// prediction loss (alternating mode).
LossTerms total_loss(Tape& tape, Model& model, const DomainGraphs& graphs, const BatchPair& batch,
                     double lambda, std::uint64_t noise_seed, LossMode mode = LossMode::kJoint);

// Deterministic tower outputs for every user and item (encoder means,
// lambda = config().eval_lambda()).
struct Representations {
  std::array<DenseMatrix, 2> users;  // m x k
  std::array<DenseMatrix, 2> items;  // n_d x k
};
Representations infer(Model& model, const DomainGraphs& graphs);

}  // namespace dida
