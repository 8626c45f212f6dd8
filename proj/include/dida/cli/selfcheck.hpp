#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dida/train/model.hpp"

namespace dida {

struct CheckOutcome {
  std::string name;
  bool pass = false;
  std::string detail;  // measured value against its bound
  double seconds = 0.0;
  double measure = 0.0;  // headline number (max error for gradient checks)
};

// Every tape primitive, each inside a small weighted objective, at `points`
// random inputs per primitive. One outcome per primitive.
std::vector<CheckOutcome> check_primitive_gradients(int points = 20, std::uint64_t seed = 23);

// The 4-user / 6-item instance used by the end-to-end gradient check.
PreparedData toy_instance();
BatchPair toy_batch(const PreparedData& data);
RunConfig toy_config(Variant v);
// Fan-in scaled weights (std 1/sqrt(rows), 0.1 for vectors, classifier and
// log-sigma weights). At the default init many gradients sit below the
// finite-difference noise floor.
void condition_toy_model(Model& model, std::uint64_t seed);

inline constexpr std::uint64_t kToyPointSeed = 6;
inline constexpr double kToyLambda = 0.3;
inline constexpr std::uint64_t kToyNoiseSeed = 11;

// Full training loss of every variant against central differences.
std::vector<CheckOutcome> check_end_to_end_gradients();

// 1e5 draws at alpha 0.5, 1, 5: mean 0.5 +- 0.005, variance 1/(4(2a+1)) +- 0.003.
CheckOutcome check_beta_moments(std::uint64_t seed = 2024);

// 50 random bipartite graphs against the dense normalization and a dense
// eigendecomposition.
CheckOutcome check_adjacency_oracle(std::uint64_t seed = 5);

// 200 tie-heavy 1000-candidate vectors against a sort-based rank.
CheckOutcome check_metric_oracle(std::uint64_t seed = 1);

// cls2 = 0 and cls1 = ln 2 under a uniform classifier; cls2 = 0.5 ln(4/3)
// for a [0.25, 0.75] classifier.
CheckOutcome check_loss_fixed_points();

// Mixup at lambda 0 / 1 is bit-exact and random lambdas stay between the
// endpoints.
CheckOutcome check_mixup(std::uint64_t seed = 13);

std::vector<CheckOutcome> run_selfcheck();

}  // namespace dida
