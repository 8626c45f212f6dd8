#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dida/model/fusion.hpp"

namespace dida {

enum class Variant { kFull, kFixedLambda, kBase, kElbo, kWoSha, kWoSpe, kWoInd, kTransferInd };

inline constexpr Variant kAllVariants[] = {Variant::kFull,  Variant::kFixedLambda, Variant::kBase,
                                           Variant::kElbo,  Variant::kWoSha,       Variant::kWoSpe,
                                           Variant::kWoInd, Variant::kTransferInd};

Variant parse_variant(const std::string& name);  // ConfigError on unknown
const char* variant_name(Variant v);

struct RunConfig {
  std::size_t k = 64;
  std::size_t layers = 2;
  double mixup_alpha = 1.0;
  // Constant lambda; set by the fixed_lambda variant (0.5) or explicitly.
  std::optional<double> fixed_lambda;
  double mu1 = 1.0;
  double mu2 = 1.0;
  double gamma = 1e-4;
  double lr = 0.001;
  std::size_t batch_size = 1024;
  std::size_t epochs = 100;
  std::size_t neg_ratio = 7;
  std::size_t eval_negatives = 999;
  std::size_t top_k = 10;
  FusionStrategy fusion = FusionStrategy::kAttention;
  Variant variant = Variant::kFull;
  std::uint64_t seed = 0;
  bool alternating = false;
  // 0 lets OpenMP decide.
  int eval_threads = 0;

  // Throws ConfigError on out-of-range values or a variant/fusion clash.
  void validate() const;
  // Lambda used when mixing at evaluation time and, if fixed, in training.
  double eval_lambda() const { return fixed_lambda.value_or(0.5); }

  // One key=value line per field, parseable by parse_run_config.
  std::string to_text() const;
};

// Applies key=value overrides on top of `base`. Unknown keys, duplicate keys
// and malformed values throw ConfigError.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
// Single override, as used by sweeps and the CLI.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace dida
