#pragma once

#include <span>
#include <string>
#include <vector>

#include "dida/model/init.hpp"
#include "dida/tensor/tape.hpp"

namespace dida {

enum class FusionStrategy { kConcat, kSum, kAttention };

FusionStrategy parse_fusion(const std::string& name);  // ConfigError on unknown
const char* fusion_name(FusionStrategy s);

// Width of the fused user representation for `components` codes of width k.
std::size_t fused_width(FusionStrategy s, std::size_t components, std::size_t k);

// Attention parameters: one k x k projection per component and the k x c
// scoring matrix. Empty for concat and sum.
struct FusionWeights {
  std::vector<Parameter> w;
  Parameter w_s;

  static FusionWeights init(const std::string& prefix, FusionStrategy s,
                            std::size_t components, std::size_t k, Rng& rng);
  void collect(ParamList& out);
};

// Per-user weights over the components: softmax(LeakyReLU(sum_c Z_c W_c) W_s).
Var attention_weights(std::span<const Var> codes, FusionWeights& weights);
// concat: Z_1 | ... | Z_c; sum: Z_1 + ... + Z_c; attention: sum_c C[:,c] * Z_c.
Var fuse(std::span<const Var> codes, FusionStrategy s, FusionWeights& weights);

// Bias-free MLP, LeakyReLU after every layer.
struct Tower {
  std::vector<Parameter> w;

  static Tower init(const std::string& prefix, std::span<const std::size_t> widths, Rng& rng);
  std::size_t in_width() const { return w.front().value.rows(); }
  std::size_t out_width() const { return w.back().value.cols(); }
  void collect(ParamList& out);
};

Var tower_forward(Var x, Tower& tower);

// Cosine between S row i and T row i.
Var predict(Var s_rows, Var t_rows);

// Mean binary cross-entropy of p = (yhat + 1) / 2 against the labels, plus
// gamma (|S|^2 + |T|^2) / pairs over the per-pair tower rows.
Var loss_prd(Var yhat, std::span<const double> labels, Var s_rows, Var t_rows, double gamma);

}  // namespace dida
