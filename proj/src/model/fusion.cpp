#include "dida/model/fusion.hpp"

#include "dida/error.hpp"

namespace dida {

FusionStrategy parse_fusion(const std::string& name) {
  if (name == "concat") return FusionStrategy::kConcat;
  if (name == "sum") return FusionStrategy::kSum;
  if (name == "attention") return FusionStrategy::kAttention;
  throw ConfigError("unknown fusion strategy '" + name + "' (concat, sum, attention)");
}

const char* fusion_name(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kConcat: return "concat";
    case FusionStrategy::kSum: return "sum";
    case FusionStrategy::kAttention: return "attention";
  }
  return "?";
}

std::size_t fused_width(FusionStrategy s, std::size_t components, std::size_t k) {
  return s == FusionStrategy::kConcat ? components * k : k;
}

FusionWeights FusionWeights::init(const std::string& prefix, FusionStrategy s,
                                  std::size_t components, std::size_t k, Rng& rng) {
  FusionWeights f;
  if (s != FusionStrategy::kAttention) return f;
  for (std::size_t c = 0; c < components; ++c)
    f.w.push_back(gaussian_parameter(prefix + ".w" + std::to_string(c + 1), k, k, rng));
  f.w_s = gaussian_parameter(prefix + ".w_s", k, components, rng);
  return f;
}

void FusionWeights::collect(ParamList& out) {
  for (auto& p : w) out.push_back(&p);
  if (!w.empty()) out.push_back(&w_s);
}

Var attention_weights(std::span<const Var> codes, FusionWeights& weights) {
  if (codes.size() != weights.w.size())
    throw ContractError("attention: " + std::to_string(codes.size()) + " codes for " +
                        std::to_string(weights.w.size()) + " projections");
  Tape& t = *codes[0].tape();
  Var acc = matmul(codes[0], t.parameter(weights.w[0]));
  for (std::size_t c = 1; c < codes.size(); ++c)
    acc = add(acc, matmul(codes[c], t.parameter(weights.w[c])));
  return softmax_rows(matmul(leaky_relu(acc), t.parameter(weights.w_s)));
}

Var fuse(std::span<const Var> codes, FusionStrategy s, FusionWeights& weights) {
  if (codes.empty()) throw ContractError("fuse: no codes");
  for (const Var& c : codes)
    if (!c.value().same_shape(codes[0].value()))
      throw ShapeError("fuse: codes " + c.value().shape_str() + " vs " + codes[0].value().shape_str());
  switch (s) {
    case FusionStrategy::kConcat:
      return codes.size() == 1 ? codes[0] : concat_cols(codes);
    case FusionStrategy::kSum: {
      Var acc = codes[0];
      for (std::size_t c = 1; c < codes.size(); ++c) acc = add(acc, codes[c]);
      return acc;
    }
    case FusionStrategy::kAttention: {
      Var weights_c = attention_weights(codes, weights);
      Var acc = row_scale(codes[0], column(weights_c, 0));
      for (std::size_t c = 1; c < codes.size(); ++c)
        acc = add(acc, row_scale(codes[c], column(weights_c, c)));
      return acc;
    }
  }
  throw ConfigError("fuse: bad strategy");
}

Tower Tower::init(const std::string& prefix, std::span<const std::size_t> widths, Rng& rng) {
  if (widths.size() < 2) throw ContractError("tower needs at least two widths");
  Tower t;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    t.w.push_back(gaussian_parameter(prefix + ".w" + std::to_string(l + 1), widths[l],
                                     widths[l + 1], rng));
  return t;
}

void Tower::collect(ParamList& out) {
  for (auto& p : w) out.push_back(&p);
}

Var tower_forward(Var x, Tower& tower) {
  Tape& t = *x.tape();
  if (x.cols() != tower.in_width())
    throw ShapeError("tower: input width " + std::to_string(x.cols()) + ", expects " +
                     std::to_string(tower.in_width()));
  for (auto& w : tower.w) x = leaky_relu(matmul(x, t.parameter(w)));
  return x;
}

Var predict(Var s_rows, Var t_rows) { return row_cosine(s_rows, t_rows); }

Var loss_prd(Var yhat, std::span<const double> labels, Var s_rows, Var t_rows, double gamma) {
  if (gamma < 0.0) throw ContractError("loss_prd: gamma < 0");
  Var bce = binary_cross_entropy(affine_scalar(yhat, 0.5, 0.5), labels);
  if (gamma == 0.0) return bce;
  const double per_pair = gamma / static_cast<double>(yhat.rows());
  return add(bce, scale(add(frobenius_sq(s_rows), frobenius_sq(t_rows)), per_pair));
}

}  // namespace dida
