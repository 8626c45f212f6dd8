#include "dida/train/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "dida/data/artifact.hpp"
#include "dida/error.hpp"

namespace dida {

namespace {

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("config " + key + ": not a number: '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError("config " + key + ": not a non-negative integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config " + key + ": expected true/false, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

Variant parse_variant(const std::string& name) {
  for (Variant v : kAllVariants)
    if (name == variant_name(v)) return v;
  throw ConfigError("unknown variant '" + name + "'");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kFixedLambda: return "fixed_lambda";
    case Variant::kBase: return "base";
    case Variant::kElbo: return "elbo";
    case Variant::kWoSha: return "wo_sha";
    case Variant::kWoSpe: return "wo_spe";
    case Variant::kWoInd: return "wo_ind";
    case Variant::kTransferInd: return "transfer_ind";
  }
  return "?";
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "k") c.k = to_u64(key, v);
  else if (key == "layers") c.layers = to_u64(key, v);
  else if (key == "mixup_alpha") c.mixup_alpha = to_double(key, v);
  else if (key == "fixed_lambda") {
    if (v == "none" || v.empty()) c.fixed_lambda.reset();
    else c.fixed_lambda = to_double(key, v);
  }
  else if (key == "mu1") c.mu1 = to_double(key, v);
  else if (key == "mu2") c.mu2 = to_double(key, v);
  else if (key == "gamma") c.gamma = to_double(key, v);
  else if (key == "lr") c.lr = to_double(key, v);
  else if (key == "batch_size") c.batch_size = to_u64(key, v);
  else if (key == "epochs") c.epochs = to_u64(key, v);
  else if (key == "neg_ratio") c.neg_ratio = to_u64(key, v);
  else if (key == "eval_negatives") c.eval_negatives = to_u64(key, v);
  else if (key == "top_k") c.top_k = to_u64(key, v);
  else if (key == "fusion") c.fusion = parse_fusion(v);
  else if (key == "variant") {
    c.variant = parse_variant(v);
    if (c.variant == Variant::kFixedLambda && !c.fixed_lambda) c.fixed_lambda = 0.5;
  }
  else if (key == "seed") c.seed = to_u64(key, v);
  else if (key == "alternating") c.alternating = to_bool(key, v);
  else if (key == "eval_threads") c.eval_threads = static_cast<int>(to_u64(key, v));
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::map<std::string, std::string> kv;
  try {
    kv = parse_key_values(text, "config");
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  // variant may default fixed_lambda, so let an explicit value win.
  if (auto it = kv.find("variant"); it != kv.end()) set_config_value(base, it->first, it->second);
  for (const auto& [key, value] : kv)
    if (key != "variant") set_config_value(base, key, value);
  base.validate();
  return base;
}

void RunConfig::validate() const {
  if (k == 0) throw ConfigError("k must be positive");
  if (layers == 0) throw ConfigError("layers must be >= 1");
  if (!(mixup_alpha > 0)) throw ConfigError("mixup_alpha must be > 0");
  if (fixed_lambda && !(*fixed_lambda >= 0 && *fixed_lambda <= 1))
    throw ConfigError("fixed_lambda must lie in [0, 1]");
  if (mu1 < 0 || mu2 < 0) throw ConfigError("mu1/mu2 must be >= 0");
  if (gamma < 0) throw ConfigError("gamma must be >= 0");
  if (!(lr > 0)) throw ConfigError("lr must be > 0");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (neg_ratio == 0) throw ConfigError("neg_ratio must be positive");
  if (eval_negatives == 0) throw ConfigError("eval_negatives must be positive");
  if (top_k == 0) throw ConfigError("top_k must be positive");
  if (eval_threads < 0) throw ConfigError("eval_threads must be >= 0");
  if (variant == Variant::kBase && fusion != FusionStrategy::kAttention)
    throw ConfigError("variant base bypasses fusion; fusion must stay at its default");
  if (variant == Variant::kFixedLambda && !fixed_lambda)
    throw ConfigError("variant fixed_lambda needs fixed_lambda");
}

std::string RunConfig::to_text() const {
  std::ostringstream s;
  s << "k=" << k << "\n"
    << "layers=" << layers << "\n"
    << "mixup_alpha=" << fmt(mixup_alpha) << "\n"
    << "fixed_lambda=" << (fixed_lambda ? fmt(*fixed_lambda) : std::string("none")) << "\n"
    << "mu1=" << fmt(mu1) << "\n"
    << "mu2=" << fmt(mu2) << "\n"
    << "gamma=" << fmt(gamma) << "\n"
    << "lr=" << fmt(lr) << "\n"
    << "batch_size=" << batch_size << "\n"
    << "epochs=" << epochs << "\n"
    << "neg_ratio=" << neg_ratio << "\n"
    << "eval_negatives=" << eval_negatives << "\n"
    << "top_k=" << top_k << "\n"
    << "fusion=" << fusion_name(fusion) << "\n"
    << "variant=" << variant_name(variant) << "\n"
    << "seed=" << seed << "\n"
    << "alternating=" << (alternating ? "true" : "false") << "\n"
    << "eval_threads=" << eval_threads << "\n";
  return s.str();
}

}  // namespace dida
