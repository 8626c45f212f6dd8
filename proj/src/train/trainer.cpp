#include "dida/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include "dida/error.hpp"
#include "dida/model/augmentation.hpp"

namespace dida {

namespace {

constexpr std::uint64_t kTagNegatives = 0x4e4547;
constexpr std::uint64_t kTagShuffle = 0x534855;
constexpr std::uint64_t kTagLambda = 0x4c414d;
constexpr std::uint64_t kTagNoise = 0x4e4f49;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void shuffle(std::vector<LabeledPair>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

double value_or_zero(Var v) { return v.valid() ? v.item() : 0.0; }

double max_abs_grad(const Model& model) {
  double g = 0;
  for (const Parameter* p : model.parameters()) {
    if (!p->grad.all_finite()) return std::numeric_limits<double>::infinity();
    g = std::max(g, p->grad.max_abs());
  }
  return g;
}

[[noreturn]] void numerical_abort(const char* what, std::size_t epoch, std::size_t step,
                                  double lambda, const BatchPair& batch, double max_grad) {
  std::ostringstream s;
  s << what << " at epoch " << epoch << " step " << step << ": lambda=" << lambda
    << " max|grad|=" << max_grad << " batch users";
  for (int d = 0; d < 2; ++d) {
    const auto& pairs = batch.pairs[static_cast<std::size_t>(d)];
    s << (d ? " B[" : " A[");
    for (std::size_t i = 0; i < std::min<std::size_t>(pairs.size(), 8); ++i)
      s << (i ? "," : "") << pairs[i].user;
    s << (pairs.size() > 8 ? ",...]" : "]");
  }
  throw NumericalError(s.str());
}

// One optimizer step on `mode`; returns the loss terms' values.
struct StepValues {
  double total = 0, prd[2] = {0, 0}, cls1 = 0, cls2 = 0;
};

StepValues step_once(Model& model, AdamState& adam, const DomainGraphs& graphs,
                     const BatchPair& batch, double lambda, std::uint64_t noise_seed,
                     LossMode mode, std::size_t epoch, std::size_t step, std::size_t& clamped) {
  model.zero_grad();
  Tape tape;
  LossTerms terms = total_loss(tape, model, graphs, batch, lambda, noise_seed, mode);
  StepValues v{terms.total.item(), {value_or_zero(terms.prd[0]), value_or_zero(terms.prd[1])},
               value_or_zero(terms.cls1), value_or_zero(terms.cls2)};
  if (!std::isfinite(v.total)) numerical_abort("non-finite loss", epoch, step, lambda, batch, max_abs_grad(model));
  tape.backward(terms.total);
  clamped += tape.clamped_norms();
  const double g = max_abs_grad(model);
  if (!std::isfinite(g)) numerical_abort("non-finite gradient", epoch, step, lambda, batch, g);
  adam_step(std::span<Parameter* const>(model.parameters()), adam);
  return v;
}

}  // namespace

std::string TrainLog::to_tsv() const {
  std::ostringstream s;
  s.precision(17);
  s << "# epoch\tloss_total\tloss_prd_A\tloss_prd_B\tloss_cls1\tloss_cls2\tlambda_mean\n";
  for (const auto& e : epochs)
    s << e.epoch << '\t' << e.total << '\t' << e.prd_a << '\t' << e.prd_b << '\t' << e.cls1 << '\t'
      << e.cls2 << '\t' << e.lambda_mean << '\n';
  s << "# clamped_norms=" << clamped_norms << '\n';
  return s.str();
}

TrainLog train(Model& model, AdamState& adam, const PreparedData& data, const DomainGraphs& graphs,
               const TrainOptions& options) {
  const RunConfig& cfg = model.config();
  if (data.num_users() != model.num_users() || data.a.train.num_items() != model.num_items(0) ||
      data.b.train.num_items() != model.num_items(1))
    throw ContractError("train: dataset dimensions do not match the model");
  adam.config.lr = cfg.lr;
  auto warn = options.warn ? options.warn : [](const std::string& m) { std::clog << "warning: " << m << "\n"; };
  const auto t0 = Clock::now();
  TrainLog log;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::array<std::vector<LabeledPair>, 2> pairs;
    std::size_t batches[2];
    for (int d = 0; d < 2; ++d) {
      const SplitDataset& split = data.domain(d);
      auto neg = sample_train_negatives(split.train, split.test, cfg.neg_ratio,
                                        derive_seed(cfg.seed, {kTagNegatives, epoch, static_cast<std::uint64_t>(d)}));
      if (neg.short_positives) {
        log.short_negative_positives += neg.short_positives;
        warn("epoch " + std::to_string(epoch) + " domain " + (d ? "B" : "A") + ": " +
             std::to_string(neg.short_positives) + " positives got fewer than " +
             std::to_string(cfg.neg_ratio) + " negatives");
      }
      auto& p = pairs[static_cast<std::size_t>(d)];
      p.reserve(split.train.pairs.size() + neg.pairs.size());
      for (auto q : split.train.pairs) p.push_back({q.user, q.item, 1.0});
      p.insert(p.end(), neg.pairs.begin(), neg.pairs.end());
      Rng rng(cfg.seed, {kTagShuffle, epoch, static_cast<std::uint64_t>(d), 0});
      shuffle(p, rng);
      batches[d] = (p.size() + cfg.batch_size - 1) / cfg.batch_size;
    }
    // The domain with fewer batches reshuffles and starts over until the
    // larger one has been covered once.
    const std::size_t steps = std::max(batches[0], batches[1]);
    EpochLog e;
    e.epoch = epoch;
    for (std::size_t step = 0; step < steps; ++step) {
      BatchPair batch;
      for (int d = 0; d < 2; ++d) {
        auto& p = pairs[static_cast<std::size_t>(d)];
        const std::size_t nb = batches[d];
        if (nb == 0) continue;
        const std::size_t idx = step % nb;
        if (idx == 0 && step > 0) {
          Rng rng(cfg.seed, {kTagShuffle, epoch, static_cast<std::uint64_t>(d), step / nb});
          shuffle(p, rng);
        }
        const std::size_t begin = idx * cfg.batch_size;
        const std::size_t end = std::min(p.size(), begin + cfg.batch_size);
        batch.pairs[static_cast<std::size_t>(d)].assign(p.begin() + static_cast<std::ptrdiff_t>(begin),
                                                        p.begin() + static_cast<std::ptrdiff_t>(end));
      }
      double lambda;
      if (cfg.fixed_lambda) {
        lambda = *cfg.fixed_lambda;
      } else {
        Rng rng(cfg.seed, {kTagLambda, epoch, step});
        lambda = sample_lambda(cfg.mixup_alpha, rng);
      }
      const std::uint64_t noise = derive_seed(cfg.seed, {kTagNoise, epoch, step});
      StepValues v;
      if (cfg.alternating) {
        StepValues a = step_once(model, adam, graphs, batch, lambda, derive_seed(noise, {0}),
                                 LossMode::kDomainA, epoch, step, log.clamped_norms);
        StepValues b = step_once(model, adam, graphs, batch, lambda, derive_seed(noise, {1}),
                                 LossMode::kDomainB, epoch, step, log.clamped_norms);
        v.prd[0] = a.prd[0];
        v.prd[1] = b.prd[1];
        v.cls1 = 0.5 * (a.cls1 + b.cls1);
        v.cls2 = 0.5 * (a.cls2 + b.cls2);
      } else {
        v = step_once(model, adam, graphs, batch, lambda, noise, LossMode::kJoint, epoch, step,
                      log.clamped_norms);
      }
      e.prd_a += v.prd[0];
      e.prd_b += v.prd[1];
      e.cls1 += v.cls1;
      e.cls2 += v.cls2;
      e.lambda_mean += lambda;
    }
    const double n = static_cast<double>(std::max<std::size_t>(steps, 1));
    e.prd_a /= n;
    e.prd_b /= n;
    e.cls1 /= n;
    e.cls2 /= n;
    e.lambda_mean /= n;
    const bool disentangled = model.disentangled();
    e.total = e.prd_a + e.prd_b + (disentangled ? cfg.mu1 * e.cls1 + cfg.mu2 * e.cls2 : 0.0);
    log.epochs.push_back(e);
    if (options.on_epoch && !options.on_epoch(e)) break;
  }
  log.wall_seconds = seconds_since(t0);
  return log;
}

EvalReport evaluate(Model& model, const PreparedData& data, const DomainGraphs& graphs) {
  const auto t0 = Clock::now();
  const RunConfig& cfg = model.config();
  Representations r = infer(model, graphs);
  EvalReport report;
  report.config = cfg;
  report.seed = cfg.seed;
  for (int d = 0; d < 2; ++d) {
    const auto i = static_cast<std::size_t>(d);
    report.domain[i] = rank_candidates(r.users[i], r.items[i], data.domain(d).test,
                                       data.domain(d).candidates, cfg.top_k, cfg.eval_threads);
  }
  report.wall_seconds = seconds_since(t0);
  return report;
}

RunResult run_variant(Variant tag, const PreparedData& data, RunConfig config,
                      const TrainOptions& options) {
  config.variant = tag;
  if (tag == Variant::kFixedLambda && !config.fixed_lambda) config.fixed_lambda = 0.5;
  if (tag == Variant::kBase) {
    config.mu1 = config.mu2 = 0.0;
    config.fusion = FusionStrategy::kAttention;
  }
  config.validate();
  const DomainGraphs graphs = DomainGraphs::build(data);
  Model model(config, data.num_users(), data.a.train.num_items(), data.b.train.num_items());
  AdamState adam;
  RunResult out;
  out.log = train(model, adam, data, graphs, options);
  out.report = evaluate(model, data, graphs);
  return out;
}

std::vector<SweepRow> sweep(const std::string& key, const std::vector<std::string>& grid,
                            const PreparedData& data, const RunConfig& config,
                            const TrainOptions& options) {
  static const char* const kSweepable[] = {"layers", "mixup_alpha", "mu1", "mu2",
                                           "lr",     "fusion",      "gamma", "k"};
  const std::string name = key == "alpha" ? "mixup_alpha" : key == "l" ? "layers" : key;
  if (std::find(std::begin(kSweepable), std::end(kSweepable), name) == std::end(kSweepable))
    throw ConfigError("cannot sweep '" + key + "'");
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  std::vector<SweepRow> rows;
  for (const auto& value : grid) {
    RunConfig c = config;
    set_config_value(c, name, value);
    c.validate();
    rows.push_back({value, run_variant(c.variant, data, c, options)});
  }
  return rows;
}

std::string sweep_table(const std::string& key, const std::vector<SweepRow>& rows) {
  std::ostringstream s;
  s.precision(6);
  s << key << "\thr_a\tndcg_a\thr_b\tndcg_b\tfinal_loss\n";
  for (const auto& r : rows) {
    const auto& rep = r.result.report;
    s << r.value << '\t' << rep.domain[0].hr << '\t' << rep.domain[0].ndcg << '\t'
      << rep.domain[1].hr << '\t' << rep.domain[1].ndcg << '\t'
      << (r.result.log.epochs.empty() ? 0.0 : r.result.log.epochs.back().total) << '\n';
  }
  return s.str();
}

}  // namespace dida
