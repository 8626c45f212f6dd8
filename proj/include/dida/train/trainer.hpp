#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dida/train/metrics.hpp"
#include "dida/train/model.hpp"

namespace dida {

struct EpochLog {
  std::size_t epoch = 0;
  double total = 0;
  double prd_a = 0;
  double prd_b = 0;
  double cls1 = 0;
  double cls2 = 0;
  double lambda_mean = 0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t clamped_norms = 0;
  std::size_t short_negative_positives = 0;
  double wall_seconds = 0;

  // Tab-separated, one line per epoch, then a `# clamped_norms=N` comment.
  std::string to_tsv() const;
};

struct TrainOptions {
  // Called after every epoch; return false to stop early.
  std::function<bool(const EpochLog&)> on_epoch;
  // Warnings (short negative pools). Defaults to stderr.
  std::function<void(const std::string&)> warn;
};

// Epoch loop: resample negatives, shuffle, step through batch pairs with one
// lambda per pair, Adam after every backward. Throws NumericalError with a
// diagnostic on a non-finite loss or gradient.
TrainLog train(Model& model, AdamState& adam, const PreparedData& data, const DomainGraphs& graphs,
               const TrainOptions& options = {});

// Ranks every test entry of both domains.
EvalReport evaluate(Model& model, const PreparedData& data, const DomainGraphs& graphs);

// Fresh model + train + evaluate under `config`.
struct RunResult {
  TrainLog log;
  EvalReport report;
};
RunResult run_variant(Variant tag, const PreparedData& data, RunConfig config,
                      const TrainOptions& options = {});

// Sweepable keys: layers, mixup_alpha (alias alpha), mu1, mu2, lr, fusion,
// gamma, k. All points share `data`.
struct SweepRow {
  std::string value;
  RunResult result;
};
std::vector<SweepRow> sweep(const std::string& key, const std::vector<std::string>& grid,
                            const PreparedData& data, const RunConfig& config,
                            const TrainOptions& options = {});
std::string sweep_table(const std::string& key, const std::vector<SweepRow>& rows);

}  // namespace dida
