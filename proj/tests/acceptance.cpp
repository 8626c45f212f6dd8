// Acceptance suite: one PASS/FAIL line per criterion. Run with no arguments
// for all criteria or with --criterion N for one.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "dida/cli/selfcheck.hpp"
#include "dida/train/trainer.hpp"

namespace dida {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 30.0;
constexpr double kBetaSeconds = 5.0;
constexpr double kDeterminismTol = 1e-12;
constexpr double kOverfitLossDrop = 0.90;
constexpr double kOverfitHr = 0.8;
constexpr double kOverfitSeconds = 180.0;
constexpr double kAblationSeconds = 900.0;
constexpr int kAblationSeeds = 5;
constexpr int kAblationWins = 4;

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

// Default planted-factor dataset; shared by criteria 7, 9 and 11.
constexpr std::uint64_t kDataSeed = 1;
const PreparedData& default_dataset() {
  static const PreparedData data = prepare_split(generate_synthetic(SyntheticSpec{}, kDataSeed),
                                                 kDataSeed);
  return data;
}

SyntheticSpec null_spec() {
  SyntheticSpec s;
  s.shared_strength = s.specific_strength = s.independent_strength = 0.0;
  return s;
}
const PreparedData& null_dataset() {
  static const PreparedData data = prepare_split(generate_synthetic(null_spec(), 2), 2);
  return data;
}

// 50 users, 100 items per domain. 40 negatives per pseudo-test entry: the
// catalogue cannot supply 999.
SyntheticSpec overfit_spec() {
  SyntheticSpec s;
  s.num_users = 50;
  s.items_a = s.items_b = 100;
  s.rate_a = s.rate_b = 0.15;
  return s;
}
constexpr std::size_t kOverfitNegatives = 40;
const PreparedData& overfit_dataset() {
  static const PreparedData data =
      prepare_split(generate_synthetic(overfit_spec(), 3), 3, kOverfitNegatives);
  return data;
}

Verdict gradient_integrity() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string where;
  auto take = [&](const std::vector<CheckOutcome>& v) {
    for (const auto& o : v) {
      if (!o.pass && where.empty()) where = " first failure " + o.name + " (" + o.detail + ")";
    }
  };
  auto prims = check_primitive_gradients();
  auto e2e = check_end_to_end_gradients();
  take(prims);
  take(e2e);
  for (const auto* v : {&prims, &e2e})
    for (const auto& o : *v) worst = std::isnan(o.measure) ? o.measure : std::max(worst, o.measure);
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  const bool ok = where.empty() && worst < kGradTol && secs < kGradSeconds;
  return {ok, std::to_string(prims.size()) + " primitives + " + std::to_string(e2e.size()) +
                  " end-to-end variants, max rel err " + fmt(worst, 3) + " (< 1e-4), " +
                  fmt(secs, 3) + " s (< 30 s)" + where};
}

Verdict beta_moments() {
  const CheckOutcome o = check_beta_moments();
  return {o.pass && o.seconds < kBetaSeconds, o.detail + ", " + fmt(o.seconds, 3) + " s (< 5 s)"};
}

Verdict from_check(const CheckOutcome& o) { return {o.pass, o.detail}; }

double max_abs_diff(const std::vector<EpochLog>& a, const std::vector<EpochLog>& b) {
  if (a.size() != b.size()) return INFINITY;
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (auto f : {&EpochLog::total, &EpochLog::prd_a, &EpochLog::prd_b, &EpochLog::cls1,
                   &EpochLog::cls2})
      d = std::max(d, std::abs(a[i].*f - b[i].*f));
  return d;
}

RunConfig determinism_config() {
  RunConfig c;
  c.k = 8;
  c.epochs = 2;
  c.seed = 17;
  c.eval_threads = 1;
  return c;
}

Verdict determinism() {
  const PreparedData& data = default_dataset();
  const RunConfig cfg = determinism_config();
  const DomainGraphs graphs = DomainGraphs::build(data);
  auto run = [&] {
    Model model(cfg, data.num_users(), data.a.train.num_items(), data.b.train.num_items());
    AdamState adam;
    RunResult r;
    r.log = train(model, adam, data, graphs, {});
    r.report = evaluate(model, data, graphs);
    return std::make_pair(r, model);
  };
  auto [r1, model] = run();
  auto [r2, unused] = run();
  (void)unused;
  const double loss_diff = max_abs_diff(r1.log.epochs, r2.log.epochs);
  const bool same_report = r1.report.same_result(r2.report);
  bool threads_same = true;
  for (int threads : {2, 4, 8}) {
    model.set_eval_threads(threads);
    threads_same = threads_same && evaluate(model, data, graphs).same_result(r1.report);
  }
  return {loss_diff <= kDeterminismTol && same_report && threads_same,
          "epoch-loss divergence " + fmt(loss_diff) + " (<= 1e-12), reports identical " +
              (same_report ? "yes" : "no") + ", 1 vs 2/4/8 eval threads identical " +
              (threads_same ? "yes" : "no")};
}

// Training positives ranked against the user's held-out candidate list.
double train_positive_hr(const Representations& rep, const PreparedData& data, int d) {
  const SplitDataset& s = data.domain(d);
  const auto by_user = s.train.items_by_user();
  std::vector<TestEntry> pseudo;
  std::vector<std::vector<std::size_t>> cand;
  for (std::size_t t = 0; t < s.test.size(); ++t)
    for (std::size_t item : by_user[s.test[t].user]) {
      pseudo.push_back({s.test[t].user, item});
      cand.push_back(s.candidates[t]);
    }
  const auto du = static_cast<std::size_t>(d);
  return rank_candidates(rep.users[du], rep.items[du], pseudo, cand, 10).hr;
}

RunConfig overfit_config() {
  RunConfig c;
  c.epochs = 200;
  c.lr = 0.005;
  c.eval_negatives = kOverfitNegatives;
  c.seed = 5;
  return c;
}

Verdict overfit() {
  const auto start = Clock::now();
  const PreparedData& data = overfit_dataset();
  const RunConfig cfg = overfit_config();
  const DomainGraphs graphs = DomainGraphs::build(data);
  Model model(cfg, data.num_users(), data.a.train.num_items(), data.b.train.num_items());
  AdamState adam;
  const TrainLog log = train(model, adam, data, graphs, {});
  const Representations rep = infer(model, graphs);
  const double first = log.epochs.front().total, last = log.epochs.back().total;
  const double drop = 1.0 - last / first;
  const double hr_a = train_positive_hr(rep, data, 0), hr_b = train_positive_hr(rep, data, 1);
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  return {drop >= kOverfitLossDrop && hr_a > kOverfitHr && hr_b > kOverfitHr &&
              secs < kOverfitSeconds,
          "loss " + fmt(first) + " -> " + fmt(last) + " (drop " + fmt(100 * drop, 3) +
              "%, need >= 90%), train-positive HR@10 A " + fmt(hr_a) + " B " + fmt(hr_b) +
              " (need > 0.8), " + fmt(secs, 3) + " s (< 180 s)"};
}

RunConfig ablation_config(std::uint64_t seed) {
  RunConfig c;
  c.k = 16;
  c.lr = 0.005;
  c.epochs = 8;
  c.seed = seed;
  return c;
}

Verdict directional_ablation() {
  const auto start = Clock::now();
  const PreparedData& data = default_dataset();
  // The sparser synthetic domain.
  const int sparse = data.a.train.density() < data.b.train.density() ? 0 : 1;
  int beats_base = 0, beats_wo_sha = 0;
  double sum_full = 0, sum_base = 0, sum_wo_sha = 0;
  std::string per_seed;
  for (int s = 1; s <= kAblationSeeds; ++s) {
    const RunConfig cfg = ablation_config(static_cast<std::uint64_t>(100 + s));
    auto hr = [&](Variant v) {
      return run_variant(v, data, cfg).report.domain[static_cast<std::size_t>(sparse)].hr;
    };
    const double full = hr(Variant::kFull), base = hr(Variant::kBase), wo_sha = hr(Variant::kWoSha);
    beats_base += full > base;
    beats_wo_sha += full > wo_sha;
    sum_full += full;
    sum_base += base;
    sum_wo_sha += wo_sha;
    per_seed += " [" + fmt(full) + "/" + fmt(base) + "/" + fmt(wo_sha) + "]";
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  return {beats_base >= kAblationWins && beats_wo_sha >= kAblationWins && secs < kAblationSeconds,
          std::string("sparser domain ") + (sparse ? "B" : "A") + ": full > base in " +
              std::to_string(beats_base) + "/5, full > wo_sha in " + std::to_string(beats_wo_sha) +
              "/5 (need 4); mean HR@10 full " + fmt(sum_full / 5) + " base " + fmt(sum_base / 5) +
              " wo_sha " + fmt(sum_wo_sha / 5) + "; per seed full/base/wo_sha" + per_seed + "; " +
              fmt(secs, 4) + " s (< 900 s)"};
}

RunConfig null_config() {
  RunConfig c;
  c.k = 16;
  c.lr = 0.005;
  c.epochs = 3;
  c.seed = 23;
  return c;
}

Verdict null_calibration() {
  const PreparedData& data = null_dataset();
  const RunResult r = run_variant(Variant::kFull, data, null_config());
  bool ok = true;
  std::string detail;
  for (int d = 0; d < 2; ++d) {
    const auto& m = r.report.domain[static_cast<std::size_t>(d)];
    const double p = 10.0 / static_cast<double>(data.eval_negatives + 1);
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(m.users));
    const bool in = std::abs(m.hr - p) <= 3 * sigma;
    ok = ok && in;
    detail += std::string(d ? "; " : "") + (d ? "B" : "A") + " HR@10 " + fmt(m.hr) + " in " +
              fmt(p) + " +- " + fmt(3 * sigma) + " (n=" + std::to_string(m.users) + ")";
  }
  return {ok, detail};
}

// Cold-start removal against a std::set oracle on a fresh split, plus the
// candidate rules checked here independently of check_split_invariants.
std::size_t protocol_violations(const AlignedPair& aligned, const PreparedData& prepared,
                                std::uint64_t seed) {
  std::size_t bad = 0;
  for (int d = 0; d < 2; ++d) {
    const InteractionSet& full = d == 0 ? aligned.a : aligned.b;
    const SplitDataset raw = leave_one_out_split(full, seed);
    std::set<std::size_t> warm;
    for (auto p : raw.train.pairs) warm.insert(p.item);
    std::vector<TestEntry> expect;
    for (auto t : raw.test)
      if (warm.count(t.item)) expect.push_back(t);
    if (filter_cold_items(raw).test != expect) ++bad;

    const SplitDataset& s = prepared.domain(d);
    bad += check_split_invariants(s, prepared.eval_negatives).size();
    std::set<std::pair<std::size_t, std::size_t>> train;
    for (auto p : s.train.pairs) train.insert({p.user, p.item});
    std::set<std::size_t> warm_items;
    for (auto p : s.train.pairs) warm_items.insert(p.item);
    for (std::size_t t = 0; t < s.test.size(); ++t) {
      const auto [u, item] = s.test[t];
      if (train.count({u, item}) || !warm_items.count(item)) ++bad;
      const std::set<std::size_t> c(s.candidates[t].begin(), s.candidates[t].end());
      if (c.size() != prepared.eval_negatives || c.count(item)) ++bad;
      for (std::size_t i : c)
        if (train.count({u, i})) ++bad;
    }
  }
  return bad;
}

Verdict protocol_invariants() {
  struct Case {
    std::string name;
    AlignedPair aligned;
    std::uint64_t seed;
    std::size_t negatives;
  };
  std::vector<Case> cases;
  cases.push_back({"default", generate_synthetic(SyntheticSpec{}, kDataSeed), kDataSeed, 999});
  cases.push_back({"null", generate_synthetic(null_spec(), 2), 2, 999});
  cases.push_back({"overfit", generate_synthetic(overfit_spec(), 3), 3, kOverfitNegatives});
  for (std::uint64_t s = 101; s <= 105; ++s)
    cases.push_back({"default/seed" + std::to_string(s), generate_synthetic(SyntheticSpec{}, s), s, 999});
  std::size_t total = 0, tests = 0;
  for (const auto& c : cases) {
    const PreparedData p = prepare_split(c.aligned, c.seed, c.negatives);
    total += protocol_violations(c.aligned, p, c.seed);
    tests += p.a.test.size() + p.b.test.size();
  }
  // The toy instance of the gradient check.
  {
    const PreparedData toy = toy_instance();
    for (int d = 0; d < 2; ++d) total += check_split_invariants(toy.domain(d), 2).size();
  }
  return {total == 0, std::to_string(cases.size() + 1) + " prepared datasets, " +
                          std::to_string(tests) + " test entries, " + std::to_string(total) +
                          " violations"};
}

Verdict douban_direction() {
  const char* dir = std::getenv("DIDA_DOUBAN_DIR");
  if (!dir || !fs::exists(fs::path(dir) / "movie.tsv") || !fs::exists(fs::path(dir) / "book.tsv"))
    return {true, "optional: set DIDA_DOUBAN_DIR to a directory with movie.tsv and book.tsv; "
                  "not supplied, nothing to check"};
  const auto a = binarize_and_filter(load_interactions(fs::path(dir) / "movie.tsv"));
  const auto b = binarize_and_filter(load_interactions(fs::path(dir) / "book.tsv"));
  const PreparedData data = prepare_split(align_common_users(a, b), 1);
  RunConfig cfg;
  cfg.seed = 1;
  const RunResult att = run_variant(Variant::kFull, data, cfg);
  cfg.fusion = FusionStrategy::kConcat;
  const RunResult cat = run_variant(Variant::kFull, data, cfg);
  bool ok = true;
  std::string detail;
  for (std::size_t d = 0; d < 2; ++d) {
    ok = ok && att.report.domain[d].hr > cat.report.domain[d].hr;
    detail += std::string(d ? "; " : "") + (d ? "book" : "movie") + " attention " +
              fmt(att.report.domain[d].hr) + " vs concat " + fmt(cat.report.domain[d].hr);
  }
  return {ok, detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "gradient integrity", gradient_integrity},
      {2, "beta sampler moments", beta_moments},
      {3, "adjacency oracle", [] { return from_check(check_adjacency_oracle()); }},
      {4, "metric oracle", [] { return from_check(check_metric_oracle()); }},
      {5, "loss fixed points", [] { return from_check(check_loss_fixed_points()); }},
      {6, "mixup endpoints and convexity", [] { return from_check(check_mixup()); }},
      {7, "determinism", determinism},
      {8, "overfit sanity", overfit},
      {9, "directional ablation", directional_ablation},
      {10, "null calibration", null_calibration},
      {11, "protocol invariants", protocol_invariants},
      {12, "douban attention vs concat (optional)", douban_direction},
  };
  return all;
}

}  // namespace
}  // namespace dida

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--criterion", only, "Run only these criteria (1-12)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  int failed = 0;
  for (const auto& c : dida::criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    dida::Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s [%d] %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name,
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  return failed ? 1 : 0;
}
