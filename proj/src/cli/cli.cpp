#include "dida/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dida/cli/selfcheck.hpp"
#include "dida/data/artifact.hpp"
#include "dida/error.hpp"
#include "dida/train/trainer.hpp"

namespace dida {
namespace {

namespace fs = std::filesystem;

std::string percent(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << 100.0 * x << '%';
  return s.str();
}

std::string summary_table(const AlignedPair& aligned) {
  std::ostringstream s;
  s << "domain\tusers\titems\tinteractions\tdensity\n";
  const InteractionSet* sets[] = {&aligned.a, &aligned.b};
  for (int d = 0; d < 2; ++d) {
    const InteractionSet& x = *sets[d];
    s << (d == 0 ? "A" : "B") << '\t' << x.num_users() << '\t' << x.num_items() << '\t'
      << x.pairs.size() << '\t' << percent(x.density()) << '\n';
  }
  return s.str();
}

void require_invariants(const PreparedData& data) {
  for (int d = 0; d < 2; ++d) {
    auto problems = check_split_invariants(data.domain(d), data.eval_negatives);
    if (!problems.empty())
      throw DataError(std::string("split invariant violated in domain ") + (d == 0 ? "A" : "B") +
                      ": " + problems.front());
  }
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  for (const auto& [key, value] : parse_key_values(text, "synthetic spec")) {
    auto as_size = [&](std::size_t& field) {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size() || v < 0) throw ConfigError("bad value for " + key + ": " + value);
      field = static_cast<std::size_t>(v);
    };
    auto as_double = [&](double& field) {
      std::size_t used = 0;
      try {
        field = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size()) throw ConfigError("bad value for " + key + ": " + value);
    };
    if (key == "num_users") as_size(spec.num_users);
    else if (key == "items_a") as_size(spec.items_a);
    else if (key == "items_b") as_size(spec.items_b);
    else if (key == "latent_dim") as_size(spec.latent_dim);
    else if (key == "shared_strength") as_double(spec.shared_strength);
    else if (key == "specific_strength") as_double(spec.specific_strength);
    else if (key == "independent_strength") as_double(spec.independent_strength);
    else if (key == "rate_a") as_double(spec.rate_a);
    else if (key == "rate_b") as_double(spec.rate_b);
    else throw ConfigError("unknown synthetic spec key '" + key + "'");
  }
  spec.validate();
  return spec;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed) {
  RunConfig cfg;
  if (!path.empty()) {
    if (!fs::exists(path)) throw MissingArtifactError("config file not found: " + path);
    try {
      cfg = parse_run_config(read_file(path));
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

std::string metrics_line(const EvalReport& r, std::size_t top_k) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  for (int d = 0; d < 2; ++d) {
    const auto& m = r.domain[static_cast<std::size_t>(d)];
    s << (d ? "  " : "") << "HR@" << top_k << "_" << (d == 0 ? "A" : "B") << ' ' << m.hr << "  NDCG@"
      << top_k << "_" << (d == 0 ? "A" : "B") << ' ' << m.ndcg;
  }
  return s.str();
}

TrainOptions progress_options(std::ostream& err, bool quiet) {
  TrainOptions o;
  o.warn = [&err](const std::string& msg) { err << "warning: " << msg << '\n'; };
  if (!quiet)
    o.on_epoch = [&err](const EpochLog& e) {
      err << "epoch " << e.epoch << " loss " << e.total << '\n';
      return true;
    };
  return o;
}

OpKind op_by_name(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(OpKind::kBinaryCrossEntropy); ++k)
    if (name == op_name(static_cast<OpKind>(k))) return static_cast<OpKind>(k);
  throw ConfigError("unknown op '" + name + "'");
}

struct Flags {
  std::string domain_a, domain_b, out, spec, data, config, model, param, grid;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t min_count = kDefaultMinCount;
  std::size_t eval_negatives = kDefaultEvalNegatives;
  std::vector<std::string> overrides;
  int threads = -1;
  bool quiet = false;
  std::string fault_op;
  double fault_factor = 1.5;
};

int cmd_prepare(const Flags& f, std::ostream& out) {
  const auto raw_a = load_interactions(f.domain_a);
  const auto raw_b = load_interactions(f.domain_b);
  const AlignedPair aligned = align_common_users(binarize_and_filter(raw_a, f.min_count),
                                                 binarize_and_filter(raw_b, f.min_count));
  const PreparedData data = prepare_split(aligned, f.seed, f.eval_negatives);
  require_invariants(data);
  std::map<std::string, std::string> sources{
      {"source_a", fs::path(f.domain_a).filename().string()},
      {"source_a_fnv1a64", std::to_string(fnv1a64(read_file(f.domain_a)))},
      {"source_b", fs::path(f.domain_b).filename().string()},
      {"source_b_fnv1a64", std::to_string(fnv1a64(read_file(f.domain_b)))},
      {"min_count", std::to_string(f.min_count)}};
  save_prepared(f.out, data, sources);
  out << summary_table(aligned);
  out << "test users: A " << data.a.test.size() << ", B " << data.b.test.size() << '\n';
  return kExitOk;
}

int cmd_synth(const Flags& f, std::ostream& out) {
  SyntheticSpec spec;
  if (!f.spec.empty()) {
    if (!fs::exists(f.spec)) throw MissingArtifactError("spec file not found: " + f.spec);
    try {
      spec = parse_synthetic_spec(read_file(f.spec));
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }
  spec.validate();
  const AlignedPair aligned = generate_synthetic(spec, f.seed, f.min_count);
  const PreparedData data = prepare_split(aligned, f.seed, f.eval_negatives);
  require_invariants(data);
  std::ostringstream desc;
  desc << std::setprecision(17) << "users=" << spec.num_users << " items=" << spec.items_a << "+"
       << spec.items_b << " dim=" << spec.latent_dim << " shared=" << spec.shared_strength
       << " specific=" << spec.specific_strength << " independent=" << spec.independent_strength
       << " rates=" << spec.rate_a << "/" << spec.rate_b;
  save_prepared(f.out, data,
                {{"synthetic", desc.str()}, {"min_count", std::to_string(f.min_count)}});
  out << summary_table(aligned);
  out << "test users: A " << data.a.test.size() << ", B " << data.b.test.size() << '\n';
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(f.config, f.overrides, f.seed_given ? std::optional(f.seed) : std::nullopt);
  const PreparedData data = load_prepared(f.data);
  const DomainGraphs graphs = DomainGraphs::build(data);
  Model model(cfg, data.num_users(), data.a.train.num_items(), data.b.train.num_items());
  AdamState adam;
  const TrainLog log = train(model, adam, data, graphs, progress_options(err, f.quiet));
  fs::create_directories(f.out);
  model.save(fs::path(f.out) / "model.bin");
  write_file_atomic(fs::path(f.out) / "train_log.tsv", log.to_tsv());
  write_file_atomic(fs::path(f.out) / "config.txt", cfg.to_text());
  out << "variant " << variant_name(cfg.variant) << ", " << log.epochs.size() << " epochs, final loss "
      << (log.epochs.empty() ? 0.0 : log.epochs.back().total) << '\n';
  return kExitOk;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  if (!fs::exists(f.model)) throw MissingArtifactError("model not found: " + f.model);
  const PreparedData data = load_prepared(f.data);
  Model model = Model::load(f.model);
  if (f.threads >= 0) model.set_eval_threads(f.threads);
  const DomainGraphs graphs = DomainGraphs::build(data);
  const EvalReport report = evaluate(model, data, graphs);
  if (!f.out.empty()) write_file_atomic(f.out, report.to_text());
  out << metrics_line(report, model.config().top_k) << '\n';
  return kExitOk;
}

int cmd_ablate(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig cfg =
      load_config(f.config, f.overrides, f.seed_given ? std::optional(f.seed) : std::nullopt);
  const PreparedData data = load_prepared(f.data);
  std::ostringstream table;
  table << std::setprecision(6);
  table << "variant\thr_a\tndcg_a\thr_b\tndcg_b\tfinal_loss\n";
  for (Variant v : kAllVariants) {
    RunConfig c = cfg;
    if (v != Variant::kFixedLambda) c.fixed_lambda.reset();
    // Concatenation fusion does not apply to the base variant.
    if (v == Variant::kBase) c.fusion = FusionStrategy::kAttention;
    err << "running " << variant_name(v) << '\n';
    const RunResult r = run_variant(v, data, c, progress_options(err, f.quiet));
    const auto& rep = r.report;
    table << variant_name(v) << '\t' << rep.domain[0].hr << '\t' << rep.domain[0].ndcg << '\t'
          << rep.domain[1].hr << '\t' << rep.domain[1].ndcg << '\t'
          << (r.log.epochs.empty() ? 0.0 : r.log.epochs.back().total) << '\n';
  }
  if (!f.out.empty()) write_file_atomic(f.out, table.str());
  out << table.str();
  return kExitOk;
}

std::vector<std::string> split_grid(const std::string& grid) {
  std::vector<std::string> values;
  std::stringstream s(grid);
  std::string item;
  while (std::getline(s, item, ','))
    if (!item.empty()) values.push_back(item);
  return values;
}

int cmd_sweep(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig cfg =
      load_config(f.config, f.overrides, f.seed_given ? std::optional(f.seed) : std::nullopt);
  const PreparedData data = load_prepared(f.data);
  const auto rows = sweep(f.param, split_grid(f.grid), data, cfg, progress_options(err, f.quiet));
  const std::string table = sweep_table(f.param, rows);
  if (!f.out.empty()) write_file_atomic(f.out, table);
  out << table;
  return kExitOk;
}

int cmd_selfcheck(const Flags& f, std::ostream& out, std::ostream& err) {
  if (!f.fault_op.empty()) testing::set_backward_fault(op_by_name(f.fault_op), f.fault_factor);
  const auto start = std::chrono::steady_clock::now();
  std::vector<CheckOutcome> results;
  try {
    results = run_selfcheck();
  } catch (...) {
    testing::clear_backward_faults();
    throw;
  }
  testing::clear_backward_faults();
  std::size_t failed = 0;
  for (const auto& r : results) {
    out << (r.pass ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
    failed += r.pass ? 0 : 1;
  }
  out << results.size() - failed << "/" << results.size() << " checks passed\n";
  err << "selfcheck took "
      << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s\n";
  return failed ? kExitSelfcheck : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-target cross-domain recommender", "dida_cdr"};
  app.require_subcommand(1);
  Flags f;

  auto seed_opt = [&f](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&f](const std::uint64_t& s) {
          f.seed = s;
          f.seed_given = true;
        },
        "Random seed");
  };

  auto* prepare = app.add_subcommand("prepare", "Filter, align and split two rating files");
  prepare->add_option("--domain-a", f.domain_a, "Ratings of domain A")->required()->check(CLI::ExistingFile);
  prepare->add_option("--domain-b", f.domain_b, "Ratings of domain B")->required()->check(CLI::ExistingFile);
  prepare->add_option("--out", f.out, "Output directory")->required();
  prepare->add_option("--seed", f.seed, "Split and sampling seed")->required();
  prepare->add_option("--min-count", f.min_count, "Minimum interactions per user and item");
  prepare->add_option("--eval-negatives", f.eval_negatives, "Negatives per test user");

  auto* synth = app.add_subcommand("synth", "Generate and prepare a planted-factor dataset");
  synth->add_option("--spec", f.spec, "key=value synthetic spec (defaults when omitted)");
  synth->add_option("--out", f.out, "Output directory")->required();
  synth->add_option("--seed", f.seed, "Generator seed")->required();
  synth->add_option("--min-count", f.min_count, "Minimum interactions per user and item");
  synth->add_option("--eval-negatives", f.eval_negatives, "Negatives per test user");

  auto run_flags = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--data", f.data, "Prepared dataset directory")->required();
    cmd->add_option("--config", f.config, "key=value run config");
    cmd->add_option("--set", f.overrides, "Config override key=value (repeatable)");
    seed_opt(cmd);
    auto* o = cmd->add_option("--out", f.out, "Output path");
    if (needs_out) o->required();
    cmd->add_flag("--quiet", f.quiet, "No per-epoch progress");
  };
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  run_flags(train_cmd, true);
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model");
  eval_cmd->add_option("--data", f.data, "Prepared dataset directory")->required();
  eval_cmd->add_option("--model", f.model, "Model file written by train")->required();
  eval_cmd->add_option("--out", f.out, "EvalReport output path");
  eval_cmd->add_option("--threads", f.threads, "Evaluation threads (0 = OpenMP default)");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every variant");
  run_flags(ablate, false);
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate over a parameter grid");
  run_flags(sweep_cmd, false);
  sweep_cmd->add_option("--param", f.param, "Parameter to sweep")->required();
  sweep_cmd->add_option("--grid", f.grid, "Comma-separated values")->required();
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the built-in numerical checks");
  selfcheck->add_option("--inject-fault", f.fault_op)->group("");
  selfcheck->add_option("--fault-factor", f.fault_factor)->group("");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(f, out);
    if (synth->parsed()) return cmd_synth(f, out);
    if (train_cmd->parsed()) return cmd_train(f, out, err);
    if (eval_cmd->parsed()) return cmd_eval(f, out);
    if (ablate->parsed()) return cmd_ablate(f, out, err);
    if (sweep_cmd->parsed()) return cmd_sweep(f, out, err);
    if (selfcheck->parsed()) return cmd_selfcheck(f, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const MissingArtifactError& e) {
    err << "missing artifact: " << e.what() << '\n';
    return kExitMissingArtifact;
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace dida
