#include "dida/cli/selfcheck.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "dida/model/augmentation.hpp"
#include "dida/tensor/gradcheck.hpp"
#include "dida/train/metrics.hpp"

namespace dida {
namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

DenseMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

struct PrimitiveCase {
  std::string name;
  std::function<Var(Tape&, std::vector<Var>&)> build;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
};

// Distinct cotangent per output entry.
Var weigh(Var v) {
  Tape& t = *v.tape();
  DenseMatrix w(v.cols(), 1);
  for (std::size_t i = 0; i < w.rows(); ++i) w(i, 0) = 0.3 + 0.17 * static_cast<double>(i);
  Var col = matmul(v, t.constant(w));
  DenseMatrix r(1, col.rows());
  for (std::size_t i = 0; i < r.cols(); ++i) r(0, i) = 1.0 - 0.21 * static_cast<double>(i);
  return matmul(t.constant(r), col);
}

std::vector<PrimitiveCase> primitive_cases() {
  const DenseMatrix onehot{{1, 0, 0}, {0, 0, 1}};
  const DenseMatrix third(2, 3, 1.0 / 3.0);
  static const SparseOperator sp(CsrMatrix::from_triplets(
      3, 4, {{0, 0, 0.5}, {0, 3, -1.2}, {1, 1, 2.0}, {2, 2, 0.7}, {2, 0, 0.3}}));
  const DenseMatrix eps{{0.3, -1.1}, {0.8, 0.05}};
  const std::vector<double> labels{1.0, 0.0, 1.0};
  using V = std::vector<Var>;
  return {
      {"matmul", [](Tape&, V& v) { return weigh(matmul(v[0], v[1])); }, {{3, 4}, {4, 2}}},
      {"add_bias", [](Tape&, V& v) { return weigh(add_bias(v[0], v[1])); }, {{3, 2}, {1, 2}}},
      {"affine", [](Tape&, V& v) { return weigh(affine(v[0], v[1], v[2])); },
       {{3, 4}, {4, 2}, {1, 2}}},
      {"add", [](Tape&, V& v) { return weigh(add(v[0], v[1])); }, {{2, 3}, {2, 3}}},
      {"lincomb", [](Tape&, V& v) { return weigh(lincomb(0.7, v[0], -1.3, v[1])); },
       {{2, 3}, {2, 3}}},
      {"affine_scalar", [](Tape&, V& v) { return weigh(affine_scalar(v[0], -2.5, 0.4)); },
       {{3, 2}}},
      {"spmm", [](Tape&, V& v) { return weigh(spmm(sp, v[0])); }, {{4, 2}}},
      {"relu", [](Tape&, V& v) { return weigh(relu(v[0])); }, {{3, 3}}},
      {"leaky_relu", [](Tape&, V& v) { return weigh(leaky_relu(v[0])); }, {{3, 3}}},
      {"softmax_rows", [](Tape&, V& v) { return weigh(softmax_rows(v[0])); }, {{3, 4}}},
      {"row_cosine", [](Tape&, V& v) { return weigh(row_cosine(v[0], v[1])); },
       {{3, 4}, {3, 4}}},
      {"cross_entropy", [=](Tape&, V& v) { return cross_entropy(softmax_rows(v[0]), onehot); },
       {{2, 3}}},
      {"kl_div", [=](Tape&, V& v) { return kl_div(third, softmax_rows(v[0])); }, {{2, 3}}},
      {"frobenius_sq", [](Tape&, V& v) { return frobenius_sq(v[0]); }, {{2, 3}}},
      {"gather_rows", [](Tape&, V& v) { return weigh(gather_rows(v[0], {2, 0, 2, 1})); },
       {{3, 2}}},
      {"concat_cols",
       [](Tape&, V& v) {
         const Var parts[] = {v[0], v[1], v[0]};
         return weigh(concat_cols(parts));
       },
       {{2, 2}, {2, 3}}},
      {"slice_rows", [](Tape&, V& v) { return weigh(slice_rows(v[0], 1, 2)); }, {{4, 2}}},
      {"column", [](Tape&, V& v) { return weigh(column(v[0], 2)); }, {{3, 4}}},
      {"row_scale", [](Tape&, V& v) { return weigh(row_scale(v[0], column(v[1], 1))); },
       {{3, 2}, {3, 3}}},
      {"reparameterize", [=](Tape&, V& v) { return weigh(reparameterize(v[0], v[1], eps)); },
       {{2, 2}, {2, 2}}},
      {"gaussian_kl", [](Tape&, V& v) { return gaussian_kl(v[0], v[1]); }, {{2, 3}, {2, 3}}},
      {"mean_squared_error", [](Tape&, V& v) { return mean_squared_error(v[0], v[1]); },
       {{2, 3}, {2, 3}}},
      {"binary_cross_entropy",
       [=](Tape&, V& v) {
         Var c = row_cosine(v[0], v[1]);
         return binary_cross_entropy(affine_scalar(c, 0.5, 0.5), labels);
       },
       {{3, 4}, {3, 4}}},
  };
}

// Sort-based rank: held-out item placed after every equal score.
std::size_t sorted_rank(double held, const std::vector<double>& negs) {
  std::vector<std::pair<double, int>> all;
  all.push_back({held, 1});
  for (double s : negs) all.push_back({s, 0});
  std::stable_sort(all.begin(), all.end(), [](auto x, auto y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].second) return i + 1;
  return 0;
}

}  // namespace

std::vector<CheckOutcome> check_primitive_gradients(int points, std::uint64_t seed) {
  std::vector<CheckOutcome> out;
  Rng rng(seed);
  for (const auto& pc : primitive_cases()) {
    const auto start = Clock::now();
    double worst = 0.0;
    for (int point = 0; point < points; ++point) {
      std::vector<Parameter> params;
      params.reserve(pc.shapes.size());
      for (std::size_t i = 0; i < pc.shapes.size(); ++i)
        params.emplace_back("p" + std::to_string(i),
                            random_matrix(rng, pc.shapes[i].first, pc.shapes[i].second));
      std::vector<Parameter*> ptrs;
      for (auto& p : params) ptrs.push_back(&p);
      auto builder = [&](Tape& t) {
        std::vector<Var> vars;
        for (auto& p : params) vars.push_back(t.parameter(p));
        return pc.build(t, vars);
      };
      const double err = finite_diff_check(builder, ptrs, 1e-5).max_rel_error;
      worst = std::isnan(err) ? err : std::max(worst, err);
      if (std::isnan(worst)) break;
    }
    out.push_back({"grad." + pc.name, worst < 1e-4, "max rel err " + fmt(worst) + " < 1e-4",
                   since(start), worst});
  }
  return out;
}

PreparedData toy_instance() {
  auto make = [](const std::string& prefix, std::vector<std::vector<std::size_t>> rows) {
    InteractionSet s;
    for (int u = 0; u < 4; ++u) s.user_keys.push_back("u" + std::to_string(u));
    for (int i = 0; i < 6; ++i) s.item_keys.push_back(prefix + std::to_string(i));
    for (std::size_t u = 0; u < rows.size(); ++u)
      for (auto i : rows[u]) s.pairs.push_back({u, i});
    return s;
  };
  AlignedPair p;
  p.a = make("a", {{0, 1, 2, 3}, {1, 2, 3, 4}, {2, 3, 4, 5}, {0, 3, 4, 5}});
  p.b = make("b", {{0, 1, 2, 5}, {0, 1, 3, 4}, {1, 2, 4, 5}, {0, 2, 3, 5}});
  return prepare_split(p, 7, 2);
}

BatchPair toy_batch(const PreparedData& data) {
  BatchPair batch;
  for (int d = 0; d < 2; ++d) {
    const auto& split = data.domain(d);
    auto neg = sample_train_negatives(split.train, split.test, 1, 3);
    auto& out = batch.pairs[static_cast<std::size_t>(d)];
    for (auto p : split.train.pairs) out.push_back({p.user, p.item, 1.0});
    out.insert(out.end(), neg.pairs.begin(), neg.pairs.end());
  }
  return batch;
}

RunConfig toy_config(Variant v) {
  RunConfig cfg;
  cfg.k = 4;
  cfg.variant = v;
  if (v == Variant::kFixedLambda) cfg.fixed_lambda = 0.5;
  if (v == Variant::kBase) cfg.mu1 = cfg.mu2 = 0.0;
  cfg.gamma = 1e-3;
  return cfg;
}

void condition_toy_model(Model& model, std::uint64_t seed) {
  Rng rng(seed);
  for (Parameter* p : model.parameters()) {
    double sd = p->value.rows() > 1 ? 1.0 / std::sqrt(static_cast<double>(p->value.rows())) : 0.1;
    if (p->name.rfind("cls.", 0) == 0 || p->name.find("sigma") != std::string::npos) sd = 0.1;
    for (double& x : p->value.values()) x = sd * rng.normal();
  }
}

std::vector<CheckOutcome> check_end_to_end_gradients() {
  const PreparedData data = toy_instance();
  const DomainGraphs graphs = DomainGraphs::build(data);
  const BatchPair batch = toy_batch(data);
  std::vector<CheckOutcome> out;
  for (Variant v : kAllVariants) {
    const auto start = Clock::now();
    Model model(toy_config(v), data.num_users(), data.a.train.num_items(),
                data.b.train.num_items());
    condition_toy_model(model, kToyPointSeed);
    const GradCheckResult r = finite_diff_check(
        [&](Tape& t) { return total_loss(t, model, graphs, batch, kToyLambda, kToyNoiseSeed).total; },
        model.parameters());
    const bool ok = r.max_rel_error < 1e-4;
    std::string detail = "max rel err " + fmt(r.max_rel_error) + " < 1e-4 over " +
                         std::to_string(r.coordinates) + " coords";
    if (!ok) detail += ", worst " + r.worst_param + "[" + std::to_string(r.worst_index) + "]";
    out.push_back({std::string("grad.loss.") + variant_name(v), ok, detail, since(start),
                   r.max_rel_error});
  }
  return out;
}

CheckOutcome check_beta_moments(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(seed);
  bool ok = true;
  std::string detail;
  for (double alpha : {0.5, 1.0, 5.0}) {
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = sample_lambda(alpha, rng);
      if (!(x >= 0.0 && x <= 1.0)) ok = false;
      s += x;
      s2 += x * x;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    const double want = 1.0 / (4.0 * (2.0 * alpha + 1.0));
    ok = ok && std::abs(mean - 0.5) <= 0.005 && std::abs(var - want) <= 0.003;
    detail += (detail.empty() ? "" : ", ") + std::string("a=") + fmt(alpha) + " mean " +
              fmt(mean) + " var " + fmt(var) + "/" + fmt(want);
  }
  return {"beta_moments", ok, detail, since(start)};
}

CheckOutcome check_adjacency_oracle(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(seed);
  double max_diff = 0.0, max_radius = 0.0;
  bool symmetric = true;
  for (int g = 0; g < 50; ++g) {
    const std::size_t m = 1 + rng.below(20), n = 1 + rng.below(20), size = m + n;
    const double density = rng.uniform();
    std::vector<Interaction> pairs;
    for (std::size_t u = 0; u < m; ++u)
      for (std::size_t i = 0; i < n; ++i)
        if (rng.uniform() < density) pairs.push_back({u, i});
    const NormalizedAdjacency adj = build_bipartite_adjacency(m, n, pairs);

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(size),
                                                  static_cast<Eigen::Index>(size));
    for (auto p : pairs) {
      const auto u = static_cast<Eigen::Index>(p.user), i = static_cast<Eigen::Index>(m + p.item);
      a(u, i) = a(i, u) = 1.0;
    }
    const Eigen::VectorXd dinv = a.rowwise().sum().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd oracle = dinv.asDiagonal() * a * dinv.asDiagonal();

    const CsrMatrix& s = adj.matrix();
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c) {
        const double v = s.at(r, c);
        max_diff = std::max(max_diff, std::abs(v - oracle(static_cast<Eigen::Index>(r),
                                                          static_cast<Eigen::Index>(c))));
        if (v != s.at(c, r)) symmetric = false;
      }
    Eigen::MatrixXd dense(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c)
        dense(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = s.at(r, c);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense, Eigen::EigenvaluesOnly);
    max_radius = std::max(max_radius, eig.eigenvalues().cwiseAbs().maxCoeff());
  }
  const bool ok = max_diff <= 1e-12 && symmetric && max_radius <= 1.0 + 1e-10;
  return {"adjacency_oracle", ok,
          "max |diff| " + fmt(max_diff) + " <= 1e-12, symmetric " + (symmetric ? "yes" : "no") +
              ", spectral radius " + fmt(max_radius) + " <= 1+1e-10",
          since(start)};
}

CheckOutcome check_metric_oracle(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(seed);
  std::size_t mismatches = 0, order_violations = 0, ties = 0;
  for (int trial = 0; trial < 200; ++trial) {
    // Coarse grid so that ties with the held-out score are common.
    const auto levels = 2 + rng.below(200);
    auto draw = [&] { return static_cast<double>(rng.below(levels)) / static_cast<double>(levels); };
    std::vector<double> negs(999);
    for (double& s : negs) s = draw();
    const double held = draw();
    ties += static_cast<std::size_t>(std::count(negs.begin(), negs.end(), held) > 0);

    const std::size_t oracle = sorted_rank(held, negs);
    const double hr_oracle = oracle <= 10 ? 1.0 : 0.0;
    const double ndcg_oracle = oracle <= 10 ? std::log(2.0) / std::log(oracle + 1.0) : 0.0;
    const std::size_t r = pessimistic_rank(held, negs);
    const double hr = hit_at(r, 10), ndcg = ndcg_at(r, 10);
    if (r != oracle || hr != hr_oracle || std::abs(ndcg - ndcg_oracle) > 1e-15) ++mismatches;
    if (ndcg > hr) ++order_violations;
  }
  return {"metric_oracle", mismatches == 0 && order_violations == 0,
          std::to_string(mismatches) + " mismatches, " + std::to_string(order_violations) +
              " ndcg>hr, " + std::to_string(ties) + "/200 vectors tie the held-out score",
          since(start)};
}

CheckOutcome check_loss_fixed_points() {
  const auto start = Clock::now();
  Rng rng(12);
  DomainClassifier uniform;
  uniform.w = Parameter("cls.w", DenseMatrix(3, 2));
  uniform.b = Parameter("cls.b", DenseMatrix(1, 2));
  DomainClassifier skewed;
  skewed.w = Parameter("cls.w", DenseMatrix(3, 2));
  skewed.b = Parameter("cls.b", DenseMatrix{{std::log(0.25), std::log(0.75)}});
  Tape t;
  auto code = [&](std::size_t rows) { return t.constant(random_matrix(rng, rows, 3)); };
  const double cls2_uniform = loss_cls2(code(4), code(2), code(5), uniform).item();
  double cls1_dev = 0.0;
  for (double lambda : {0.0, 0.3, 1.0})
    cls1_dev = std::max(cls1_dev, std::abs(loss_cls1(code(4), code(5), code(3), lambda, uniform)
                                               .item() - std::log(2.0)));
  const double kl = loss_cls2(code(3), code(3), code(3), skewed).item();
  const bool ok = cls2_uniform == 0.0 && cls1_dev <= 1e-15 && std::abs(kl - 0.14384) <= 1e-5;
  return {"loss_fixed_points", ok,
          "cls2(uniform) " + fmt(cls2_uniform) + ", |cls1 - ln2| " + fmt(cls1_dev) +
              ", KL[0.25,0.75] " + std::to_string(kl),
          since(start)};
}

CheckOutcome check_mixup(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(seed);
  std::size_t endpoint_failures = 0, outside = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 1 + rng.below(8), c = 1 + rng.below(8);
    DenseMatrix a(r, c), b(r, c);
    for (double& v : a.values()) v = rng.normal() * std::exp(3.0 * rng.normal());
    for (double& v : b.values()) v = rng.normal() * std::exp(3.0 * rng.normal());
    Tape t;
    Var va = t.constant(a), vb = t.constant(b);
    if (!(interpolate(va, vb, 1.0).value() == a) || !(interpolate(va, vb, 0.0).value() == b))
      ++endpoint_failures;
    const double lambda = sample_lambda(0.2 + 5.0 * rng.uniform(), rng);
    const DenseMatrix mix = interpolate(va, vb, lambda).value();
    for (std::size_t i = 0; i < mix.size(); ++i) {
      const double lo = std::min(a.data()[i], b.data()[i]), hi = std::max(a.data()[i], b.data()[i]);
      if (mix.data()[i] < lo || mix.data()[i] > hi) ++outside;
    }
  }
  return {"mixup_endpoints", endpoint_failures == 0 && outside == 0,
          std::to_string(endpoint_failures) + " endpoint mismatches, " + std::to_string(outside) +
              " coordinates outside [lo, hi]",
          since(start)};
}

std::vector<CheckOutcome> run_selfcheck() {
  std::vector<CheckOutcome> all = check_primitive_gradients();
  for (auto& o : check_end_to_end_gradients()) all.push_back(std::move(o));
  all.push_back(check_beta_moments());
  all.push_back(check_adjacency_oracle());
  all.push_back(check_metric_oracle());
  all.push_back(check_loss_fixed_points());
  all.push_back(check_mixup());
  return all;
}

}  // namespace dida
