#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dida/error.hpp"
#include "dida/model/fusion.hpp"
#include "dida/tensor/gradcheck.hpp"

namespace dida {
namespace {

DenseMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

double leaky(double x) { return x > 0 ? x : kLeakySlope * x; }

TEST(Fuse, SumWithZeroOthersIsSpecific) {
  Rng rng(1);
  const DenseMatrix spe = random_matrix(rng, 5, 4);
  FusionWeights none;
  Tape t;
  const Var codes[] = {t.constant(spe), t.constant(DenseMatrix(5, 4)), t.constant(DenseMatrix(5, 4))};
  EXPECT_EQ(fuse(codes, FusionStrategy::kSum, none).value(), spe);
}

TEST(Fuse, ZeroAttentionWeightsAverage) {
  Rng rng(2);
  auto w = FusionWeights::init("f", FusionStrategy::kAttention, 3, 4, rng);
  ParamList ps;
  w.collect(ps);
  ASSERT_EQ(ps.size(), 4u);
  for (auto* p : ps) p->value.fill(0.0);
  const DenseMatrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 3, 4), c = random_matrix(rng, 3, 4);
  Tape t;
  const Var codes[] = {t.constant(a), t.constant(b), t.constant(c)};
  const DenseMatrix weights = attention_weights(codes, w).value();
  for (double v : weights.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const DenseMatrix out = fuse(codes, FusionStrategy::kAttention, w).value();
  for (std::size_t i = 0; i < out.size(); ++i)
    EXPECT_NEAR(out.data()[i], (a.data()[i] + b.data()[i] + c.data()[i]) / 3.0, 1e-14);
}

TEST(Fuse, AttentionIsPerUserConvexCombination) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(6), comps = 2 + rng.below(3);
    auto w = FusionWeights::init("f", FusionStrategy::kAttention, comps, k, rng);
    ParamList ps;
    w.collect(ps);
    for (auto* p : ps)
      for (double& v : p->value.values()) v = 2.0 * rng.normal();
    std::vector<DenseMatrix> zs;
    for (std::size_t c = 0; c < comps; ++c) zs.push_back(random_matrix(rng, m, k, 3.0));
    Tape t;
    std::vector<Var> codes;
    for (auto& z : zs) codes.push_back(t.constant(z));
    const DenseMatrix cw = attention_weights(codes, w).value();
    for (std::size_t r = 0; r < m; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < comps; ++c) {
        EXPECT_GE(cw(r, c), 0.0);
        s += cw(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    const DenseMatrix out = fuse(codes, FusionStrategy::kAttention, w).value();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t j = 0; j < k; ++j) {
        double lo = zs[0](r, j), hi = lo;
        for (auto& z : zs) lo = std::min(lo, z(r, j)), hi = std::max(hi, z(r, j));
        EXPECT_GE(out(r, j), lo - 1e-12);
        EXPECT_LE(out(r, j), hi + 1e-12);
      }
  }
}

TEST(Fuse, AttentionMatchesHandOracle) {
  Rng rng(4);
  const std::size_t m = 3, k = 2;
  auto w = FusionWeights::init("f", FusionStrategy::kAttention, 3, k, rng);
  for (double& v : w.w_s.value.values()) v = rng.normal();
  std::vector<DenseMatrix> zs;
  for (int c = 0; c < 3; ++c) zs.push_back(random_matrix(rng, m, k));
  Tape t;
  std::vector<Var> codes;
  for (auto& z : zs) codes.push_back(t.constant(z));
  const DenseMatrix out = fuse(codes, FusionStrategy::kAttention, w).value();
  for (std::size_t r = 0; r < m; ++r) {
    double h[2] = {0, 0};
    for (int c = 0; c < 3; ++c)
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < k; ++i) h[j] += zs[c](r, i) * w.w[c].value(i, j);
    double logit[3], mx = -1e300, z = 0;
    for (int c = 0; c < 3; ++c) {
      logit[c] = leaky(h[0]) * w.w_s.value(0, c) + leaky(h[1]) * w.w_s.value(1, c);
      mx = std::max(mx, logit[c]);
    }
    for (double& l : logit) z += (l = std::exp(l - mx));
    for (std::size_t j = 0; j < k; ++j) {
      double e = 0;
      for (int c = 0; c < 3; ++c) e += logit[c] / z * zs[c](r, j);
      EXPECT_NEAR(out(r, j), e, 1e-14);
    }
  }
}

TEST(Fuse, ConcatAndSumCommuteWithPositiveScaling) {
  Rng rng(5);
  FusionWeights none;
  for (int trial = 0; trial < 50; ++trial) {
    const double c = std::exp(rng.normal());
    std::vector<DenseMatrix> zs, scaled;
    for (int i = 0; i < 3; ++i) {
      zs.push_back(random_matrix(rng, 4, 3));
      scaled.push_back(zs.back());
      for (double& v : scaled.back().values()) v *= c;
    }
    Tape t;
    std::vector<Var> a, b;
    for (int i = 0; i < 3; ++i) a.push_back(t.constant(zs[i])), b.push_back(t.constant(scaled[i]));
    for (auto s : {FusionStrategy::kConcat, FusionStrategy::kSum}) {
      const DenseMatrix x = fuse(a, s, none).value(), y = fuse(b, s, none).value();
      ASSERT_EQ(x.cols(), fused_width(s, 3, 3));
      for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_NEAR(y.data()[i], c * x.data()[i], 1e-12 * (1.0 + std::abs(y.data()[i])));
    }
  }
}

TEST(Fuse, ConcatLayoutAndErrors) {
  FusionWeights none;
  Tape t;
  const Var codes[] = {t.constant(DenseMatrix{{1, 2}}), t.constant(DenseMatrix{{3, 4}}),
                       t.constant(DenseMatrix{{5, 6}})};
  EXPECT_EQ(fuse(codes, FusionStrategy::kConcat, none).value(), (DenseMatrix{{1, 2, 3, 4, 5, 6}}));
  const Var bad[] = {t.constant(DenseMatrix{{1, 2}}), t.constant(DenseMatrix{{3, 4, 5}})};
  EXPECT_THROW(fuse(bad, FusionStrategy::kSum, none), ShapeError);
  EXPECT_THROW(parse_fusion("max"), ConfigError);
  EXPECT_EQ(parse_fusion("attention"), FusionStrategy::kAttention);
  EXPECT_STREQ(fusion_name(FusionStrategy::kConcat), "concat");
}

TEST(Tower, ZeroWeightsGiveZero) {
  Rng rng(6);
  const std::size_t widths[] = {4, 8, 4};
  auto tw = Tower::init("u", widths, rng);
  for (auto& p : tw.w) p.value.fill(0.0);
  Tape t;
  EXPECT_EQ(tower_forward(t.constant(random_matrix(rng, 3, 4)), tw).value(), DenseMatrix(3, 4));
}

TEST(Tower, IdentityLayerIsLeakyRelu) {
  Rng rng(7);
  const std::size_t widths[] = {3, 3};
  auto tw = Tower::init("u", widths, rng);
  tw.w[0].value = DenseMatrix::identity(3);
  const DenseMatrix x = random_matrix(rng, 5, 3);
  Tape t;
  const DenseMatrix y = tower_forward(t.constant(x), tw).value();
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], leaky(x.data()[i]));
}

TEST(Tower, TwoLayersMatchComposition) {
  Rng rng(8);
  const std::size_t widths[] = {3, 6, 2};
  auto tw = Tower::init("i", widths, rng);
  for (auto& p : tw.w)
    for (double& v : p.value.values()) v = rng.normal();
  const DenseMatrix x = random_matrix(rng, 4, 3);
  Tape t;
  const DenseMatrix y = tower_forward(t.constant(x), tw).value();
  EXPECT_EQ(tw.in_width(), 3u);
  EXPECT_EQ(tw.out_width(), 2u);
  for (std::size_t r = 0; r < 4; ++r) {
    double h[6];
    for (std::size_t j = 0; j < 6; ++j) {
      h[j] = 0;
      for (std::size_t i = 0; i < 3; ++i) h[j] += x(r, i) * tw.w[0].value(i, j);
      h[j] = leaky(h[j]);
    }
    for (std::size_t c = 0; c < 2; ++c) {
      double o = 0;
      for (std::size_t j = 0; j < 6; ++j) o += h[j] * tw.w[1].value(j, c);
      EXPECT_NEAR(y(r, c), leaky(o), 1e-14);
    }
  }
  EXPECT_THROW(tower_forward(t.constant(DenseMatrix(2, 4)), tw), ShapeError);
}

TEST(Predict, CosineExamples) {
  Tape t;
  const DenseMatrix s{{1.0, 2.0}, {1.0, 0.0}};
  const DenseMatrix u{{1.0, 2.0}, {0.0, 3.0}};
  const DenseMatrix y = predict(t.constant(s), t.constant(u)).value();
  EXPECT_NEAR(y(0, 0), 1.0, 1e-15);
  EXPECT_EQ(y(1, 0), 0.0);
}

TEST(Predict, MatchesScalarOracleAndIsAntisymmetric) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(10);
    const DenseMatrix s = random_matrix(rng, 1, k), u = random_matrix(rng, 1, k);
    DenseMatrix neg = s;
    for (double& v : neg.values()) v = -v;
    double dot = 0, ns = 0, nu = 0;
    for (std::size_t i = 0; i < k; ++i) dot += s(0, i) * u(0, i), ns += s(0, i) * s(0, i), nu += u(0, i) * u(0, i);
    Tape t;
    const double y = predict(t.constant(s), t.constant(u)).item();
    EXPECT_NEAR(y, dot / std::sqrt(ns * nu), 1e-12);
    EXPECT_EQ(predict(t.constant(neg), t.constant(u)).item(), -y);
  }
}

TEST(LossPrd, HandValues) {
  Tape t;
  const double pos[] = {1.0}, any[] = {0.0, 1.0};
  Var s = t.constant(DenseMatrix{{1.0, 0.0}});
  EXPECT_NEAR(loss_prd(t.constant(DenseMatrix{{1.0}}), pos, s, s, 0.0).item(), 0.0, 1e-11);
  Var s2 = t.constant(DenseMatrix(2, 2, 1.0));
  EXPECT_NEAR(loss_prd(t.constant(DenseMatrix(2, 1)), any, s2, s2, 0.0).item(), std::log(2.0), 1e-15);
  // One pair with S = T = [1, 0]: the regularizer adds 0.001 * (1 + 1).
  const double with = loss_prd(t.constant(DenseMatrix{{0.0}}), pos, s, s, 0.001).item();
  EXPECT_NEAR(with - std::log(2.0), 0.002, 1e-15);
  EXPECT_THROW(loss_prd(t.constant(DenseMatrix{{0.0}}), pos, s, s, -1.0), ContractError);
}

TEST(LossPrd, EndToEndGradients) {
  Rng rng(10);
  const std::size_t m = 4, n = 5, k = 3, in_item = 6;
  auto fw = FusionWeights::init("f", FusionStrategy::kAttention, 3, k, rng);
  const std::size_t uw[] = {k, 2 * k, k}, iw[] = {in_item, 2 * k, k};
  auto ut = Tower::init("u", uw, rng), it = Tower::init("i", iw, rng);
  ParamList params;
  fw.collect(params);
  ut.collect(params);
  it.collect(params);
  for (auto* p : params)
    for (double& v : p->value.values()) v = rng.normal();
  Parameter zs[3] = {Parameter("spe", random_matrix(rng, m, k)), Parameter("ind", random_matrix(rng, m, k)),
                     Parameter("sha", random_matrix(rng, m, k))};
  for (auto& z : zs) params.push_back(&z);
  Parameter items("items", random_matrix(rng, n, in_item));
  params.push_back(&items);
  const std::vector<std::size_t> us{0, 1, 2, 3, 0, 2}, is{0, 1, 2, 3, 4, 4};
  const std::vector<double> labels{1, 0, 1, 0, 0, 1};
  auto r = finite_diff_check(
      [&](Tape& t) {
        const Var codes[] = {t.parameter(zs[0]), t.parameter(zs[1]), t.parameter(zs[2])};
        Var s = gather_rows(tower_forward(fuse(codes, FusionStrategy::kAttention, fw), ut), us);
        Var tr = gather_rows(tower_forward(t.parameter(items), it), is);
        return loss_prd(predict(s, tr), labels, s, tr, 0.01);
      },
      params);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << "[" << r.worst_index << "]";
}

}  // namespace
}  // namespace dida
