#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dida/error.hpp"
#include "dida/rng.hpp"
#include "dida/tensor/adam.hpp"
#include "dida/tensor/gradcheck.hpp"
#include "dida/tensor/kernels.hpp"
#include "dida/tensor/tape.hpp"

namespace dida {
namespace {

DenseMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

// Textbook triple loop, independent of the kernel loop order.
DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < a.cols(); ++t) s += a(i, t) * b(t, j);
      c(i, j) = s;
    }
  return c;
}

CsrMatrix random_sparse(Rng& rng, std::size_t r, std::size_t c, double density) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (rng.uniform() < density) t.push_back({i, j, rng.normal()});
  return CsrMatrix::from_triplets(r, c, std::move(t));
}

void expect_near(const DenseMatrix& a, const DenseMatrix& b, double tol) {
  ASSERT_TRUE(a.same_shape(b)) << a.shape_str() << " vs " << b.shape_str();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], tol) << i;
}

// ---------------------------------------------------------------------------
// affine / matmul

TEST(Affine, IdentityLeftFactor) {
  Tape t;
  Var x = t.constant(DenseMatrix::identity(2));
  Var w = t.constant({{1, 2}, {3, 4}});
  Var b = t.constant(DenseMatrix(1, 2));
  EXPECT_EQ(affine(x, w, b).value(), (DenseMatrix{{1, 2}, {3, 4}}));
}

TEST(Affine, BiasBroadcast) {
  Tape t;
  Var out = affine(t.constant({{1, 1}}), t.constant({{1, 0}, {0, 1}}), t.constant({{5, 5}}));
  EXPECT_EQ(out.value(), (DenseMatrix{{6, 6}}));
}

TEST(Affine, MatchesTripleLoopOracle) {
  Rng rng(7);
  DenseMatrix x = random_matrix(rng, 3, 4), w = random_matrix(rng, 4, 2);
  Tape t;
  Var out = affine(t.constant(x), t.constant(w), t.constant(DenseMatrix(1, 2)));
  expect_near(out.value(), naive_matmul(x, w), 1e-12);
}

TEST(Affine, DimensionMismatchThrows) {
  Tape t;
  EXPECT_THROW(matmul(t.constant(DenseMatrix(2, 3)), t.constant(DenseMatrix(2, 3))), ShapeError);
  EXPECT_THROW(add_bias(t.constant(DenseMatrix(2, 3)), t.constant(DenseMatrix(1, 2))), ShapeError);
}

// ---------------------------------------------------------------------------
// spmm

TEST(Spmm, IdentityLeavesInputUnchanged) {
  Rng rng(3);
  DenseMatrix x = random_matrix(rng, 3, 4);
  SparseOperator eye(CsrMatrix::identity(3));
  Tape t;
  EXPECT_EQ(spmm(eye, t.constant(x)).value(), x);
}

TEST(Spmm, SelectorRow) {
  SparseOperator a(CsrMatrix::from_triplets(3, 3, {{0, 2, 1.0}}));
  Tape t;
  EXPECT_EQ(spmm(a, t.constant({{1}, {2}, {3}})).value(), (DenseMatrix{{3}, {0}, {0}}));
}

TEST(Spmm, MatchesDensifiedOracle) {
  Rng rng(11);
  CsrMatrix s = random_sparse(rng, 5, 5, 0.3);
  DenseMatrix x = random_matrix(rng, 5, 3);
  SparseOperator op(s);
  Tape t;
  expect_near(spmm(op, t.constant(x)).value(), naive_matmul(s.to_dense(), x), 1e-12);
}

TEST(Spmm, ShapeMismatchThrows) {
  SparseOperator a(CsrMatrix::identity(3));
  Tape t;
  EXPECT_THROW(spmm(a, t.constant(DenseMatrix(2, 2))), ShapeError);
}

TEST(Csr, RejectsDuplicatesAndOutOfRange) {
  EXPECT_THROW(CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), ContractError);
  EXPECT_THROW(CsrMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), ContractError);
}

// ---------------------------------------------------------------------------
// activations

TEST(Activation, ReluValues) {
  Tape t;
  EXPECT_EQ(relu(t.constant({{-1, 0, 2}})).value(), (DenseMatrix{{0, 0, 2}}));
}

TEST(Activation, LeakySlope) {
  Tape t;
  EXPECT_DOUBLE_EQ(leaky_relu(t.constant({{-1}})).item(), -0.01);
}

TEST(Activation, ReluGradientIndicator) {
  for (auto [x, expected] : {std::pair{2.0, 1.0}, {-1.0, 0.0}, {0.0, 0.0}}) {
    Parameter p("x", DenseMatrix::scalar(x));
    Tape t;
    t.backward(matmul(relu(t.parameter(p)), t.constant(DenseMatrix::scalar(1.0))));
    EXPECT_DOUBLE_EQ(p.grad(0, 0), expected) << "x=" << x;
  }
}

// ---------------------------------------------------------------------------
// softmax

TEST(Softmax, UniformRow) {
  Tape t;
  auto y = softmax_rows(t.constant({{0, 0, 0}})).value();
  for (double v : y.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeSpreadDoesNotOverflow) {
  Tape t;
  auto y = softmax_rows(t.constant({{1000, 0}})).value();
  EXPECT_TRUE(y.all_finite());
  EXPECT_NEAR(y(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(y(0, 1), 0.0, 1e-15);
}

TEST(Softmax, ScalarExpOracle) {
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  Tape t;
  auto y = softmax_rows(t.constant({{1, 2, 3}})).value();
  EXPECT_NEAR(y(0, 0), std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(y(0, 0), 0.09003, 1e-5);
  EXPECT_NEAR(y(0, 1), 0.24473, 1e-5);
  EXPECT_NEAR(y(0, 2), 0.66524, 1e-5);
}

TEST(Softmax, RowsAreDistributionsProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    DenseMatrix x = random_matrix(rng, 4, 1 + trial % 6, trial % 2 ? 1e3 : 3.0);
    Tape t;
    auto y = softmax_rows(t.constant(x)).value();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double s = 0.0;
      for (double v : y.row(r)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// cosine

TEST(RowCosine, HandValues) {
  Tape t;
  EXPECT_NEAR(row_cosine(t.constant({{1, 2, 3}}), t.constant({{1, 2, 3}})).item(), 1.0, 1e-15);
  EXPECT_NEAR(row_cosine(t.constant({{1, 0}}), t.constant({{0, 1}})).item(), 0.0, 1e-15);
  EXPECT_NEAR(row_cosine(t.constant({{1, 1}}), t.constant({{1, 0}})).item(), 1.0 / std::sqrt(2.0),
              1e-15);
  EXPECT_NEAR(row_cosine(t.constant({{1, 1}}), t.constant({{1, 0}})).item(), 0.70711, 1e-5);
}

TEST(RowCosine, ZeroNormIsClampedAndCounted) {
  Tape t;
  Var y = row_cosine(t.constant({{0, 0}}), t.constant({{1, 0}}));
  EXPECT_EQ(y.item(), 0.0);
  EXPECT_EQ(t.clamped_norms(), 1u);
}

TEST(RowCosine, BoundedProperty) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    DenseMatrix a = random_matrix(rng, 8, 5, std::pow(10.0, trial % 7 - 3));
    DenseMatrix b = random_matrix(rng, 8, 5);
    if (trial % 5 == 0) b = a;
    Tape t;
    for (double v : row_cosine(t.constant(a), t.constant(b)).value().values()) {
      EXPECT_LE(v, 1.0 + 1e-12);
      EXPECT_GE(v, -1.0 - 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// losses

TEST(CrossEntropy, HandValues) {
  Tape t;
  EXPECT_DOUBLE_EQ(cross_entropy(t.constant({{1, 0}}), DenseMatrix{{1, 0}}).item(),
                   -std::log(1.0 - 1e-12));
  EXPECT_NEAR(cross_entropy(t.constant({{0.5, 0.5}}), DenseMatrix{{1, 0}}).item(),
              std::numbers::ln2, 1e-15);
  EXPECT_NEAR(cross_entropy(t.constant({{0.5, 0.5}}), DenseMatrix{{0.5, 0.5}}).item(),
              std::numbers::ln2, 1e-15);
  EXPECT_NEAR(std::numbers::ln2, 0.69315, 1e-5);
}

TEST(KlDiv, HandValues) {
  Tape t;
  EXPECT_EQ(kl_div(DenseMatrix{{0.5, 0.5}}, t.constant({{0.5, 0.5}})).item(), 0.0);
  const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  const double got = kl_div(DenseMatrix{{0.5, 0.5}}, t.constant({{0.25, 0.75}})).item();
  EXPECT_NEAR(got, expected, 1e-15);
  EXPECT_NEAR(got, 0.14384, 1e-5);
  DenseMatrix four(4, 2, 0.5);
  EXPECT_EQ(kl_div(four, t.constant(four)).item(), 0.0);
}

TEST(KlDiv, NonNegativeProperty) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    Tape t;
    Var p = softmax_rows(t.constant(random_matrix(rng, 3, 2, 4.0)));
    EXPECT_GE(kl_div(DenseMatrix(3, 2, 0.5), p).item(), 0.0);
  }
}

TEST(Frobenius, HandValues) {
  Tape t;
  EXPECT_EQ(frobenius_sq(t.constant(DenseMatrix(3, 2))).item(), 0.0);
  EXPECT_EQ(frobenius_sq(t.constant({{1, 2}, {3, 4}})).item(), 30.0);
  Parameter p("x", {{1, 2}});
  Tape t2;
  t2.backward(frobenius_sq(t2.parameter(p)));
  EXPECT_EQ(p.grad, (DenseMatrix{{2, 4}}));
}

// ---------------------------------------------------------------------------
// backward

TEST(Backward, FrobeniusScalar) {
  Parameter w("w", {{3}});
  Tape t;
  t.backward(frobenius_sq(t.parameter(w)));
  EXPECT_EQ(w.grad(0, 0), 6.0);
}

TEST(Backward, NonScalarLossThrows) {
  Parameter w("w", {{1, 2}});
  Tape t;
  EXPECT_THROW(t.backward(t.parameter(w)), ContractError);
}

TEST(Backward, SoftmaxCrossEntropyClosedForm) {
  Rng rng(17);
  Parameter x("x", random_matrix(rng, 1, 3)), w("w", random_matrix(rng, 3, 4)),
      b("b", random_matrix(rng, 1, 4));
  DenseMatrix onehot{{0, 0, 1, 0}};
  Tape t;
  Var z = affine(t.parameter(x), t.parameter(w), t.parameter(b));
  Var p = softmax_rows(z);
  t.backward(cross_entropy(p, onehot));
  // dL/dz = p - o, so dL/db = p - o.
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(b.grad(0, c), p.value()(0, c) - onehot(0, c), 1e-14);
}

TEST(Backward, ConstantsReceiveNoGradient) {
  Parameter w("w", {{1, 2}});
  Tape t;
  Var c = t.constant({{3, 4}});
  Var loss = frobenius_sq(lincomb(1.0, t.parameter(w), 1.0, c));
  t.backward(loss);
  EXPECT_TRUE(t.grad(c).empty());
  EXPECT_EQ(w.grad, (DenseMatrix{{8, 12}}));
}

TEST(Backward, FanOutSumsContributionsProperty) {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + trial % 5;
    Parameter x("x", random_matrix(rng, 2, 2));
    std::vector<double> coef(k);
    for (double& c : coef) c = rng.normal();
    Tape t;
    Var xv = t.parameter(x);
    Var f = frobenius_sq(xv);
    Var loss = scale(f, coef[0]);
    for (std::size_t i = 1; i < k; ++i) loss = add(loss, scale(f, coef[i]));
    t.backward(loss);
    double csum = 0.0;
    for (double c : coef) csum += c;
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(x.grad.data()[i], csum * 2.0 * x.value.data()[i], 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// finite differences, one graph per primitive

struct PrimitiveCase {
  const char* name;
  std::function<Var(Tape&, std::vector<Var>&)> build;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
};

std::vector<PrimitiveCase> primitive_cases() {
  const DenseMatrix onehot{{1, 0, 0}, {0, 0, 1}};
  const DenseMatrix half(2, 3, 1.0 / 3.0);
  static SparseOperator sp(CsrMatrix::from_triplets(
      3, 4, {{0, 0, 0.5}, {0, 3, -1.2}, {1, 1, 2.0}, {2, 2, 0.7}, {2, 0, 0.3}}));
  static DenseMatrix eps{{0.3, -1.1}, {0.8, 0.05}};
  const std::vector<double> labels{1.0, 0.0, 1.0};
  // Each objective feeds its primitive into a weighted sum so every output
  // entry gets a distinct cotangent.
  auto weigh = [](Var v) {
    Tape& t = *v.tape();
    DenseMatrix w(v.cols(), 1);
    for (std::size_t i = 0; i < w.rows(); ++i) w(i, 0) = 0.3 + 0.17 * static_cast<double>(i);
    Var col = matmul(v, t.constant(w));
    DenseMatrix r(1, col.rows());
    for (std::size_t i = 0; i < r.cols(); ++i) r(0, i) = 1.0 - 0.21 * static_cast<double>(i);
    return matmul(t.constant(r), col);
  };
  return {
      {"affine", [=](Tape&, std::vector<Var>& v) { return weigh(affine(v[0], v[1], v[2])); },
       {{3, 4}, {4, 2}, {1, 2}}},
      {"spmm", [=](Tape&, std::vector<Var>& v) { return weigh(spmm(sp, v[0])); }, {{4, 2}}},
      {"relu", [=](Tape&, std::vector<Var>& v) { return weigh(relu(v[0])); }, {{3, 3}}},
      {"leaky_relu", [=](Tape&, std::vector<Var>& v) { return weigh(leaky_relu(v[0])); }, {{3, 3}}},
      {"softmax_rows", [=](Tape&, std::vector<Var>& v) { return weigh(softmax_rows(v[0])); }, {{3, 4}}},
      {"row_cosine", [=](Tape&, std::vector<Var>& v) { return weigh(row_cosine(v[0], v[1])); },
       {{3, 4}, {3, 4}}},
      {"cross_entropy",
       [=](Tape&, std::vector<Var>& v) { return cross_entropy(softmax_rows(v[0]), onehot); },
       {{2, 3}}},
      {"kl_div", [=](Tape&, std::vector<Var>& v) { return kl_div(half, softmax_rows(v[0])); },
       {{2, 3}}},
      {"frobenius_sq", [=](Tape&, std::vector<Var>& v) { return frobenius_sq(v[0]); }, {{2, 3}}},
      {"gather_rows",
       [=](Tape&, std::vector<Var>& v) { return weigh(gather_rows(v[0], {2, 0, 2, 1})); },
       {{3, 2}}},
      {"concat_cols",
       [=](Tape&, std::vector<Var>& v) {
         const Var parts[] = {v[0], v[1], v[0]};
         return weigh(concat_cols(parts));
       },
       {{2, 2}, {2, 3}}},
      {"slice_rows", [=](Tape&, std::vector<Var>& v) { return weigh(slice_rows(v[0], 1, 2)); },
       {{4, 2}}},
      {"row_scale",
       [=](Tape&, std::vector<Var>& v) { return weigh(row_scale(v[0], column(v[1], 1))); },
       {{3, 2}, {3, 3}}},
      {"reparameterize",
       [=](Tape&, std::vector<Var>& v) { return weigh(reparameterize(v[0], v[1], eps)); },
       {{2, 2}, {2, 2}}},
      {"gaussian_kl", [=](Tape&, std::vector<Var>& v) { return gaussian_kl(v[0], v[1]); },
       {{2, 3}, {2, 3}}},
      {"mean_squared_error",
       [=](Tape&, std::vector<Var>& v) { return mean_squared_error(v[0], v[1]); },
       {{2, 3}, {2, 3}}},
      {"binary_cross_entropy",
       [=](Tape&, std::vector<Var>& v) {
         Var c = row_cosine(v[0], v[1]);
         return binary_cross_entropy(affine_scalar(c, 0.5, 0.5), labels);
       },
       {{3, 4}, {3, 4}}},
  };
}

TEST(FiniteDifference, EveryPrimitiveAtTwentyPoints) {
  Rng rng(23);
  for (const auto& pc : primitive_cases()) {
    for (int point = 0; point < 20; ++point) {
      std::vector<Parameter> params;
      params.reserve(pc.shapes.size());
      for (std::size_t i = 0; i < pc.shapes.size(); ++i) {
        params.emplace_back("p" + std::to_string(i),
                            random_matrix(rng, pc.shapes[i].first, pc.shapes[i].second));
      }
      std::vector<Parameter*> ptrs;
      for (auto& p : params) ptrs.push_back(&p);
      auto builder = [&](Tape& t) {
        std::vector<Var> vars;
        for (auto& p : params) vars.push_back(t.parameter(p));
        return pc.build(t, vars);
      };
      auto res = finite_diff_check(builder, ptrs, 1e-5);
      EXPECT_LT(res.max_rel_error, 1e-4) << pc.name << " point " << point << " worst "
                                         << res.worst_param << "[" << res.worst_index << "]";
    }
  }
}

TEST(FiniteDifference, RandomFourOpChains) {
  Rng rng(29);
  for (int point = 0; point < 20; ++point) {
    Parameter x("x", random_matrix(rng, 3, 4)), w("w", random_matrix(rng, 4, 4)),
        b("b", random_matrix(rng, 1, 4)), w2("w2", random_matrix(rng, 4, 2));
    std::vector<Parameter*> ptrs{&x, &w, &b, &w2};
    const int variant = point % 4;
    auto builder = [&](Tape& t) {
      Var h = affine(t.parameter(x), t.parameter(w), t.parameter(b));
      h = variant % 2 ? leaky_relu(h) : relu(h);
      Var z = matmul(h, t.parameter(w2));
      if (variant < 2) return cross_entropy(softmax_rows(z), DenseMatrix{{1, 0}, {0, 1}, {1, 0}});
      return frobenius_sq(row_scale(z, column(softmax_rows(z), 0)));
    };
    auto res = finite_diff_check(builder, ptrs);
    EXPECT_LT(res.max_rel_error, 1e-4) << "chain " << point << " worst " << res.worst_param;
  }
}

TEST(FiniteDifference, ConstantGraphHasZeroError) {
  Parameter x("x", {{1, 2}});
  std::vector<Parameter*> ptrs{&x};
  auto res = finite_diff_check(
      [&](Tape& t) {
        t.parameter(x);
        return frobenius_sq(t.constant({{1, 1}}));
      },
      ptrs);
  EXPECT_EQ(res.max_rel_error, 0.0);
  EXPECT_EQ(x.grad, DenseMatrix(1, 2));
}

TEST(FiniteDifference, DetectsInjectedFault) {
  Rng rng(31);
  Parameter x("x", random_matrix(rng, 2, 3));
  std::vector<Parameter*> ptrs{&x};
  testing::set_backward_fault(OpKind::kSoftmaxRows, 1.5);
  auto res = finite_diff_check(
      [&](Tape& t) { return cross_entropy(softmax_rows(t.parameter(x)), DenseMatrix{{1, 0, 0}, {0, 1, 0}}); },
      ptrs);
  testing::clear_backward_faults();
  EXPECT_GT(res.max_rel_error, 1e-2);
}

// ---------------------------------------------------------------------------
// Adam

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("p", DenseMatrix::scalar(0.5));
  p.grad(0, 0) = 1.0;
  AdamState st;
  st.config.lr = 0.001;
  Parameter* ps[] = {&p};
  adam_step(ps, st);
  EXPECT_NEAR(p.value(0, 0), 0.5 - 0.001 * 1.0 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParameterButCountsStep) {
  Parameter p("p", {{1, -2}});
  AdamState st;
  Parameter* ps[] = {&p};
  adam_step(ps, st);
  adam_step(ps, st);
  EXPECT_EQ(p.value, (DenseMatrix{{1, -2}}));
  EXPECT_EQ(st.step, 2u);
}

TEST(Adam, QuadraticDescentMatchesScalarSimulation) {
  // Scalar re-derivation of the update, kept separate from adam_step.
  double theta = 1.0, m = 0.0, v = 0.0;
  std::vector<double> expected;
  for (int t = 1; t <= 10; ++t) {
    const double g = 2.0 * theta;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    theta -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    expected.push_back(theta);
  }
  Parameter p("theta", DenseMatrix::scalar(1.0));
  AdamState st;
  st.config.lr = 0.1;
  Parameter* ps[] = {&p};
  double prev = 1.0;
  for (int t = 0; t < 10; ++t) {
    p.zero_grad();
    Tape tape;
    tape.backward(frobenius_sq(tape.parameter(p)));
    adam_step(ps, st);
    EXPECT_LT(p.value(0, 0), prev);
    EXPECT_NEAR(p.value(0, 0), expected[static_cast<std::size_t>(t)], 1e-14);
    prev = p.value(0, 0);
  }
}

TEST(Adam, ShapeMismatchThrows) {
  DenseMatrix value(2, 2), grad(2, 3);
  DenseMatrix* vs[] = {&value};
  const DenseMatrix* gs[] = {&grad};
  AdamState st;
  EXPECT_THROW(adam_step(vs, gs, st), ContractError);
}

TEST(Adam, DeterministicProperty) {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    DenseMatrix v0 = random_matrix(rng, 3, 3), g = random_matrix(rng, 3, 3);
    DenseMatrix a = v0, b = v0;
    AdamState sa, sb;
    for (int s = 0; s < 3; ++s) {
      DenseMatrix* va[] = {&a};
      DenseMatrix* vb[] = {&b};
      const DenseMatrix* gs[] = {&g};
      adam_step(va, gs, sa);
      adam_step(vb, gs, sb);
    }
    EXPECT_EQ(a, b);
    EXPECT_EQ(sa.m[0], sb.m[0]);
    EXPECT_EQ(sa.v[0], sb.v[0]);
  }
}

// ---------------------------------------------------------------------------
// OpenMP kernels against the serial reference

TEST(Kernels, ParallelMatchesReferenceBitForBit) {
  Rng rng(41);
  const int saved = kernels::max_threads();
  for (int threads : {1, 3, 8}) {
    kernels::set_num_threads(threads);
    DenseMatrix a = random_matrix(rng, 70, 65), b = random_matrix(rng, 65, 40),
                c = random_matrix(rng, 70, 40);
    EXPECT_EQ(kernels::matmul(a, b), kernels::reference::matmul(a, b));
    EXPECT_EQ(kernels::matmul_tn(a, c), kernels::reference::matmul_tn(a, c));
    EXPECT_EQ(kernels::matmul_nt(c, c), kernels::reference::matmul_nt(c, c));
    CsrMatrix s = random_sparse(rng, 300, 65, 0.2);
    EXPECT_EQ(kernels::spmm(s, b), kernels::reference::spmm(s, b));
    EXPECT_EQ(kernels::row_cosine(c, c, 1e-12), kernels::reference::row_cosine(c, c, 1e-12));
  }
  kernels::set_num_threads(saved);
}

TEST(Kernels, ReferenceMatchesNaiveOracle) {
  Rng rng(43);
  DenseMatrix a = random_matrix(rng, 6, 5), b = random_matrix(rng, 5, 4);
  expect_near(kernels::reference::matmul(a, b), naive_matmul(a, b), 1e-12);
}

}  // namespace
}  // namespace dida
