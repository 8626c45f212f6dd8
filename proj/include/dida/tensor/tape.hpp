#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dida/tensor/dense.hpp"
#include "dida/tensor/sparse.hpp"

namespace dida {

// A trainable tensor. `grad` has the shape of `value` and is accumulated into
// by Tape::backward; callers zero it between steps.
struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;

  Parameter() = default;
  Parameter(std::string n, DenseMatrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
  void zero_grad() { grad.fill(0.0); }
};

// Sparse constant with its transpose precomputed for the backward pass.
struct SparseOperator {
  CsrMatrix forward;
  CsrMatrix adjoint;
  SparseOperator() = default;
  explicit SparseOperator(CsrMatrix m) : forward(std::move(m)), adjoint(forward.transpose()) {}
};

enum class OpKind {
  kConstant,
  kParameter,
  kMatMul,
  kAddBias,
  kAdd,
  kLinComb,
  kAffineScalar,
  kSpmm,
  kRelu,
  kLeakyRelu,
  kSoftmaxRows,
  kRowCosine,
  kCrossEntropy,
  kKlDiv,
  kFrobeniusSq,
  kGatherRows,
  kConcatCols,
  kSliceRows,
  kColumn,
  kRowScale,
  kReparameterize,
  kGaussianKl,
  kMeanSquaredError,
  kBinaryCrossEntropy,
};

const char* op_name(OpKind kind);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const DenseMatrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  // Scalar payload of a 1x1 node.
  double item() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Dynamic computation graph. Nodes are appended in creation order, which is
// a topological order, so backward is a single reverse sweep. One tape is
// built per training step and discarded afterwards.
class Tape {
 public:
  // Receives the node's forward value and the gradient flowing into it.
  using BackwardFn =
      std::function<void(Tape&, const DenseMatrix& out, const DenseMatrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseMatrix value);
  // Leaf whose gradient is added into `p.grad` on backward. `p` must outlive
  // the tape.
  Var parameter(Parameter& p);

  // Reverse sweep from a 1x1 node. Throws ContractError on a non-scalar loss.
  // Gradients accumulate over fan-out; constants receive none.
  void backward(Var loss);

  // Gradient of an interior node after backward (empty if none flowed).
  const DenseMatrix& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_[v.id()].kind; }

  // Count of row norms clamped by row_cosine on this tape.
  std::size_t clamped_norms() const { return clamped_norms_; }
  void note_clamped(std::size_t n) { clamped_norms_ += n; }

  // Op implementation interface.
  Var record(OpKind kind, DenseMatrix value, std::span<const Var> parents, BackwardFn fn);
  const DenseMatrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Mutable gradient slot of a parent, allocated on first use. Returns
  // nullptr when the node does not require a gradient.
  DenseMatrix* grad_slot(Var v);

 private:
  struct Node {
    OpKind kind;
    DenseMatrix value;
    DenseMatrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::size_t clamped_norms_ = 0;
};

enum class Activation { kRelu, kLeakyRelu };

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kNormFloor = 1e-12;
inline constexpr double kLogSigmaBound = 10.0;

// X * W
Var matmul(Var x, Var w);
// X + b with b (1 x cols) broadcast over rows.
Var add_bias(Var x, Var b);
// X * W + b
Var affine(Var x, Var w, Var b);
Var add(Var a, Var b);
// a*X + b*Y
Var lincomb(double a, Var x, double b, Var y);
// a*X + b elementwise
Var affine_scalar(Var x, double a, double b);
inline Var scale(Var x, double a) { return affine_scalar(x, a, 0.0); }
// A * X for a constant sparse A; grad_X = A^T * grad.
Var spmm(const SparseOperator& a, Var x);
Var activation(Var x, Activation kind);
inline Var relu(Var x) { return activation(x, Activation::kRelu); }
inline Var leaky_relu(Var x) { return activation(x, Activation::kLeakyRelu); }
// Row-wise softmax with max subtraction.
Var softmax_rows(Var x);
// n x 1 cosine between matching rows; norms clamped at kNormFloor.
Var row_cosine(Var s, Var t);
// Mean over rows of -sum_c O log(clamp(P)). Gradient flows to P only.
Var cross_entropy(Var p, const DenseMatrix& target);
// Mean over rows of KL(O || clamp(P)). Gradient flows to P only.
Var kl_div(const DenseMatrix& target, Var p);
// Sum of squares.
Var frobenius_sq(Var x);
// Rows of X at `index` (repeats allowed); backward scatter-adds.
Var gather_rows(Var x, std::vector<std::size_t> index);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
// Column j of X as n x 1.
Var column(Var x, std::size_t j);
// Each row i of X scaled by s(i, 0).
Var row_scale(Var x, Var s);
// mu + exp(clamp(log_sigma)) * eps with eps held constant.
Var reparameterize(Var mu, Var log_sigma, const DenseMatrix& eps);
// Mean over rows of 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2).
Var gaussian_kl(Var mu, Var log_sigma);
// Mean over all entries of (X - Y)^2.
Var mean_squared_error(Var x, Var y);
// Mean over rows of binary cross-entropy between p(i,0) (clamped) and
// labels[i] in {0, 1}.
Var binary_cross_entropy(Var p, std::span<const double> labels);

namespace testing {
// Mutation hook for the self-check: scales the incoming gradient of every
// node of `kind` by `factor` during backward. factor == 1 disables.
void set_backward_fault(OpKind kind, double factor);
void clear_backward_faults();
}  // namespace testing

}  // namespace dida
