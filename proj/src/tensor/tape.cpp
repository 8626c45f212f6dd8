#include "dida/tensor/tape.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>

#include "dida/error.hpp"
#include "dida/tensor/kernels.hpp"

namespace dida {

namespace {

constexpr std::size_t kNumOps = static_cast<std::size_t>(OpKind::kBinaryCrossEntropy) + 1;
struct FaultTable {
  std::array<std::atomic<double>, kNumOps> factor;
  FaultTable() {
    for (auto& f : factor) f.store(1.0);
  }
};
FaultTable g_faults;

void require_same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw ContractError("operands live on different tapes");
}

double clamp_prob(double p, double hi) { return std::clamp(p, kProbFloor, hi); }

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kAdd: return "add";
    case OpKind::kLinComb: return "lincomb";
    case OpKind::kAffineScalar: return "affine_scalar";
    case OpKind::kSpmm: return "spmm";
    case OpKind::kRelu: return "relu";
    case OpKind::kLeakyRelu: return "leaky_relu";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kRowCosine: return "row_cosine";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kKlDiv: return "kl_div";
    case OpKind::kFrobeniusSq: return "frobenius_sq";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kColumn: return "column";
    case OpKind::kRowScale: return "row_scale";
    case OpKind::kReparameterize: return "reparameterize";
    case OpKind::kGaussianKl: return "gaussian_kl";
    case OpKind::kMeanSquaredError: return "mean_squared_error";
    case OpKind::kBinaryCrossEntropy: return "binary_cross_entropy";
  }
  return "?";
}

const DenseMatrix& Var::value() const { return tape_->value(id_); }

double Var::item() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ContractError("item() on non-scalar " + v.shape_str());
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(DenseMatrix value) {
  nodes_.push_back(Node{OpKind::kConstant, std::move(value), {}, false, nullptr, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{OpKind::kParameter, p.value, {}, true, &p, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, DenseMatrix value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw ContractError("operand from another tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{kind, std::move(value), {}, needs, nullptr, needs ? std::move(fn) : nullptr});
  return Var(this, nodes_.size() - 1);
}

DenseMatrix* Tape::grad_slot(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty() && !n.value.empty()) n.grad = DenseMatrix(n.value.rows(), n.value.cols());
  return &n.grad;
}

const DenseMatrix& Tape::grad(Var v) const { return nodes_[v.id()].grad; }

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("backward: loss from another tape");
  const DenseMatrix& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be scalar, got " + lv.shape_str());
  }
  if (!nodes_[loss.id()].requires_grad) return;
  grad_slot(loss)->fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.param) {
      n.param->grad.add_scaled(n.grad);
      continue;
    }
    if (!n.backward) continue;
    const double fault = g_faults.factor[static_cast<std::size_t>(n.kind)].load();
    if (fault != 1.0) {
      DenseMatrix g = n.grad;
      for (double& x : g.values()) x *= fault;
      n.backward(*this, n.value, g);
    } else {
      n.backward(*this, n.value, n.grad);
    }
  }
}

namespace testing {
void set_backward_fault(OpKind kind, double factor) {
  g_faults.factor[static_cast<std::size_t>(kind)].store(factor);
}
void clear_backward_faults() {
  for (auto& f : g_faults.factor) f.store(1.0);
}
}  // namespace testing

// ---------------------------------------------------------------------------
// Linear ops

Var matmul(Var x, Var w) {
  require_same_tape(x, w);
  Tape& t = *x.tape();
  DenseMatrix out = kernels::matmul(x.value(), w.value());
  const Var parents[] = {x, w};
  return t.record(OpKind::kMatMul, std::move(out), parents,
                  [x, w](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                    if (DenseMatrix* gx = t.grad_slot(x)) {
                      gx->add_scaled(kernels::matmul_nt(g, t.value(w.id())));
                    }
                    if (DenseMatrix* gw = t.grad_slot(w)) {
                      gw->add_scaled(kernels::matmul_tn(t.value(x.id()), g));
                    }
                  });
}

Var add_bias(Var x, Var b) {
  require_same_tape(x, b);
  const DenseMatrix& xv = x.value();
  const DenseMatrix& bv = b.value();
  require_shape(bv.rows() == 1 && bv.cols() == xv.cols(), "add_bias", xv, bv);
  DenseMatrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
  }
  const Var parents[] = {x, b};
  return x.tape()->record(OpKind::kAddBias, std::move(out), parents,
                          [x, b](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            if (DenseMatrix* gx = t.grad_slot(x)) gx->add_scaled(g);
                            if (DenseMatrix* gb = t.grad_slot(b)) {
                              for (std::size_t r = 0; r < g.rows(); ++r) {
                                auto row = g.row(r);
                                for (std::size_t c = 0; c < row.size(); ++c) (*gb)(0, c) += row[c];
                              }
                            }
                          });
}

Var affine(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

Var lincomb(double a, Var x, double b, Var y) {
  require_same_tape(x, y);
  require_shape(x.value().same_shape(y.value()), "lincomb", x.value(), y.value());
  DenseMatrix out(x.rows(), x.cols());
  {
    const double* xv = x.value().data();
    const double* yv = y.value().data();
    double* o = out.data();
    // Zero coefficients drop their term so endpoints reproduce an operand
    // bit for bit (including signed zeros).
    if (b == 0.0) {
      for (std::size_t i = 0; i < out.size(); ++i) o[i] = a * xv[i];
    } else if (a == 0.0) {
      for (std::size_t i = 0; i < out.size(); ++i) o[i] = b * yv[i];
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) o[i] = a * xv[i] + b * yv[i];
    }
  }
  const Var parents[] = {x, y};
  return x.tape()->record(OpKind::kLinComb, std::move(out), parents,
                          [a, b, x, y](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            if (DenseMatrix* gx = t.grad_slot(x)) gx->add_scaled(g, a);
                            if (DenseMatrix* gy = t.grad_slot(y)) gy->add_scaled(g, b);
                          });
}

Var add(Var a, Var b) { return lincomb(1.0, a, 1.0, b); }

Var affine_scalar(Var x, double a, double b) {
  DenseMatrix out = x.value();
  for (double& v : out.values()) v = a * v + b;
  const Var parents[] = {x};
  return x.tape()->record(OpKind::kAffineScalar, std::move(out), parents,
                          [a, x](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            if (DenseMatrix* gx = t.grad_slot(x)) gx->add_scaled(g, a);
                          });
}

Var spmm(const SparseOperator& a, Var x) {
  DenseMatrix out = kernels::spmm(a.forward, x.value());
  const Var parents[] = {x};
  const SparseOperator* op = &a;
  return x.tape()->record(OpKind::kSpmm, std::move(out), parents,
                          [op, x](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            if (DenseMatrix* gx = t.grad_slot(x)) {
                              gx->add_scaled(kernels::spmm(op->adjoint, g));
                            }
                          });
}

// ---------------------------------------------------------------------------
// Pointwise and row-wise nonlinearities

Var activation(Var x, Activation kind) {
  const double neg = kind == Activation::kRelu ? 0.0 : kLeakySlope;
  DenseMatrix out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : neg * v;
  const Var parents[] = {x};
  const OpKind op = kind == Activation::kRelu ? OpKind::kRelu : OpKind::kLeakyRelu;
  return x.tape()->record(op, std::move(out), parents,
                          [neg, x](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            DenseMatrix* gx = t.grad_slot(x);
                            if (!gx) return;
                            const double* in = t.value(x.id()).data();
                            const double* gi = g.data();
                            double* go = gx->data();
                            // Subgradient at exactly 0 is the negative-side slope.
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              go[i] += in[i] > 0.0 ? gi[i] : neg * gi[i];
                            }
                          });
}

Var softmax_rows(Var x) {
  const DenseMatrix& xv = x.value();
  if (xv.cols() == 0) throw ContractError("softmax_rows: zero columns");
  DenseMatrix out(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto in = xv.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) sum += (o[c] = std::exp(in[c] - mx));
    for (double& v : o) v /= sum;
  }
  const Var parents[] = {x};
  return x.tape()->record(OpKind::kSoftmaxRows, std::move(out), parents,
                          [x](Tape& t, const DenseMatrix& y, const DenseMatrix& g) {
                            DenseMatrix* gx = t.grad_slot(x);
                            if (!gx) return;
                            for (std::size_t r = 0; r < y.rows(); ++r) {
                              auto yr = y.row(r);
                              auto gr = g.row(r);
                              double dot = 0.0;
                              for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
                              auto out = gx->row(r);
                              for (std::size_t c = 0; c < yr.size(); ++c) out[c] += yr[c] * (gr[c] - dot);
                            }
                          });
}

Var row_cosine(Var s, Var t) {
  require_same_tape(s, t);
  const DenseMatrix& sv = s.value();
  const DenseMatrix& tv = t.value();
  require_shape(sv.same_shape(tv), "row_cosine", sv, tv);
  std::size_t clamped = 0;
  auto cos = kernels::row_cosine(sv, tv, kNormFloor, &clamped);
  s.tape()->note_clamped(clamped);
  DenseMatrix out(sv.rows(), 1, std::move(cos));
  const Var parents[] = {s, t};
  return s.tape()->record(
      OpKind::kRowCosine, std::move(out), parents,
      [s, t](Tape& tp, const DenseMatrix& y, const DenseMatrix& g) {
        const DenseMatrix& sv = tp.value(s.id());
        const DenseMatrix& tv = tp.value(t.id());
        DenseMatrix* gs = tp.grad_slot(s);
        DenseMatrix* gt = tp.grad_slot(t);
        for (std::size_t r = 0; r < sv.rows(); ++r) {
          auto a = sv.row(r);
          auto b = tv.row(r);
          double na = 0.0, nb = 0.0;
          for (std::size_t c = 0; c < a.size(); ++c) {
            na += a[c] * a[c];
            nb += b[c] * b[c];
          }
          na = std::sqrt(na);
          nb = std::sqrt(nb);
          const bool a_clamped = na < kNormFloor;
          const bool b_clamped = nb < kNormFloor;
          if (a_clamped) na = kNormFloor;
          if (b_clamped) nb = kNormFloor;
          const double gy = g(r, 0);
          const double yv = y(r, 0);
          const double inv = 1.0 / (na * nb);
          if (gs) {
            auto o = gs->row(r);
            const double self = a_clamped ? 0.0 : yv / (na * na);
            for (std::size_t c = 0; c < a.size(); ++c) o[c] += gy * (b[c] * inv - self * a[c]);
          }
          if (gt) {
            auto o = gt->row(r);
            const double self = b_clamped ? 0.0 : yv / (nb * nb);
            for (std::size_t c = 0; c < b.size(); ++c) o[c] += gy * (a[c] * inv - self * b[c]);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Losses

Var cross_entropy(Var p, const DenseMatrix& target) {
  const DenseMatrix& pv = p.value();
  require_shape(pv.same_shape(target), "cross_entropy", pv, target);
  const double hi = 1.0 - kProbFloor;
  double loss = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double o = target.data()[i];
    if (o != 0.0) loss -= o * std::log(clamp_prob(pv.data()[i], hi));
  }
  const double n = static_cast<double>(pv.rows());
  loss /= n;
  const Var parents[] = {p};
  return p.tape()->record(OpKind::kCrossEntropy, DenseMatrix::scalar(loss), parents,
                          [p, target, n, hi](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            DenseMatrix* gp = t.grad_slot(p);
                            if (!gp) return;
                            const DenseMatrix& pv = t.value(p.id());
                            const double scale = g(0, 0) / n;
                            for (std::size_t i = 0; i < pv.size(); ++i) {
                              const double pi = pv.data()[i];
                              if (pi < kProbFloor || pi > hi) continue;
                              gp->data()[i] -= scale * target.data()[i] / pi;
                            }
                          });
}

Var kl_div(const DenseMatrix& target, Var p) {
  const DenseMatrix& pv = p.value();
  require_shape(pv.same_shape(target), "kl_div", target, pv);
  double loss = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double o = target.data()[i];
    if (o > 0.0) loss += o * (std::log(o) - std::log(clamp_prob(pv.data()[i], 1.0)));
  }
  const double n = static_cast<double>(pv.rows());
  loss /= n;
  const Var parents[] = {p};
  return p.tape()->record(OpKind::kKlDiv, DenseMatrix::scalar(loss), parents,
                          [p, target, n](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            DenseMatrix* gp = t.grad_slot(p);
                            if (!gp) return;
                            const DenseMatrix& pv = t.value(p.id());
                            const double scale = g(0, 0) / n;
                            for (std::size_t i = 0; i < pv.size(); ++i) {
                              const double pi = pv.data()[i];
                              if (pi < kProbFloor || pi > 1.0) continue;
                              gp->data()[i] -= scale * target.data()[i] / pi;
                            }
                          });
}

Var frobenius_sq(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v * v;
  const Var parents[] = {x};
  return x.tape()->record(OpKind::kFrobeniusSq, DenseMatrix::scalar(s), parents,
                          [x](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            if (DenseMatrix* gx = t.grad_slot(x)) {
                              gx->add_scaled(t.value(x.id()), 2.0 * g(0, 0));
                            }
                          });
}

Var binary_cross_entropy(Var p, std::span<const double> labels) {
  const DenseMatrix& pv = p.value();
  if (pv.cols() != 1 || pv.rows() != labels.size()) {
    throw ShapeError("binary_cross_entropy: " + pv.shape_str() + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const double hi = 1.0 - kProbFloor;
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double q = clamp_prob(pv(i, 0), hi);
    loss -= labels[i] * std::log(q) + (1.0 - labels[i]) * std::log(1.0 - q);
  }
  const double n = static_cast<double>(labels.size());
  loss /= n;
  std::vector<double> y(labels.begin(), labels.end());
  const Var parents[] = {p};
  return p.tape()->record(OpKind::kBinaryCrossEntropy, DenseMatrix::scalar(loss), parents,
                          [p, y = std::move(y), n, hi](Tape& t, const DenseMatrix&,
                                                       const DenseMatrix& g) {
                            DenseMatrix* gp = t.grad_slot(p);
                            if (!gp) return;
                            const DenseMatrix& pv = t.value(p.id());
                            const double scale = g(0, 0) / n;
                            for (std::size_t i = 0; i < y.size(); ++i) {
                              const double q = pv(i, 0);
                              if (q < kProbFloor || q > hi) continue;
                              (*gp)(i, 0) += scale * (-y[i] / q + (1.0 - y[i]) / (1.0 - q));
                            }
                          });
}

// ---------------------------------------------------------------------------
// Structural ops

Var gather_rows(Var x, std::vector<std::size_t> index) {
  const DenseMatrix& xv = x.value();
  DenseMatrix out(index.size(), xv.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= xv.rows()) {
      throw ContractError("gather_rows: index " + std::to_string(index[r]) +
                          " out of range for " + xv.shape_str());
    }
    auto src = xv.row(index[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  const Var parents[] = {x};
  return x.tape()->record(OpKind::kGatherRows, std::move(out), parents,
                          [x, index = std::move(index)](Tape& t, const DenseMatrix&,
                                                        const DenseMatrix& g) {
                            DenseMatrix* gx = t.grad_slot(x);
                            if (!gx) return;
                            for (std::size_t r = 0; r < index.size(); ++r) {
                              auto src = g.row(r);
                              auto dst = gx->row(index[r]);
                              for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                            }
                          });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t width = 0;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    require_shape(p.rows() == rows, "concat_cols", parts[0].value(), p.value());
    width += p.cols();
  }
  DenseMatrix out(rows, width);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const DenseMatrix& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = pv.row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += pv.cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts[0].tape()->record(
      OpKind::kConcatCols, std::move(out), parts,
      [ps](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
        std::size_t offset = 0;
        for (const Var& p : ps) {
          const std::size_t w = t.value(p.id()).cols();
          if (DenseMatrix* gp = t.grad_slot(p)) {
            for (std::size_t r = 0; r < g.rows(); ++r) {
              auto src = g.row(r);
              auto dst = gp->row(r);
              for (std::size_t c = 0; c < w; ++c) dst[c] += src[offset + c];
            }
          }
          offset += w;
        }
      });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const DenseMatrix& xv = x.value();
  if (begin + count > xv.rows()) {
    throw ContractError("slice_rows: [" + std::to_string(begin) + ", " +
                        std::to_string(begin + count) + ") out of range for " + xv.shape_str());
  }
  DenseMatrix out(count, xv.cols());
  std::copy(xv.data() + begin * xv.cols(), xv.data() + (begin + count) * xv.cols(), out.data());
  const Var parents[] = {x};
  return x.tape()->record(OpKind::kSliceRows, std::move(out), parents,
                          [x, begin](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            DenseMatrix* gx = t.grad_slot(x);
                            if (!gx) return;
                            double* dst = gx->data() + begin * g.cols();
                            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g.data()[i];
                          });
}

Var column(Var x, std::size_t j) {
  const DenseMatrix& xv = x.value();
  if (j >= xv.cols()) throw ContractError("column: index out of range for " + xv.shape_str());
  DenseMatrix out(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) out(r, 0) = xv(r, j);
  const Var parents[] = {x};
  return x.tape()->record(OpKind::kColumn, std::move(out), parents,
                          [x, j](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            DenseMatrix* gx = t.grad_slot(x);
                            if (!gx) return;
                            for (std::size_t r = 0; r < g.rows(); ++r) (*gx)(r, j) += g(r, 0);
                          });
}

Var row_scale(Var x, Var s) {
  require_same_tape(x, s);
  const DenseMatrix& xv = x.value();
  const DenseMatrix& sv = s.value();
  require_shape(sv.cols() == 1 && sv.rows() == xv.rows(), "row_scale", xv, sv);
  DenseMatrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (double& v : out.row(r)) v *= sv(r, 0);
  }
  const Var parents[] = {x, s};
  return x.tape()->record(OpKind::kRowScale, std::move(out), parents,
                          [x, s](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            const DenseMatrix& xv = t.value(x.id());
                            const DenseMatrix& sv = t.value(s.id());
                            if (DenseMatrix* gx = t.grad_slot(x)) {
                              for (std::size_t r = 0; r < g.rows(); ++r) {
                                auto src = g.row(r);
                                auto dst = gx->row(r);
                                for (std::size_t c = 0; c < src.size(); ++c) dst[c] += sv(r, 0) * src[c];
                              }
                            }
                            if (DenseMatrix* gs = t.grad_slot(s)) {
                              for (std::size_t r = 0; r < g.rows(); ++r) {
                                auto gr = g.row(r);
                                auto xr = xv.row(r);
                                double dot = 0.0;
                                for (std::size_t c = 0; c < gr.size(); ++c) dot += gr[c] * xr[c];
                                (*gs)(r, 0) += dot;
                              }
                            }
                          });
}

// ---------------------------------------------------------------------------
// Gaussian latent ops

Var reparameterize(Var mu, Var log_sigma, const DenseMatrix& eps) {
  require_same_tape(mu, log_sigma);
  const DenseMatrix& mv = mu.value();
  const DenseMatrix& lv = log_sigma.value();
  require_shape(mv.same_shape(lv), "reparameterize", mv, lv);
  require_shape(mv.same_shape(eps), "reparameterize(eps)", mv, eps);
  DenseMatrix out(mv.rows(), mv.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ls = std::clamp(lv.data()[i], -kLogSigmaBound, kLogSigmaBound);
    out.data()[i] = mv.data()[i] + std::exp(ls) * eps.data()[i];
  }
  const Var parents[] = {mu, log_sigma};
  return mu.tape()->record(
      OpKind::kReparameterize, std::move(out), parents,
      [mu, log_sigma, eps](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
        if (DenseMatrix* gm = t.grad_slot(mu)) gm->add_scaled(g);
        if (DenseMatrix* gl = t.grad_slot(log_sigma)) {
          const DenseMatrix& lv = t.value(log_sigma.id());
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double ls = lv.data()[i];
            if (ls < -kLogSigmaBound || ls > kLogSigmaBound) continue;
            gl->data()[i] += g.data()[i] * std::exp(ls) * eps.data()[i];
          }
        }
      });
}

Var gaussian_kl(Var mu, Var log_sigma) {
  require_same_tape(mu, log_sigma);
  const DenseMatrix& mv = mu.value();
  const DenseMatrix& lv = log_sigma.value();
  require_shape(mv.same_shape(lv), "gaussian_kl", mv, lv);
  double s = 0.0;
  for (std::size_t i = 0; i < mv.size(); ++i) {
    const double m = mv.data()[i];
    const double ls = std::clamp(lv.data()[i], -kLogSigmaBound, kLogSigmaBound);
    s += 0.5 * (m * m + std::exp(2.0 * ls) - 1.0 - 2.0 * ls);
  }
  const double n = static_cast<double>(mv.rows());
  const Var parents[] = {mu, log_sigma};
  return mu.tape()->record(
      OpKind::kGaussianKl, DenseMatrix::scalar(s / n), parents,
      [mu, log_sigma, n](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
        const double scale = g(0, 0) / n;
        if (DenseMatrix* gm = t.grad_slot(mu)) gm->add_scaled(t.value(mu.id()), scale);
        if (DenseMatrix* gl = t.grad_slot(log_sigma)) {
          const DenseMatrix& lv = t.value(log_sigma.id());
          for (std::size_t i = 0; i < lv.size(); ++i) {
            const double ls = lv.data()[i];
            if (ls < -kLogSigmaBound || ls > kLogSigmaBound) continue;
            gl->data()[i] += scale * (std::exp(2.0 * ls) - 1.0);
          }
        }
      });
}

Var mean_squared_error(Var x, Var y) {
  require_same_tape(x, y);
  const DenseMatrix& xv = x.value();
  const DenseMatrix& yv = y.value();
  require_shape(xv.same_shape(yv), "mean_squared_error", xv, yv);
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double d = xv.data()[i] - yv.data()[i];
    s += d * d;
  }
  const double n = static_cast<double>(xv.size());
  const Var parents[] = {x, y};
  return x.tape()->record(OpKind::kMeanSquaredError, DenseMatrix::scalar(s / n), parents,
                          [x, y, n](Tape& t, const DenseMatrix&, const DenseMatrix& g) {
                            const DenseMatrix& xv = t.value(x.id());
                            const DenseMatrix& yv = t.value(y.id());
                            const double scale = 2.0 * g(0, 0) / n;
                            DenseMatrix* gx = t.grad_slot(x);
                            DenseMatrix* gy = t.grad_slot(y);
                            for (std::size_t i = 0; i < xv.size(); ++i) {
                              const double d = scale * (xv.data()[i] - yv.data()[i]);
                              if (gx) gx->data()[i] += d;
                              if (gy) gy->data()[i] -= d;
                            }
                          });
}

}  // namespace dida
