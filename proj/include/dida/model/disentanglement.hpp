#pragma once

#include "dida/model/init.hpp"
#include "dida/tensor/tape.hpp"

namespace dida {

struct GaussianHead {
  Parameter w_mu, b_mu;        // 2k x k, 1 x k
  Parameter w_sigma, b_sigma;  // 2k x k, 1 x k
};

// FC+ReLU trunk ((l+1)k -> 2k) feeding two reparameterized heads (2k -> k).
struct DisentangleWeights {
  Parameter w0, b0;
  GaussianHead head[2];

  static DisentangleWeights init(const std::string& prefix, std::size_t in_width,
                                 std::size_t k, Rng& rng);
  std::size_t in_width() const { return w0.value.rows(); }
  std::size_t k() const { return head[0].w_mu.value.cols(); }
  void collect(ParamList& out);
};

struct EncodedBranch {
  Var z1;  // head 1: independent code (shared code on the augmented branch)
  Var z2;  // head 2: specific code
  Var mu[2];
  Var log_sigma[2];  // clamped to [-kLogSigmaBound, kLogSigmaBound]
};

// With `noise` null the codes are the means (evaluation path); otherwise
// Z = mu + exp(log_sigma) * eps with eps drawn from `noise`.
EncodedBranch encode(Var e, DisentangleWeights& weights, Rng* noise);

struct DomainClassifier {
  Parameter w, b;  // k x 2, 1 x 2

  static DomainClassifier init(std::size_t k, Rng& rng);
  void collect(ParamList& out);
};

// softmax(Z W + b): column 0 is domain A, column 1 domain B.
Var classify_domain(Var z, DomainClassifier& classifier);

enum class DomainLabel { kA, kB, kUniform };
// `rows` copies of [1,0], [0,1] or [0.5,0.5].
DenseMatrix domain_labels(std::size_t rows, DomainLabel label);

// (1/3) [CE(H(spe_a), A) + CE(H(spe_b), B)
//        + lambda CE(H(spe_aug), A) + (1 - lambda) CE(H(spe_aug), B)]
Var loss_cls1(Var spe_a, Var spe_b, Var spe_aug, double lambda, DomainClassifier& classifier);
// (1/3) sum of KL(uniform || H(.)) over the three codes.
Var loss_cls2(Var ind_a, Var ind_b, Var sha_aug, DomainClassifier& classifier);

}  // namespace dida
