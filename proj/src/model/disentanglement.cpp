#include "dida/model/disentanglement.hpp"

#include <algorithm>

#include "dida/error.hpp"

namespace dida {

DisentangleWeights DisentangleWeights::init(const std::string& prefix, std::size_t in_width,
                                            std::size_t k, Rng& rng) {
  DisentangleWeights d;
  d.w0 = gaussian_parameter(prefix + ".w0", in_width, 2 * k, rng);
  d.b0 = gaussian_parameter(prefix + ".b0", 1, 2 * k, rng);
  for (int h = 0; h < 2; ++h) {
    const std::string p = prefix + ".head" + std::to_string(h + 1);
    d.head[h].w_mu = gaussian_parameter(p + ".w_mu", 2 * k, k, rng);
    d.head[h].b_mu = gaussian_parameter(p + ".b_mu", 1, k, rng);
    d.head[h].w_sigma = gaussian_parameter(p + ".w_sigma", 2 * k, k, rng);
    d.head[h].b_sigma = gaussian_parameter(p + ".b_sigma", 1, k, rng);
  }
  return d;
}

void DisentangleWeights::collect(ParamList& out) {
  out.push_back(&w0);
  out.push_back(&b0);
  for (auto& h : head) {
    out.push_back(&h.w_mu);
    out.push_back(&h.b_mu);
    out.push_back(&h.w_sigma);
    out.push_back(&h.b_sigma);
  }
}

EncodedBranch encode(Var e, DisentangleWeights& weights, Rng* noise) {
  Tape& t = *e.tape();
  if (e.cols() != weights.in_width())
    throw ShapeError("encode: input width " + std::to_string(e.cols()) + ", encoder expects " +
                     std::to_string(weights.in_width()));
  Var h = relu(affine(e, t.parameter(weights.w0), t.parameter(weights.b0)));
  EncodedBranch out;
  Var z[2];
  for (int k = 0; k < 2; ++k) {
    GaussianHead& head = weights.head[k];
    out.mu[k] = affine(h, t.parameter(head.w_mu), t.parameter(head.b_mu));
    out.log_sigma[k] = affine(h, t.parameter(head.w_sigma), t.parameter(head.b_sigma));
    if (noise) {
      DenseMatrix eps(out.mu[k].rows(), out.mu[k].cols());
      for (double& v : eps.values()) v = noise->normal();
      z[k] = reparameterize(out.mu[k], out.log_sigma[k], eps);
    } else {
      z[k] = out.mu[k];
    }
  }
  out.z1 = z[0];
  out.z2 = z[1];
  return out;
}

DomainClassifier DomainClassifier::init(std::size_t k, Rng& rng) {
  return {gaussian_parameter("cls.w", k, 2, rng), gaussian_parameter("cls.b", 1, 2, rng)};
}

void DomainClassifier::collect(ParamList& out) {
  out.push_back(&w);
  out.push_back(&b);
}

Var classify_domain(Var z, DomainClassifier& classifier) {
  Tape& t = *z.tape();
  return softmax_rows(affine(z, t.parameter(classifier.w), t.parameter(classifier.b)));
}

DenseMatrix domain_labels(std::size_t rows, DomainLabel label) {
  DenseMatrix o(rows, 2);
  for (std::size_t r = 0; r < rows; ++r) {
    o(r, 0) = label == DomainLabel::kA ? 1.0 : label == DomainLabel::kB ? 0.0 : 0.5;
    o(r, 1) = 1.0 - o(r, 0);
  }
  return o;
}

Var loss_cls1(Var spe_a, Var spe_b, Var spe_aug, double lambda, DomainClassifier& classifier) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("loss_cls1: lambda outside [0, 1]");
  Var la = cross_entropy(classify_domain(spe_a, classifier), domain_labels(spe_a.rows(), DomainLabel::kA));
  Var lb = cross_entropy(classify_domain(spe_b, classifier), domain_labels(spe_b.rows(), DomainLabel::kB));
  Var p_aug = classify_domain(spe_aug, classifier);
  Var aug_a = cross_entropy(p_aug, domain_labels(spe_aug.rows(), DomainLabel::kA));
  Var aug_b = cross_entropy(p_aug, domain_labels(spe_aug.rows(), DomainLabel::kB));
  Var aug = lincomb(lambda, aug_a, 1.0 - lambda, aug_b);
  return scale(add(add(la, lb), aug), 1.0 / 3.0);
}

Var loss_cls2(Var ind_a, Var ind_b, Var sha_aug, DomainClassifier& classifier) {
  auto term = [&](Var z) {
    return kl_div(domain_labels(z.rows(), DomainLabel::kUniform), classify_domain(z, classifier));
  };
  return scale(add(add(term(ind_a), term(ind_b)), term(sha_aug)), 1.0 / 3.0);
}

}  // namespace dida
