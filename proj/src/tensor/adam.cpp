#include "dida/tensor/adam.hpp"

#include <cmath>

#include "dida/error.hpp"

namespace dida {

void adam_step(std::span<DenseMatrix* const> values, std::span<const DenseMatrix* const> grads,
               AdamState& state) {
  if (values.size() != grads.size()) {
    throw ContractError("adam_step: " + std::to_string(values.size()) + " parameters but " +
                        std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty() && state.step == 0) {
    for (const DenseMatrix* p : values) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.m.size() != values.size()) throw ContractError("adam_step: parameter census changed");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i]->same_shape(*grads[i]) || !values[i]->same_shape(state.m[i])) {
      throw ContractError("adam_step: shape mismatch for parameter " + std::to_string(i) + ": " +
                          values[i]->shape_str() + " vs grad " + grads[i]->shape_str());
    }
  }

  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < values.size(); ++i) {
    double* p = values[i]->data();
    const double* g = grads[i]->data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    for (std::size_t j = 0, n = values[i]->size(); j < n; ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  std::vector<DenseMatrix*> values;
  std::vector<const DenseMatrix*> grads;
  values.reserve(params.size());
  grads.reserve(params.size());
  for (Parameter* p : params) {
    values.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  adam_step(values, grads, state);
}

}  // namespace dida
