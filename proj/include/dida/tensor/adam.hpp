#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dida/tensor/dense.hpp"
#include "dida/tensor/tape.hpp"

namespace dida {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers, one per parameter, plus the shared step count.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<DenseMatrix> m;
  std::vector<DenseMatrix> v;
};

// One bias-corrected Adam update of `values` from `grads`. Moment buffers are
// allocated on the first call; later calls must pass the same shapes.
void adam_step(std::span<DenseMatrix* const> values, std::span<const DenseMatrix* const> grads,
               AdamState& state);

// Same update reading gradients from Parameter::grad.
void adam_step(std::span<Parameter* const> params, AdamState& state);

}  // namespace dida
