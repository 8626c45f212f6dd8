#pragma once

#include "dida/rng.hpp"
#include "dida/tensor/tape.hpp"

namespace dida {

// Gamma(alpha, 1). Marsaglia-Tsang squeeze for alpha >= 1; for alpha < 1 a
// Gamma(alpha + 1) draw is scaled by U^(1/alpha).
double sample_gamma(double alpha, Rng& rng);

// Beta(alpha, alpha) as X / (X + Y) with X, Y ~ Gamma(alpha, 1).
double sample_lambda(double alpha, Rng& rng);

// lambda * a + (1 - lambda) * b; lambda carries no gradient. lambda = 1 and
// lambda = 0 reproduce `a` and `b` exactly.
Var interpolate(Var a, Var b, double lambda);

}  // namespace dida
