#include "dida/model/augmentation.hpp"

#include <cmath>

#include "dida/error.hpp"

namespace dida {

double sample_gamma(double alpha, Rng& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("gamma shape must be > 0");
  if (alpha < 1.0) {
    const double g = sample_gamma(alpha + 1.0, rng);
    return g * std::pow(rng.uniform_open(), 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("mixup alpha must be > 0");
  // Small alpha can underflow both draws to zero; redraw rather than divide.
  while (true) {
    const double x = sample_gamma(alpha, rng);
    const double y = sample_gamma(alpha, rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

Var interpolate(Var a, Var b, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("interpolate: lambda outside [0, 1]");
  if (!a.value().same_shape(b.value()))
    throw ContractError("interpolate: " + a.value().shape_str() + " vs " + b.value().shape_str());
  return lincomb(lambda, a, 1.0 - lambda, b);
}

}  // namespace dida
