#include "dida/model/init.hpp"

namespace dida {

Parameter gaussian_parameter(std::string name, std::size_t rows, std::size_t cols, Rng& rng,
                             double std) {
  DenseMatrix v(rows, cols);
  for (double& x : v.values()) x = std * rng.normal();
  return Parameter(std::move(name), std::move(v));
}

}  // namespace dida
