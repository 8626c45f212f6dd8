#pragma once

#include <string>
#include <vector>

#include "dida/rng.hpp"
#include "dida/tensor/tape.hpp"

namespace dida {

// Standard deviation of the Gaussian initializer: N(0, 0.01) read as
// variance 0.01.
inline constexpr double kInitStd = 0.1;

Parameter gaussian_parameter(std::string name, std::size_t rows, std::size_t cols, Rng& rng,
                             double std = kInitStd);

// Appends pointers to every parameter of a weight bundle.
using ParamList = std::vector<Parameter*>;

}  // namespace dida
