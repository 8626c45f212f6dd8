#include "dida/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dida {

namespace {
double evaluate(const GraphBuilder& build) {
  Tape tape;
  return build(tape).item();
}
}  // namespace

GradCheckResult finite_diff_check(const GraphBuilder& build, std::span<Parameter* const> params,
                                  double eps) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
  }

  GradCheckResult result;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + eps;
      const double up = evaluate(build);
      x = saved - eps;
      const double down = evaluate(build);
      x = saved;

      const double fd = (up - down) / (2.0 * eps);
      const double tg = p->grad.data()[i];
      const double err = std::abs(fd - tg) / std::max(1e-8, std::abs(fd) + std::abs(tg));
      ++result.coordinates;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = p->name;
        result.worst_index = i;
        result.worst_fd = fd;
        result.worst_tape = tg;
      }
    }
  }
  return result;
}

}  // namespace dida
