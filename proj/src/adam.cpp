#include "spinn/adam.hpp"

#include <cmath>

#include "spinn/errors.hpp"

namespace spinn {

AdamState adam_init(std::span<Tensor* const> params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->shape());
    s.v.emplace_back(p->shape());
  }
  return s;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config, std::span<const std::string> names) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw DimensionError("adam: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " +
                         std::to_string(state.m.size()) + " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape()) {
      throw DimensionError("adam: gradient " + shape_string(grads[i].shape()) +
                           " does not match parameter " + shape_string(params[i]->shape()));
    }
    if (!all_finite(grads[i])) {
      const std::string who = i < names.size() ? names[i] : "parameter #" + std::to_string(i);
      throw NumericalError("non-finite gradient in " + who + " at step " +
                           std::to_string(state.step + 1));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
}

}  // namespace spinn
