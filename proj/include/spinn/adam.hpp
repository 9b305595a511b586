#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spinn/tensor.hpp"

namespace spinn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

AdamState adam_init(std::span<Tensor* const> params);

// One bias-corrected Adam update in place. A non-finite gradient throws
// NumericalError naming the parameter (names[i] when given, else its index)
// before anything is modified.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config, std::span<const std::string> names = {});

}  // namespace spinn
