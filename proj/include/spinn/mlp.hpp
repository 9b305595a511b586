#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spinn/tape.hpp"
#include "spinn/tensor.hpp"

namespace spinn {

// One affine layer y = x·W + b with W stored [in, out] and b stored [out].
struct DenseLayer {
  Tensor weight;
  Tensor bias;
};

// tanh MLP; every layer but the last is followed by tanh.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_width() const;
  std::size_t output_width() const;
  // Layer widths as a chain, e.g. {1, 50, 50, 50}.
  std::vector<std::size_t> widths() const;
  std::size_t parameter_count() const;
};

// Deterministic 64-bit generator used for parameter initialization. Uniform
// draws are built from raw bits so results do not depend on the standard
// library's distribution implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))) and zero biases.
MlpParams init_mlp(const std::vector<std::size_t>& widths, SplitMix64& rng);

// Leaf ids of one MLP's parameters on a tape.
struct MlpNodes {
  struct Layer {
    NodeId weight;
    NodeId bias;
  };
  std::vector<Layer> layers;
};

MlpNodes bind(Tape& tape, const MlpParams& params);

// Plain forward pass: x [B, in] → [B, out].
NodeId mlp_forward(Tape& tape, const MlpNodes& net, NodeId x);
Tensor mlp_forward(const MlpParams& params, const Tensor& x);

}  // namespace spinn
