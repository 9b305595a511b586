#pragma once

// Second-order Taylor jets with respect to one scalar input coordinate.
//
// A jet carries (value, first, second) = (f, df/dx, d²f/dx²) as three tensor
// channels. Every channel is an ordinary tape node, so reverse-mode sweeps
// through a jet yield parameter gradients of derivative quantities.

#include <cstddef>
#include <vector>

#include "spinn/mlp.hpp"
#include "spinn/tape.hpp"

namespace spinn {

struct Jet2Nodes {
  NodeId value;
  NodeId first;
  NodeId second;
};

struct Jet2Batch {
  Tensor value;
  Tensor first;
  Tensor second;
};

Jet2Batch materialize(const Tape& tape, const Jet2Nodes& jet);

// (x, 1, 0) for a column of coordinates x [n, 1].
Jet2Nodes jet_seed(Tape& tape, const Tensor& x);
// (X, e_axis, 0) for points X [N, d]: the unit tangent along one coordinate.
Jet2Nodes jet_seed_direction(Tape& tape, const Tensor& points, std::size_t axis);

// (v·W + b, v'·W, v''·W).
Jet2Nodes jet_affine(Tape& tape, const Jet2Nodes& in, NodeId weight, NodeId bias);

// tanh applied through the chain rule:
//   value  = tanh(v)
//   first  = tanh'(v) ∘ v'
//   second = tanh''(v) ∘ v'² + tanh'(v) ∘ v''
// with tanh'' formed as -2 tanh(v) tanh'(v).
Jet2Nodes jet_tanh(Tape& tape, const Jet2Nodes& in);

// Jets of a scalar-input body network at n coordinates: x [n, 1] → [n, out].
Jet2Nodes mlp_jet_forward(Tape& tape, const MlpNodes& net, const Tensor& x);
Jet2Batch mlp_jet_forward(const MlpParams& params, const Tensor& x);

// Jets of a d-input network along coordinate `axis` at N points [N, d].
Jet2Nodes directional_jet_forward(Tape& tape, const MlpNodes& net, const Tensor& points,
                                  std::size_t axis);
Jet2Batch directional_jet_forward(const MlpParams& params, const Tensor& points,
                                  std::size_t axis);

// Several coordinate directions through one pass. The value channel and the
// tanh derivatives are shared; each direction adds its own tangent channels.
struct MultiJet2Nodes {
  NodeId value;
  std::vector<NodeId> first;   // one per requested axis, in request order
  std::vector<NodeId> second;
};
MultiJet2Nodes multi_directional_jet_forward(Tape& tape, const MlpNodes& net,
                                             const Tensor& points,
                                             const std::vector<std::size_t>& axes);

}  // namespace spinn
