#pragma once

// Define-by-run reverse-mode differentiation over the tensor kernel set.
//
// Each op computes its primal eagerly, stores it on the tape and returns a
// node id. backward() walks the tape once in reverse, applying a hand-written
// adjoint rule per op kind, and returns the adjoints of the leaves.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "spinn/tensor.hpp"

namespace spinn {

using NodeId = std::size_t;

enum class OpKind {
  Leaf,      // differentiable input (parameter)
  Constant,  // non-differentiable input
  MatMul,
  MatMulTN,
  Add,
  Sub,
  Mul,
  Tanh,  // tanh_k with order in TapeNode::order
  Square,
  Scale,  // by TapeNode::factor
  Sum,
  Mean,
  Merge,
};

std::string_view op_name(OpKind kind);

struct TapeNode {
  OpKind kind = OpKind::Constant;
  std::vector<NodeId> inputs;
  int order = 0;
  double factor = 1.0;
  bool requires_grad = false;
  Shape shape;
  std::optional<Tensor> value;
};

class Gradients {
 public:
  // Adjoint of a leaf; zeros of the leaf's shape if the root does not depend on it.
  const Tensor& operator[](NodeId leaf) const;
  bool contains(NodeId leaf) const { return adjoints_.contains(leaf); }
  std::size_t size() const { return adjoints_.size(); }

 private:
  friend class Tape;
  std::map<NodeId, Tensor> adjoints_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  NodeId leaf(Tensor value);
  NodeId constant(Tensor value);

  // Appends a node whose primal has already been computed.
  NodeId record(OpKind kind, std::vector<NodeId> inputs, Tensor primal, int order = 0,
                double factor = 1.0);

  NodeId matmul(NodeId a, NodeId b);
  // aᵀ·b
  NodeId matmul_tn(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId tanh(NodeId a, int order = 0);
  NodeId square(NodeId a);
  NodeId scale(NodeId a, double c);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId merge(std::span<const NodeId> factors);

  const Tensor& value(NodeId id) const;
  const TapeNode& node(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  std::span<const NodeId> leaves() const { return leaves_; }

  // Drops the stored primal of `id` if no recorded consumer's adjoint rule
  // needs it. Callers use this once they know no further consumers follow.
  void release_if_unneeded(NodeId id);
  // Bytes currently held by stored primals.
  std::size_t primal_bytes() const;

  // Reverse sweep from a single-element root. Primals are released as the
  // sweep passes them, so a tape supports one backward per reset().
  Gradients backward(NodeId root);
  // Same, seeding the root adjoint with `seed` instead of 1.
  Gradients backward(NodeId root, double seed);

  void reset();

 private:
  const Tensor& input_value(NodeId id) const;
  void check_input(NodeId id) const;
  NodeId binary(OpKind kind, NodeId a, NodeId b);

  std::vector<TapeNode> nodes_;
  std::vector<NodeId> leaves_;
  // Whether some consumer's adjoint rule reads this node's primal.
  std::vector<bool> primal_needed_;
  bool swept_ = false;
};

}  // namespace spinn
