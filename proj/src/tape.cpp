#include "spinn/tape.hpp"

#include <string>

#include "spinn/errors.hpp"

namespace spinn {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Constant: return "constant";
    case OpKind::MatMul: return "matmul";
    case OpKind::MatMulTN: return "matmul_tn";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Tanh: return "tanh";
    case OpKind::Square: return "square";
    case OpKind::Scale: return "scale";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Merge: return "merge";
  }
  return "?";
}

const Tensor& Gradients::operator[](NodeId leaf) const {
  auto it = adjoints_.find(leaf);
  if (it == adjoints_.end()) {
    throw UsageError("node " + std::to_string(leaf) + " is not a leaf of this tape");
  }
  return it->second;
}

namespace {

// Whether the adjoint rule of `kind` reads the primal of its inputs.
bool reads_input_primals(OpKind kind) {
  switch (kind) {
    case OpKind::MatMul:
    case OpKind::MatMulTN:
    case OpKind::Mul:
    case OpKind::Tanh:
    case OpKind::Square:
    case OpKind::Merge:
      return true;
    default:
      return false;
  }
}

}  // namespace

void Tape::check_input(NodeId id) const {
  if (id >= nodes_.size()) {
    throw UsageError("tape input id " + std::to_string(id) + " is not on the tape (size " +
                     std::to_string(nodes_.size()) + ")");
  }
}

const Tensor& Tape::input_value(NodeId id) const {
  check_input(id);
  const auto& v = nodes_[id].value;
  if (!v) {
    throw UsageError("primal of node " + std::to_string(id) + " (" +
                     std::string(op_name(nodes_[id].kind)) + ") has been released");
  }
  return *v;
}

NodeId Tape::record(OpKind kind, std::vector<NodeId> inputs, Tensor primal, int order,
                    double factor) {
  if (swept_) throw UsageError("tape already ran backward; reset() before recording");
  bool grad = kind == OpKind::Leaf;
  for (NodeId in : inputs) {
    check_input(in);
    grad = grad || nodes_[in].requires_grad;
    if (reads_input_primals(kind)) primal_needed_[in] = true;
  }
  const NodeId id = nodes_.size();
  Shape shape = primal.shape();
  nodes_.push_back(TapeNode{kind, std::move(inputs), order, factor, grad, std::move(shape),
                            std::move(primal)});
  primal_needed_.push_back(false);
  if (kind == OpKind::Leaf) leaves_.push_back(id);
  return id;
}

NodeId Tape::leaf(Tensor value) { return record(OpKind::Leaf, {}, std::move(value)); }

NodeId Tape::constant(Tensor value) { return record(OpKind::Constant, {}, std::move(value)); }

NodeId Tape::binary(OpKind kind, NodeId a, NodeId b) {
  const Tensor& va = input_value(a);
  const Tensor& vb = input_value(b);
  Tensor out;
  switch (kind) {
    case OpKind::MatMul: out = spinn::matmul(va, vb); break;
    case OpKind::MatMulTN: out = spinn::matmul_tn(va, vb); break;
    case OpKind::Add: out = spinn::add(va, vb); break;
    case OpKind::Sub: out = spinn::sub(va, vb); break;
    case OpKind::Mul: out = spinn::mul(va, vb); break;
    default: throw UsageError("not a binary op");
  }
  return record(kind, {a, b}, std::move(out));
}

NodeId Tape::matmul(NodeId a, NodeId b) { return binary(OpKind::MatMul, a, b); }
NodeId Tape::matmul_tn(NodeId a, NodeId b) { return binary(OpKind::MatMulTN, a, b); }
NodeId Tape::add(NodeId a, NodeId b) { return binary(OpKind::Add, a, b); }
NodeId Tape::sub(NodeId a, NodeId b) { return binary(OpKind::Sub, a, b); }
NodeId Tape::mul(NodeId a, NodeId b) { return binary(OpKind::Mul, a, b); }

NodeId Tape::tanh(NodeId a, int order) {
  if (order < 0 || order > 2) {
    throw UsageError("tape tanh order must be 0, 1 or 2, got " + std::to_string(order));
  }
  return record(OpKind::Tanh, {a}, spinn::tanh_k(order, input_value(a)), order);
}

NodeId Tape::square(NodeId a) {
  return record(OpKind::Square, {a}, spinn::square(input_value(a)));
}

NodeId Tape::scale(NodeId a, double c) {
  return record(OpKind::Scale, {a}, spinn::scale(input_value(a), c), 0, c);
}

NodeId Tape::sum(NodeId a) {
  return record(OpKind::Sum, {a}, Tensor::scalar(spinn::sum(input_value(a))));
}

NodeId Tape::mean(NodeId a) {
  return record(OpKind::Mean, {a}, Tensor::scalar(spinn::mean(input_value(a))));
}

NodeId Tape::merge(std::span<const NodeId> factors) {
  std::vector<Tensor> values;
  values.reserve(factors.size());
  // Copies are cheap next to the merged grid: factors are [n_i, r].
  for (NodeId f : factors) values.push_back(input_value(f));
  Tensor out = spinn::merge(values);
  return record(OpKind::Merge, std::vector<NodeId>(factors.begin(), factors.end()),
                std::move(out));
}

const Tensor& Tape::value(NodeId id) const { return input_value(id); }

const TapeNode& Tape::node(NodeId id) const {
  check_input(id);
  return nodes_[id];
}

void Tape::release_if_unneeded(NodeId id) {
  check_input(id);
  if (!primal_needed_[id] && nodes_[id].kind != OpKind::Leaf) nodes_[id].value.reset();
}

std::size_t Tape::primal_bytes() const {
  std::size_t bytes = 0;
  for (const auto& n : nodes_)
    if (n.value) bytes += n.value->nbytes();
  return bytes;
}

void Tape::reset() {
  nodes_.clear();
  leaves_.clear();
  primal_needed_.clear();
  swept_ = false;
}

Gradients Tape::backward(NodeId root) { return backward(root, 1.0); }

Gradients Tape::backward(NodeId root, double seed) {
  check_input(root);
  if (swept_) throw UsageError("backward called twice on the same tape without reset()");
  if (shape_size(nodes_[root].shape) != 1) {
    throw UsageError("backward root must be a single-element tensor");
  }
  swept_ = true;

  std::vector<std::optional<Tensor>> adj(nodes_.size());
  adj[root] = Tensor(nodes_[root].shape, seed);

  auto accumulate = [&](NodeId id, Tensor&& g) {
    if (!nodes_[id].requires_grad) return;
    if (!adj[id]) {
      adj[id] = std::move(g);
    } else {
      double* dst = adj[id]->data().data();
      const double* src = g.data().data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
    }
  };
  // Broadcast-add/sub adjoint of the row operand.
  auto reduce_to = [](const Tensor& g, const Shape& target) {
    return g.shape() == target ? g : sum_rows(g, target);
  };

  Gradients grads;
  for (NodeId id = root + 1; id-- > 0;) {
    TapeNode& node = nodes_[id];
    if (node.kind == OpKind::Leaf) {
      grads.adjoints_.emplace(id, adj[id] ? std::move(*adj[id]) : Tensor(node.shape));
      continue;
    }
    if (adj[id] && node.requires_grad) {
      const Tensor& g = *adj[id];
      const auto& in = node.inputs;
      switch (node.kind) {
        case OpKind::MatMul: {
          if (nodes_[in[0]].requires_grad) accumulate(in[0], spinn::matmul_nt(g, input_value(in[1])));
          if (nodes_[in[1]].requires_grad) accumulate(in[1], spinn::matmul_tn(input_value(in[0]), g));
          break;
        }
        case OpKind::MatMulTN: {
          // C = AᵀB: dA = B·dCᵀ, dB = A·dC.
          if (nodes_[in[0]].requires_grad) accumulate(in[0], spinn::matmul_nt(input_value(in[1]), g));
          if (nodes_[in[1]].requires_grad) accumulate(in[1], spinn::matmul(input_value(in[0]), g));
          break;
        }
        case OpKind::Add:
        case OpKind::Sub: {
          const Shape& bshape = nodes_[in[1]].shape;
          if (nodes_[in[1]].requires_grad) {
            Tensor gb = reduce_to(g, bshape);
            accumulate(in[1], node.kind == OpKind::Sub ? spinn::scale(gb, -1.0) : std::move(gb));
          }
          if (nodes_[in[0]].requires_grad) accumulate(in[0], Tensor(g));
          break;
        }
        case OpKind::Mul: {
          const Tensor& a = input_value(in[0]);
          const Tensor& b = input_value(in[1]);
          if (nodes_[in[0]].requires_grad) accumulate(in[0], spinn::mul(g, b));
          if (nodes_[in[1]].requires_grad) accumulate(in[1], reduce_to(spinn::mul(g, a), b.shape()));
          break;
        }
        case OpKind::Tanh:
          accumulate(in[0], spinn::mul(g, tanh_k(node.order + 1, input_value(in[0]))));
          break;
        case OpKind::Square:
          accumulate(in[0], spinn::mul(g, spinn::scale(input_value(in[0]), 2.0)));
          break;
        case OpKind::Scale:
          accumulate(in[0], spinn::scale(g, node.factor));
          break;
        case OpKind::Sum:
        case OpKind::Mean: {
          const NodeId src = in[0];
          const Shape& shape = nodes_[src].shape;
          const double n = static_cast<double>(shape_size(shape));
          const double v = node.kind == OpKind::Mean ? g.item() / n : g.item();
          accumulate(src, Tensor(shape, v));
          break;
        }
        case OpKind::Merge: {
          std::vector<Tensor> factors;
          factors.reserve(in.size());
          for (NodeId f : in) factors.push_back(input_value(f));
          auto parts = merge_adjoint(factors, g);
          for (std::size_t k = 0; k < in.size(); ++k) accumulate(in[k], std::move(parts[k]));
          break;
        }
        case OpKind::Leaf:
        case OpKind::Constant:
          break;
      }
    }
    adj[id].reset();
    // Every consumer of this node has been swept already.
    node.value.reset();
  }
  // Leaves recorded after the root cannot depend on it.
  for (NodeId leaf : leaves_) {
    if (leaf > root) grads.adjoints_.emplace(leaf, Tensor(nodes_[leaf].shape));
  }
  return grads;
}

}  // namespace spinn
