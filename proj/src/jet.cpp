#include "spinn/jet.hpp"

#include <string>

#include "spinn/errors.hpp"

namespace spinn {

Jet2Batch materialize(const Tape& tape, const Jet2Nodes& jet) {
  return {tape.value(jet.value), tape.value(jet.first), tape.value(jet.second)};
}

Jet2Nodes jet_seed(Tape& tape, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != 1) {
    throw UsageError("jet_seed expects a coordinate column [n,1], got " + shape_string(x.shape()));
  }
  return {tape.constant(x), tape.constant(Tensor(x.shape(), 1.0)),
          tape.constant(Tensor(x.shape(), 0.0))};
}

Jet2Nodes jet_seed_direction(Tape& tape, const Tensor& points, std::size_t axis) {
  if (points.rank() != 2) {
    throw UsageError("directional seed expects points [N,d], got " + shape_string(points.shape()));
  }
  if (axis >= points.dim(1)) {
    throw UsageError("direction axis " + std::to_string(axis) + " out of range for d=" +
                     std::to_string(points.dim(1)));
  }
  Tensor tangent(points.shape());
  for (std::size_t p = 0; p < points.dim(0); ++p) tangent(p, axis) = 1.0;
  return {tape.constant(points), tape.constant(std::move(tangent)),
          tape.constant(Tensor(points.shape(), 0.0))};
}

Jet2Nodes jet_affine(Tape& tape, const Jet2Nodes& in, NodeId weight, NodeId bias) {
  const NodeId z = tape.matmul(in.value, weight);
  const NodeId value = tape.add(z, bias);
  tape.release_if_unneeded(z);
  return {value, tape.matmul(in.first, weight), tape.matmul(in.second, weight)};
}

Jet2Nodes jet_tanh(Tape& tape, const Jet2Nodes& in) {
  const NodeId t0 = tape.tanh(in.value, 0);
  const NodeId t1 = tape.tanh(in.value, 1);
  const NodeId first = tape.mul(t1, in.first);

  const NodeId t0t1 = tape.mul(t0, t1);
  const NodeId t2 = tape.scale(t0t1, -2.0);
  tape.release_if_unneeded(t0t1);
  const NodeId curvature = tape.mul(t2, tape.square(in.first));
  const NodeId stretch = tape.mul(t1, in.second);
  const NodeId second = tape.add(curvature, stretch);
  tape.release_if_unneeded(curvature);
  tape.release_if_unneeded(stretch);
  return {t0, first, second};
}

namespace {

Jet2Nodes run_layers(Tape& tape, const MlpNodes& net, Jet2Nodes h) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    h = jet_affine(tape, h, net.layers[l].weight, net.layers[l].bias);
    if (l + 1 < net.layers.size()) h = jet_tanh(tape, h);
  }
  return h;
}

std::size_t weight_rows(const Tape& tape, const MlpNodes& net) {
  if (net.layers.empty()) throw UsageError("empty MLP");
  return tape.node(net.layers.front().weight).shape.at(0);
}

}  // namespace

Jet2Nodes mlp_jet_forward(Tape& tape, const MlpNodes& net, const Tensor& x) {
  if (weight_rows(tape, net) != 1) {
    throw UsageError("mlp_jet_forward needs a scalar-input network, input width is " +
                     std::to_string(weight_rows(tape, net)));
  }
  return run_layers(tape, net, jet_seed(tape, x));
}

Jet2Batch mlp_jet_forward(const MlpParams& params, const Tensor& x) {
  Tape tape;
  const MlpNodes net = bind(tape, params);
  return materialize(tape, mlp_jet_forward(tape, net, x));
}

Jet2Nodes directional_jet_forward(Tape& tape, const MlpNodes& net, const Tensor& points,
                                  std::size_t axis) {
  if (points.rank() != 2 || weight_rows(tape, net) != points.dim(1)) {
    throw UsageError("directional_jet_forward: points " + shape_string(points.shape()) +
                     " do not match network input width " +
                     std::to_string(weight_rows(tape, net)));
  }
  return run_layers(tape, net, jet_seed_direction(tape, points, axis));
}

MultiJet2Nodes multi_directional_jet_forward(Tape& tape, const MlpNodes& net,
                                             const Tensor& points,
                                             const std::vector<std::size_t>& axes) {
  if (points.rank() != 2 || weight_rows(tape, net) != points.dim(1)) {
    throw UsageError("multi_directional_jet_forward: points " + shape_string(points.shape()) +
                     " do not match network input width " +
                     std::to_string(weight_rows(tape, net)));
  }
  MultiJet2Nodes h;
  h.value = tape.constant(points);
  const NodeId zeros = tape.constant(Tensor(points.shape(), 0.0));
  for (std::size_t axis : axes) {
    h.first.push_back(jet_seed_direction(tape, points, axis).first);
    h.second.push_back(zeros);
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const NodeId w = net.layers[l].weight;
    const NodeId z = tape.matmul(h.value, w);
    h.value = tape.add(z, net.layers[l].bias);
    tape.release_if_unneeded(z);
    for (std::size_t d = 0; d < axes.size(); ++d) {
      h.first[d] = tape.matmul(h.first[d], w);
      h.second[d] = tape.matmul(h.second[d], w);
    }
    if (l + 1 == net.layers.size()) break;

    const NodeId v = h.value;
    const NodeId t0 = tape.tanh(v, 0);
    const NodeId t1 = tape.tanh(v, 1);
    const NodeId t0t1 = tape.mul(t0, t1);
    const NodeId t2 = tape.scale(t0t1, -2.0);
    tape.release_if_unneeded(t0t1);
    for (std::size_t d = 0; d < axes.size(); ++d) {
      const NodeId curvature = tape.mul(t2, tape.square(h.first[d]));
      const NodeId stretch = tape.mul(t1, h.second[d]);
      h.first[d] = tape.mul(t1, h.first[d]);
      h.second[d] = tape.add(curvature, stretch);
      tape.release_if_unneeded(curvature);
      tape.release_if_unneeded(stretch);
    }
    h.value = t0;
  }
  return h;
}

Jet2Batch directional_jet_forward(const MlpParams& params, const Tensor& points,
                                  std::size_t axis) {
  Tape tape;
  const MlpNodes net = bind(tape, params);
  return materialize(tape, directional_jet_forward(tape, net, points, axis));
}

}  // namespace spinn
