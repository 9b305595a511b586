#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "spinn/jet.hpp"
#include "spinn/mlp.hpp"

using namespace spinn;

namespace {

Tensor shifted(const Tensor& x, std::size_t axis, double h) {
  Tensor out = x;
  const std::size_t d = x.dim(1);
  for (std::size_t p = 0; p < x.dim(0); ++p) out[p * d + axis] += h;
  return out;
}

struct FdDerivs {
  Tensor first, second;
};

FdDerivs fd_derivs(const MlpParams& net, const Tensor& x, std::size_t axis) {
  const double h1 = 1e-5, h2 = 1e-3;
  const Tensor f0 = mlp_forward(net, x);
  const Tensor fp = mlp_forward(net, shifted(x, axis, h1)), fm = mlp_forward(net, shifted(x, axis, -h1));
  const Tensor gp = mlp_forward(net, shifted(x, axis, h2)), gm = mlp_forward(net, shifted(x, axis, -h2));
  FdDerivs d{Tensor(f0.shape()), Tensor(f0.shape())};
  for (std::size_t i = 0; i < f0.size(); ++i) {
    d.first[i] = (fp[i] - fm[i]) / (2 * h1);
    d.second[i] = (gp[i] - 2 * f0[i] + gm[i]) / (h2 * h2);
  }
  return d;
}

// Relative to the largest reference magnitude.
double scaled_err(const Tensor& a, const Tensor& ref) {
  double e = 0, s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    e = std::max(e, std::abs(a[i] - ref[i]));
    s = std::max(s, std::abs(ref[i]));
  }
  return e / s;
}

}  // namespace

TEST_CASE("scalar-input jets match finite-difference stencils on 5-layer tanh nets") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SplitMix64 rng(100 + seed);
    const MlpParams net = init_mlp({1, 16, 16, 16, 16, 4}, rng);
    const Tensor x = oracle::random_tensor({9, 1}, rng);
    const Jet2Batch jet = mlp_jet_forward(net, x);
    const FdDerivs fd = fd_derivs(net, x, 0);
    CHECK(jet.value == mlp_forward(net, x));
    CHECK(scaled_err(jet.first, fd.first) < 1e-5);
    CHECK(scaled_err(jet.second, fd.second) < 1e-5);
  }
}

TEST_CASE("directional and multi-direction jets agree with finite differences") {
  SplitMix64 rng(7);
  const MlpParams net = init_mlp({3, 12, 12, 12, 12, 1}, rng);
  const Tensor pts = oracle::random_tensor({11, 3}, rng);
  Tape tape;
  const MlpNodes nodes = bind(tape, net);
  const MultiJet2Nodes multi = multi_directional_jet_forward(tape, nodes, pts, {0, 1, 2});
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const Jet2Batch single = directional_jet_forward(net, pts, axis);
    const FdDerivs fd = fd_derivs(net, pts, axis);
    CHECK(scaled_err(single.first, fd.first) < 1e-5);
    CHECK(scaled_err(single.second, fd.second) < 1e-5);
    // Sharing the tanh derivatives must not change a single bit.
    CHECK(tape.value(multi.first[axis]) == single.first);
    CHECK(tape.value(multi.second[axis]) == single.second);
  }
}

TEST_CASE("linear networks have zero second derivative") {
  SplitMix64 rng(1);
  const MlpParams net = init_mlp({1, 3}, rng);
  const Jet2Batch jet = mlp_jet_forward(net, Tensor::column({0.1, 0.5}));
  CHECK(jet.second == Tensor(jet.second.shape()));
  for (std::size_t i = 0; i < 3; ++i) CHECK(jet.first(0, i) == net.layers[0].weight(0, i));
}

TEST_CASE("gradients flow through jet channels") {
  SplitMix64 rng(12);
  const MlpParams net = init_mlp({1, 5, 5, 2}, rng);
  const Tensor x = oracle::random_tensor({4, 1}, rng);
  Tape tape;
  const MlpNodes nodes = bind(tape, net);
  const Jet2Nodes jet = mlp_jet_forward(tape, nodes, x);
  const Gradients g = tape.backward(tape.sum(tape.square(jet.second)));

  std::vector<Tensor> params;
  for (const auto& l : net.layers) {
    params.push_back(l.weight);
    params.push_back(l.bias);
  }
  auto loss = [&](const std::vector<Tensor>& p) {
    MlpParams m = net;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      m.layers[i].weight = p[2 * i];
      m.layers[i].bias = p[2 * i + 1];
    }
    return sum(square(mlp_jet_forward(m, x).second));
  };
  const auto fd = oracle::fd_gradient(loss, params);
  for (std::size_t i = 0; i < nodes.layers.size(); ++i) {
    CHECK(oracle::max_rel_err(g[nodes.layers[i].weight], fd[2 * i]) < 1e-5);
    CHECK(oracle::max_rel_err(g[nodes.layers[i].bias], fd[2 * i + 1]) < 1e-5);
  }
}
