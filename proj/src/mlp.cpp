#include "spinn/mlp.hpp"

#include <cmath>
#include <string>

#include "spinn/errors.hpp"

namespace spinn {

std::size_t MlpParams::input_width() const {
  if (layers.empty()) throw UsageError("empty MLP");
  return layers.front().weight.dim(0);
}

std::size_t MlpParams::output_width() const {
  if (layers.empty()) throw UsageError("empty MLP");
  return layers.back().weight.dim(1);
}

std::vector<std::size_t> MlpParams::widths() const {
  std::vector<std::size_t> w;
  if (layers.empty()) return w;
  w.push_back(input_width());
  for (const auto& l : layers) w.push_back(l.weight.dim(1));
  return w;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

MlpParams init_mlp(const std::vector<std::size_t>& widths, SplitMix64& rng) {
  if (widths.size() < 2) throw UsageError("an MLP needs at least an input and an output width");
  for (std::size_t w : widths) {
    if (w == 0) throw UsageError("MLP layer width must be positive");
  }
  MlpParams p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer{Tensor({in, out}), Tensor({out})};
    for (double& w : layer.weight.data()) w = rng.uniform(-limit, limit);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

MlpNodes bind(Tape& tape, const MlpParams& params) {
  MlpNodes nodes;
  for (const auto& l : params.layers) {
    const NodeId w = tape.leaf(l.weight);
    const NodeId b = tape.leaf(l.bias);
    nodes.layers.push_back({w, b});
  }
  return nodes;
}

NodeId mlp_forward(Tape& tape, const MlpNodes& net, NodeId x) {
  NodeId h = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const NodeId z = tape.matmul(h, net.layers[l].weight);
    h = tape.add(z, net.layers[l].bias);
    tape.release_if_unneeded(z);
    if (l + 1 < net.layers.size()) h = tape.tanh(h);
  }
  return h;
}

Tensor mlp_forward(const MlpParams& params, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != params.input_width()) {
    throw UsageError("MLP expects input [B," + std::to_string(params.input_width()) +
                     "], got " + shape_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    h = add(matmul(h, params.layers[l].weight), params.layers[l].bias);
    if (l + 1 < params.layers.size()) h = tanh_k(0, h);
  }
  return h;
}

}  // namespace spinn
