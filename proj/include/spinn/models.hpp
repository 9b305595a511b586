#pragma once

// The two solver architectures.
//
// SeparableModel: d scalar-input body networks f_i: R → R^r whose outputs are
// merged by u(x) = Σ_j Π_i f_{i,j}(x_i). On a lattice of n_i points per axis
// it needs d body passes of n_i points for the full Π n_i grid, and the
// derivative along axis i only replaces factor i by its derivative.
//
// VanillaModel: one d-input MLP evaluated point by point; derivatives come from
// a single jet pass carrying one tangent direction per axis.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "spinn/jet.hpp"
#include "spinn/mlp.hpp"
#include "spinn/tape.hpp"
#include "spinn/tensor.hpp"

namespace spinn {

enum class ArchKind { Separable, Vanilla };

std::string arch_name(ArchKind kind);
ArchKind parse_arch(const std::string& name);

struct SeparableModel {
  std::vector<MlpParams> bodies;
  std::size_t rank = 0;

  std::size_t dims() const { return bodies.size(); }
  std::size_t parameter_count() const;
};

struct VanillaModel {
  MlpParams net;

  std::size_t dims() const { return net.input_width(); }
  std::size_t parameter_count() const { return net.parameter_count(); }
};

using Model = std::variant<SeparableModel, VanillaModel>;

struct ModelSpec {
  ArchKind arch = ArchKind::Separable;
  std::size_t dims = 3;
  std::vector<std::size_t> hidden;  // hidden-layer widths
  std::size_t rank = 50;            // separable only
  std::uint64_t seed = 0;
};

// Five hidden layers of 50 per body, rank 50.
ModelSpec default_separable_spec(std::size_t dims = 3);
// Five hidden layers of 100.
ModelSpec default_vanilla_spec(std::size_t dims = 3);

SeparableModel init_separable(std::size_t dims, const std::vector<std::size_t>& hidden,
                              std::size_t rank, std::uint64_t seed);
VanillaModel init_vanilla(std::size_t dims, const std::vector<std::size_t>& hidden,
                          std::uint64_t seed);
Model init_model(const ModelSpec& spec);

std::size_t parameter_count(const Model& model);
std::size_t model_dims(const Model& model);

// Every parameter tensor in a fixed layer order (body by body, weight then bias).
std::vector<Tensor*> parameters(Model& model);
std::vector<const Tensor*> parameters(const Model& model);
// "body 1 layer 2 weight" style labels, same order.
std::vector<std::string> parameter_names(const Model& model);

// ---------------------------------------------------------------------------
// Field evaluation on a tape.

struct SeparableNodes {
  std::vector<MlpNodes> bodies;
};
using ModelNodes = std::variant<SeparableNodes, MlpNodes>;

ModelNodes bind(Tape& tape, const Model& model);
// Leaf ids in the same order as parameters().
std::vector<NodeId> parameter_nodes(const ModelNodes& nodes);

// Which derivative grids to produce.
struct FieldRequest {
  std::vector<bool> first;   // per axis
  std::vector<bool> second;  // per axis

  static FieldRequest all(std::size_t dims);
  static FieldRequest value_only(std::size_t dims);
  bool any_derivative() const;
  bool needs_jet(std::size_t axis) const;
};

// u and its per-axis partials. Entries of du/ddu are empty when not requested.
// Separable fields have the lattice shape [n_1..n_d]; vanilla fields are [N,1]
// over the lattice points in row-major order.
struct FieldBundle {
  NodeId u = 0;
  std::vector<std::optional<NodeId>> du;
  std::vector<std::optional<NodeId>> ddu;
};

FieldBundle spinn_fields(Tape& tape, const SeparableNodes& model, const AxisGrid& grid,
                         const FieldRequest& request);
FieldBundle pinn_fields(Tape& tape, const MlpNodes& net, const Tensor& points,
                        const FieldRequest& request);
// Dispatches on the architecture; vanilla models see grid.points().
FieldBundle evaluate_fields(Tape& tape, const ModelNodes& model, const AxisGrid& grid,
                            const FieldRequest& request);

// Shape of the field tensors evaluate_fields produces for `grid`.
Shape field_shape(const Model& model, const AxisGrid& grid);

// Merged value at arbitrary points [N, d] → [N, 1].
NodeId eval_on_points(Tape& tape, const SeparableNodes& model, const Tensor& points);
Tensor eval_on_points(const SeparableModel& model, const Tensor& points);

// Off-tape predictions on a lattice, shaped like the lattice.
Tensor predict_grid(const Model& model, const AxisGrid& grid);

// ---------------------------------------------------------------------------
// Checkpoints: JSON manifest plus a little-endian float64 parameter blob.

struct CheckpointInfo {
  ModelSpec spec;
  std::size_t iteration = 0;
  nlohmann::json meta = nlohmann::json::object();  // free-form, e.g. the run config
};

void save_checkpoint(const std::string& manifest_path, const Model& model,
                     const CheckpointInfo& info);
std::pair<Model, CheckpointInfo> load_checkpoint(const std::string& manifest_path);

}  // namespace spinn
