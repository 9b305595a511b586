#include "spinn/models.hpp"

#include <bit>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "spinn/errors.hpp"

namespace spinn {

std::string arch_name(ArchKind kind) {
  return kind == ArchKind::Separable ? "spinn" : "pinn";
}

ArchKind parse_arch(const std::string& name) {
  if (name == "spinn" || name == "separable") return ArchKind::Separable;
  if (name == "pinn" || name == "vanilla" || name == "baseline") return ArchKind::Vanilla;
  throw UsageError("unknown architecture '" + name + "' (expected spinn or pinn)");
}

std::size_t SeparableModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : bodies) n += b.parameter_count();
  return n;
}

ModelSpec default_separable_spec(std::size_t dims) {
  return {ArchKind::Separable, dims, {50, 50, 50, 50, 50}, 50, 0};
}

ModelSpec default_vanilla_spec(std::size_t dims) {
  return {ArchKind::Vanilla, dims, {100, 100, 100, 100, 100}, 1, 0};
}

SeparableModel init_separable(std::size_t dims, const std::vector<std::size_t>& hidden,
                              std::size_t rank, std::uint64_t seed) {
  if (dims < 2) throw UsageError("a separable model needs at least two axes");
  if (rank == 0) throw UsageError("rank must be positive");
  std::vector<std::size_t> widths{1};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(rank);
  SplitMix64 rng(seed);
  SeparableModel m;
  m.rank = rank;
  for (std::size_t i = 0; i < dims; ++i) m.bodies.push_back(init_mlp(widths, rng));
  return m;
}

VanillaModel init_vanilla(std::size_t dims, const std::vector<std::size_t>& hidden,
                          std::uint64_t seed) {
  if (dims == 0) throw UsageError("model needs at least one input axis");
  std::vector<std::size_t> widths{dims};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  SplitMix64 rng(seed);
  return VanillaModel{init_mlp(widths, rng)};
}

Model init_model(const ModelSpec& spec) {
  if (spec.arch == ArchKind::Separable) {
    return init_separable(spec.dims, spec.hidden, spec.rank, spec.seed);
  }
  return init_vanilla(spec.dims, spec.hidden, spec.seed);
}

std::size_t parameter_count(const Model& model) {
  return std::visit([](const auto& m) { return m.parameter_count(); }, model);
}

std::size_t model_dims(const Model& model) {
  return std::visit([](const auto& m) { return m.dims(); }, model);
}

namespace {

template <class Ptr, class M>
void collect(std::vector<Ptr>& out, M& mlp) {
  for (auto& l : mlp.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
}

}  // namespace

std::vector<Tensor*> parameters(Model& model) {
  std::vector<Tensor*> out;
  if (auto* s = std::get_if<SeparableModel>(&model)) {
    for (auto& b : s->bodies) collect(out, b);
  } else {
    collect(out, std::get<VanillaModel>(model).net);
  }
  return out;
}

std::vector<const Tensor*> parameters(const Model& model) {
  std::vector<const Tensor*> out;
  if (const auto* s = std::get_if<SeparableModel>(&model)) {
    for (const auto& b : s->bodies) collect(out, b);
  } else {
    collect(out, std::get<VanillaModel>(model).net);
  }
  return out;
}

std::vector<std::string> parameter_names(const Model& model) {
  std::vector<std::string> out;
  auto add = [&](const std::string& prefix, const MlpParams& net) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      out.push_back(prefix + "layer " + std::to_string(l) + " weight");
      out.push_back(prefix + "layer " + std::to_string(l) + " bias");
    }
  };
  if (const auto* s = std::get_if<SeparableModel>(&model)) {
    for (std::size_t i = 0; i < s->bodies.size(); ++i) add("body " + std::to_string(i) + " ", s->bodies[i]);
  } else {
    add("", std::get<VanillaModel>(model).net);
  }
  return out;
}

// ---------------------------------------------------------------------------

ModelNodes bind(Tape& tape, const Model& model) {
  if (const auto* s = std::get_if<SeparableModel>(&model)) {
    SeparableNodes nodes;
    for (const auto& b : s->bodies) nodes.bodies.push_back(bind(tape, b));
    return nodes;
  }
  return bind(tape, std::get<VanillaModel>(model).net);
}

std::vector<NodeId> parameter_nodes(const ModelNodes& nodes) {
  std::vector<NodeId> out;
  auto add = [&](const MlpNodes& m) {
    for (const auto& l : m.layers) {
      out.push_back(l.weight);
      out.push_back(l.bias);
    }
  };
  if (const auto* s = std::get_if<SeparableNodes>(&nodes)) {
    for (const auto& b : s->bodies) add(b);
  } else {
    add(std::get<MlpNodes>(nodes));
  }
  return out;
}

FieldRequest FieldRequest::all(std::size_t dims) {
  return {std::vector<bool>(dims, true), std::vector<bool>(dims, true)};
}

FieldRequest FieldRequest::value_only(std::size_t dims) {
  return {std::vector<bool>(dims, false), std::vector<bool>(dims, false)};
}

bool FieldRequest::any_derivative() const {
  for (std::size_t i = 0; i < first.size(); ++i)
    if (needs_jet(i)) return true;
  return false;
}

bool FieldRequest::needs_jet(std::size_t axis) const { return first[axis] || second[axis]; }

namespace {

void check_request(const FieldRequest& request, std::size_t dims) {
  if (request.first.size() != dims || request.second.size() != dims) {
    throw UsageError("field request covers " + std::to_string(request.first.size()) +
                     " axes, model has " + std::to_string(dims));
  }
}

}  // namespace

FieldBundle spinn_fields(Tape& tape, const SeparableNodes& model, const AxisGrid& grid,
                         const FieldRequest& request) {
  const std::size_t d = model.bodies.size();
  if (grid.dims() != d) {
    throw UsageError("grid has " + std::to_string(grid.dims()) + " axes, model has " +
                     std::to_string(d));
  }
  check_request(request, d);

  std::vector<NodeId> values(d);
  std::vector<std::optional<Jet2Nodes>> jets(d);
  for (std::size_t i = 0; i < d; ++i) {
    const Tensor x = grid.axis_column(i);
    if (request.needs_jet(i)) {
      jets[i] = mlp_jet_forward(tape, model.bodies[i], x);
      values[i] = jets[i]->value;
    } else {
      values[i] = mlp_forward(tape, model.bodies[i], tape.constant(x));
    }
  }

  FieldBundle f;
  f.u = tape.merge(values);
  f.du.resize(d);
  f.ddu.resize(d);
  // Only factor i depends on x_i, so each partial is a merge with that factor
  // replaced by its derivative.
  for (std::size_t i = 0; i < d; ++i) {
    if (request.first[i]) {
      std::vector<NodeId> factors = values;
      factors[i] = jets[i]->first;
      f.du[i] = tape.merge(factors);
    }
    if (request.second[i]) {
      std::vector<NodeId> factors = values;
      factors[i] = jets[i]->second;
      f.ddu[i] = tape.merge(factors);
    }
  }
  return f;
}

FieldBundle pinn_fields(Tape& tape, const MlpNodes& net, const Tensor& points,
                        const FieldRequest& request) {
  if (points.rank() != 2) throw UsageError("pinn_fields expects points [N,d]");
  const std::size_t d = points.dim(1);
  check_request(request, d);

  FieldBundle f;
  f.du.resize(d);
  f.ddu.resize(d);
  std::vector<std::size_t> axes;
  for (std::size_t i = 0; i < d; ++i) {
    if (request.needs_jet(i)) axes.push_back(i);
  }
  if (axes.empty()) {
    f.u = mlp_forward(tape, net, tape.constant(points));
    return f;
  }
  const MultiJet2Nodes jet = multi_directional_jet_forward(tape, net, points, axes);
  f.u = jet.value;
  for (std::size_t k = 0; k < axes.size(); ++k) {
    if (request.first[axes[k]]) f.du[axes[k]] = jet.first[k];
    if (request.second[axes[k]]) f.ddu[axes[k]] = jet.second[k];
  }
  return f;
}

FieldBundle evaluate_fields(Tape& tape, const ModelNodes& model, const AxisGrid& grid,
                            const FieldRequest& request) {
  if (const auto* s = std::get_if<SeparableNodes>(&model)) {
    return spinn_fields(tape, *s, grid, request);
  }
  return pinn_fields(tape, std::get<MlpNodes>(model), grid.points(), request);
}

Shape field_shape(const Model& model, const AxisGrid& grid) {
  if (std::holds_alternative<SeparableModel>(model)) return grid.grid_shape();
  return {grid.grid_points(), 1};
}

NodeId eval_on_points(Tape& tape, const SeparableNodes& model, const Tensor& points) {
  const std::size_t d = model.bodies.size();
  if (points.rank() != 2 || points.dim(1) != d) {
    throw UsageError("eval_on_points expects points [N," + std::to_string(d) + "], got " +
                     shape_string(points.shape()));
  }
  std::optional<NodeId> prod;
  for (std::size_t i = 0; i < d; ++i) {
    Tensor x({points.dim(0), 1});
    for (std::size_t p = 0; p < points.dim(0); ++p) x[p] = points(p, i);
    const NodeId features = mlp_forward(tape, model.bodies[i], tape.constant(std::move(x)));
    prod = prod ? tape.mul(*prod, features) : features;
  }
  const std::size_t r = tape.node(*prod).shape.at(1);
  return tape.matmul(*prod, tape.constant(Tensor({r, 1}, 1.0)));
}

Tensor eval_on_points(const SeparableModel& model, const Tensor& points) {
  Tape tape;
  SeparableNodes nodes;
  for (const auto& b : model.bodies) nodes.bodies.push_back(bind(tape, b));
  return tape.value(eval_on_points(tape, nodes, points));
}

Tensor predict_grid(const Model& model, const AxisGrid& grid) {
  if (const auto* s = std::get_if<SeparableModel>(&model)) {
    if (grid.dims() != s->dims()) throw UsageError("grid and model dimensions differ");
    std::vector<Tensor> factors;
    for (std::size_t i = 0; i < s->dims(); ++i) {
      factors.push_back(mlp_forward(s->bodies[i], grid.axis_column(i)));
    }
    return merge(factors);
  }
  const auto& v = std::get<VanillaModel>(model);
  return mlp_forward(v.net, grid.points()).reshaped(grid.grid_shape());
}

// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& manifest_path, const Model& model,
                     const CheckpointInfo& info) {
  namespace fs = std::filesystem;
  const fs::path manifest(manifest_path);
  fs::path blob = manifest;
  blob.replace_extension(".bin");

  nlohmann::json j;
  j["format"] = "spinn-checkpoint-v1";
  j["arch"] = arch_name(info.spec.arch);
  j["dims"] = info.spec.dims;
  j["hidden"] = info.spec.hidden;
  j["rank"] = info.spec.rank;
  j["seed"] = info.spec.seed;
  j["iteration"] = info.iteration;
  j["parameter_count"] = parameter_count(model);
  j["blob"] = blob.filename().string();
  j["dtype"] = "float64-le";
  j["meta"] = info.meta;

  std::ofstream bs(blob, std::ios::binary);
  if (!bs) throw FileError("cannot write " + blob.string());
  for (const Tensor* p : parameters(model)) {
    // Blob layout is little-endian; write_grid enforces the same convention.
    static_assert(std::endian::native == std::endian::little,
                  "checkpoint writer assumes a little-endian host");
    bs.write(reinterpret_cast<const char*>(p->data().data()),
             static_cast<std::streamsize>(p->nbytes()));
  }
  if (!bs) throw FileError("failed writing " + blob.string());

  std::ofstream ms(manifest);
  if (!ms) throw FileError("cannot write " + manifest.string());
  ms << j.dump(2) << '\n';
}

std::pair<Model, CheckpointInfo> load_checkpoint(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream ms(manifest_path);
  if (!ms) throw FileError("checkpoint not found: " + manifest_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ms);
  } catch (const nlohmann::json::exception& e) {
    throw FileError(manifest_path + ": malformed manifest (" + e.what() + ")");
  }
  if (j.value("format", "") != "spinn-checkpoint-v1") {
    throw FileError(manifest_path + " is not a spinn checkpoint manifest");
  }
  CheckpointInfo info;
  info.spec.arch = parse_arch(j.at("arch").get<std::string>());
  info.spec.dims = j.at("dims").get<std::size_t>();
  info.spec.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  info.spec.rank = j.at("rank").get<std::size_t>();
  info.spec.seed = j.at("seed").get<std::uint64_t>();
  info.iteration = j.at("iteration").get<std::size_t>();
  info.meta = j.value("meta", nlohmann::json::object());

  Model model = init_model(info.spec);
  const fs::path blob = fs::path(manifest_path).parent_path() / j.at("blob").get<std::string>();
  std::ifstream bs(blob, std::ios::binary);
  if (!bs) throw FileError("checkpoint blob not found: " + blob.string());
  for (Tensor* p : parameters(model)) {
    bs.read(reinterpret_cast<char*>(p->data().data()), static_cast<std::streamsize>(p->nbytes()));
  }
  if (!bs) throw FileError("checkpoint blob too short: " + blob.string());
  if (bs.peek() != std::char_traits<char>::eof()) {
    throw FileError("checkpoint blob has trailing bytes: " + blob.string());
  }
  return {std::move(model), info};
}

}  // namespace spinn
