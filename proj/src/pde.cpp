#include "spinn/pde.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <utility>

#include "spinn/errors.hpp"

namespace spinn {

namespace {

constexpr double kPi = std::numbers::pi;

const char* kLinearDiffusion = "diffusion-linear";
const char* kNonlinearDiffusion = "diffusion-nonlinear";
const char* kHelmholtz = "helmholtz3d";
const char* kKleinGordon = "klein-gordon3d";

}  // namespace

bool PdeProblem::has_exact() const {
  return kind == ProblemKind::Helmholtz || kind == ProblemKind::KleinGordon;
}

double PdeProblem::exact(std::span<const double> x) const {
  switch (kind) {
    case ProblemKind::Helmholtz:
      return std::sin(modes[0] * kPi * x[0]) * std::sin(modes[1] * kPi * x[1]) *
             std::sin(modes[2] * kPi * x[2]);
    case ProblemKind::KleinGordon:
      return (x[0] + x[1]) * std::cos(x[2]) + x[0] * x[1] * std::sin(x[2]);
    default:
      throw UsageError("problem " + name + " has no closed-form solution");
  }
}

bool PdeProblem::has_source() const { return has_exact(); }

double PdeProblem::source(std::span<const double> x) const {
  const double u = exact(x);
  switch (kind) {
    case ProblemKind::Helmholtz: {
      const double a2 = modes[0] * modes[0] + modes[1] * modes[1] + modes[2] * modes[2];
      return (wavenumber * wavenumber - a2 * kPi * kPi) * u;
    }
    case ProblemKind::KleinGordon:
      // ∂tt u = −u and Δu = 0 for the manufactured solution.
      return u * u - u;
    default:
      throw UsageError("problem " + name + " has no source term");
  }
}

double PdeProblem::initial(std::span<const double> x) const {
  switch (kind) {
    case ProblemKind::LinearDiffusion:
    case ProblemKind::NonlinearDiffusion: {
      double u = 0.0;
      for (const auto& g : bumps) {
        const double dx = x[0] - g.cx, dy = x[1] - g.cy;
        u += g.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * g.sigma * g.sigma));
      }
      return u;
    }
    case ProblemKind::KleinGordon:
      return x[0] + x[1];
    default:
      throw UsageError("problem " + name + " has no initial condition");
  }
}

bool PdeProblem::has_velocity_ic() const {
  return kind == ProblemKind::KleinGordon && velocity_ic;
}

double PdeProblem::initial_velocity(std::span<const double> x) const {
  if (kind != ProblemKind::KleinGordon) {
    throw UsageError("problem " + name + " has no velocity initial condition");
  }
  return x[0] * x[1];
}

double PdeProblem::boundary(std::span<const double> x) const {
  if (kind == ProblemKind::LinearDiffusion || kind == ProblemKind::NonlinearDiffusion) return 0.0;
  return exact(x);
}

std::optional<std::vector<Tensor>> PdeProblem::separable_source(const AxisGrid& grid) const {
  if (kind != ProblemKind::Helmholtz) return std::nullopt;
  if (grid.dims() != 3) throw UsageError("helmholtz source needs a 3-axis grid");
  const double a2 = modes[0] * modes[0] + modes[1] * modes[1] + modes[2] * modes[2];
  const double c = wavenumber * wavenumber - a2 * kPi * kPi;
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor f = grid.axis_column(i);
    for (std::size_t p = 0; p < f.size(); ++p) f[p] = std::sin(modes[i] * kPi * f[p]);
    out.push_back(i == 0 ? spinn::scale(f, c) : std::move(f));
  }
  return out;
}

std::vector<std::string> problem_names() {
  return {kLinearDiffusion, kNonlinearDiffusion, kHelmholtz, kKleinGordon};
}

PdeProblem make_problem(const std::string& name) {
  PdeProblem p;
  p.name = name;
  if (name == kLinearDiffusion || name == kNonlinearDiffusion) {
    p.kind = name == kLinearDiffusion ? ProblemKind::LinearDiffusion
                                      : ProblemKind::NonlinearDiffusion;
    p.bounds = {{-1.0, 1.0}, {-1.0, 1.0}, {0.0, 1.0}};
    p.time_dependent = true;
    p.alpha = 0.05;
    p.bumps = {{0.5, -0.4, -0.4, 0.15}, {0.4, 0.3, 0.2, 0.15}, {0.3, 0.0, 0.45, 0.15}};
  } else if (name == kHelmholtz) {
    p.kind = ProblemKind::Helmholtz;
    p.bounds = {{-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}};
    p.wavenumber = 1.0;
    p.modes = {3.0, 3.0, 2.0};
  } else if (name == kKleinGordon) {
    p.kind = ProblemKind::KleinGordon;
    p.bounds = {{-1.0, 1.0}, {-1.0, 1.0}, {0.0, 10.0}};
    p.time_dependent = true;
    p.velocity_ic = true;
  } else {
    std::string known;
    for (const auto& n : problem_names()) known += (known.empty() ? "" : ", ") + n;
    throw UsageError("unknown problem '" + name + "' (known: " + known + ")");
  }
  return p;
}

// ---------------------------------------------------------------------------

namespace {

NodeId need(const std::vector<std::optional<NodeId>>& v, std::size_t axis, const char* what) {
  if (axis >= v.size() || !v[axis]) {
    throw UsageError(std::string("residual needs ") + what + " along axis " + std::to_string(axis));
  }
  return *v[axis];
}

NodeId spatial_laplacian(Tape& tape, const FieldBundle& f, std::size_t spatial) {
  NodeId lap = need(f.ddu, 0, "second derivative");
  for (std::size_t i = 1; i < spatial; ++i) lap = tape.add(lap, need(f.ddu, i, "second derivative"));
  return lap;
}

}  // namespace

NodeId residual_linear_diffusion(Tape& tape, const FieldBundle& f, double alpha) {
  const std::size_t t = f.du.size() - 1;
  const NodeId lap = spatial_laplacian(tape, f, t);
  return tape.sub(need(f.du, t, "time derivative"), tape.scale(lap, alpha));
}

NodeId residual_nonlinear_diffusion(Tape& tape, const FieldBundle& f, double alpha) {
  const std::size_t t = f.du.size() - 1;
  NodeId grad2 = tape.square(need(f.du, 0, "first derivative"));
  for (std::size_t i = 1; i < t; ++i) {
    grad2 = tape.add(grad2, tape.square(need(f.du, i, "first derivative")));
  }
  const NodeId u_lap = tape.mul(f.u, spatial_laplacian(tape, f, t));
  return tape.sub(need(f.du, t, "time derivative"), tape.scale(tape.add(grad2, u_lap), alpha));
}

NodeId residual_helmholtz(Tape& tape, const FieldBundle& f, double k, NodeId source) {
  const NodeId lap = spatial_laplacian(tape, f, f.ddu.size());
  return tape.sub(tape.add(lap, tape.scale(f.u, k * k)), source);
}

NodeId residual_klein_gordon(Tape& tape, const FieldBundle& f, NodeId source) {
  const std::size_t t = f.ddu.size() - 1;
  const NodeId lap = spatial_laplacian(tape, f, t);
  const NodeId wave = tape.sub(need(f.ddu, t, "second time derivative"), lap);
  return tape.sub(tape.add(wave, tape.square(f.u)), source);
}

FieldRequest residual_request(const PdeProblem& problem) {
  const std::size_t d = problem.dims();
  FieldRequest r = FieldRequest::value_only(d);
  switch (problem.kind) {
    case ProblemKind::LinearDiffusion:
      for (std::size_t i = 0; i + 1 < d; ++i) r.second[i] = true;
      r.first[d - 1] = true;
      break;
    case ProblemKind::NonlinearDiffusion:
      for (std::size_t i = 0; i + 1 < d; ++i) r.first[i] = r.second[i] = true;
      r.first[d - 1] = true;
      break;
    case ProblemKind::Helmholtz:
    case ProblemKind::KleinGordon:
      for (std::size_t i = 0; i < d; ++i) r.second[i] = true;
      break;
  }
  return r;
}

NodeId residual(Tape& tape, const PdeProblem& problem, const FieldBundle& f,
                std::optional<NodeId> source) {
  auto need_source = [&]() {
    if (!source) throw UsageError("problem " + problem.name + " needs a source grid");
    return *source;
  };
  switch (problem.kind) {
    case ProblemKind::LinearDiffusion: return residual_linear_diffusion(tape, f, problem.alpha);
    case ProblemKind::NonlinearDiffusion:
      return residual_nonlinear_diffusion(tape, f, problem.alpha);
    case ProblemKind::Helmholtz:
      return residual_helmholtz(tape, f, problem.wavenumber, need_source());
    case ProblemKind::KleinGordon: return residual_klein_gordon(tape, f, need_source());
  }
  throw UsageError("unhandled problem kind");
}

// ---------------------------------------------------------------------------

TrainingLattices make_lattices(const PdeProblem& problem, std::size_t n) {
  if (n < 2) throw UsageError("lattice resolution must be at least 2, got " + std::to_string(n));
  const std::size_t d = problem.dims();
  TrainingLattices L;
  L.interior = AxisGrid::uniform(problem.bounds, std::vector<std::size_t>(d, n));
  if (problem.has_source()) {
    L.source = sample_on(L.interior, [&](auto x) { return problem.source(x); });
  }

  auto sub_lattice = [&](std::size_t axis, std::vector<double> coords) {
    std::vector<std::vector<double>> axes;
    for (std::size_t i = 0; i < d; ++i) {
      axes.push_back(i == axis ? coords : L.interior.axis(i));
    }
    return AxisGrid(std::move(axes), problem.bounds);
  };

  if (problem.time_dependent) {
    const std::size_t t = problem.time_axis();
    AxisGrid ic = sub_lattice(t, {problem.bounds[t].lo});
    Tensor target = sample_on(ic, [&](auto x) { return problem.initial(x); });
    if (problem.has_velocity_ic()) {
      Tensor v = sample_on(ic, [&](auto x) { return problem.initial_velocity(x); });
      L.initial_velocity = ConstraintLattice{ic, std::move(v)};
    }
    L.initial = ConstraintLattice{std::move(ic), std::move(target)};
  }
  for (std::size_t s = 0; s < problem.spatial_dims(); ++s) {
    AxisGrid face = sub_lattice(s, {problem.bounds[s].lo, problem.bounds[s].hi});
    Tensor target = sample_on(face, [&](auto x) { return problem.boundary(x); });
    L.boundary.push_back({std::move(face), std::move(target)});
  }
  return L;
}

namespace {

NodeId mean_square_mismatch(Tape& tape, NodeId field, const Tensor& target) {
  const NodeId t = tape.constant(target.reshaped(tape.node(field).shape));
  return tape.mean(tape.square(tape.sub(field, t)));
}

}  // namespace

LossNodes assemble_loss_from_fields(Tape& tape, const PdeProblem& problem,
                                    const FieldBundle& interior,
                                    const ConstraintFields& constraints,
                                    const TrainingLattices& lattices) {
  std::optional<NodeId> source;
  if (lattices.source) {
    source = tape.constant(lattices.source->reshaped(tape.node(interior.u).shape));
  }
  const NodeId pde = tape.mean(tape.square(residual(tape, problem, interior, source)));
  return assemble_loss_from_terms(tape, problem, pde, constraints, lattices);
}

LossNodes assemble_loss_from_terms(Tape& tape, const PdeProblem& problem, NodeId pde,
                                   const ConstraintFields& constraints,
                                   const TrainingLattices& lattices) {
  LossNodes loss;
  loss.pde = pde;
  NodeId total = tape.scale(loss.pde, problem.weights.pde);

  if (problem.time_dependent) {
    if (!lattices.initial || !constraints.initial) {
      throw UsageError("problem " + problem.name + " needs an initial-condition lattice");
    }
    loss.ic = mean_square_mismatch(tape, *constraints.initial, lattices.initial->target);
    total = tape.add(total, tape.scale(*loss.ic, problem.weights.ic));
  }
  if (problem.has_velocity_ic()) {
    if (!lattices.initial_velocity || !constraints.initial_velocity) {
      throw UsageError("problem " + problem.name + " needs a velocity initial-condition lattice");
    }
    loss.ic_velocity =
        mean_square_mismatch(tape, *constraints.initial_velocity, lattices.initial_velocity->target);
    total = tape.add(total, tape.scale(*loss.ic_velocity, problem.weights.ic));
  }

  if (lattices.boundary.empty() || constraints.boundary.size() != lattices.boundary.size()) {
    throw UsageError("problem " + problem.name + " needs boundary lattices");
  }
  // One mean over the union of all faces.
  std::optional<NodeId> sq_sum;
  std::size_t count = 0;
  for (std::size_t f = 0; f < lattices.boundary.size(); ++f) {
    const NodeId field = constraints.boundary[f];
    const NodeId target =
        tape.constant(lattices.boundary[f].target.reshaped(tape.node(field).shape));
    const NodeId s = tape.sum(tape.square(tape.sub(field, target)));
    sq_sum = sq_sum ? tape.add(*sq_sum, s) : s;
    count += lattices.boundary[f].target.size();
  }
  loss.bc = tape.scale(*sq_sum, 1.0 / static_cast<double>(count));
  total = tape.add(total, tape.scale(*loss.bc, problem.weights.bc));
  loss.total = total;
  return loss;
}

std::string pde_loss_name(PdeLossMode mode) {
  switch (mode) {
    case PdeLossMode::Auto: return "auto";
    case PdeLossMode::Grid: return "grid";
    case PdeLossMode::Factored: return "factored";
  }
  return "?";
}

PdeLossMode parse_pde_loss(const std::string& name) {
  if (name == "auto") return PdeLossMode::Auto;
  if (name == "grid") return PdeLossMode::Grid;
  if (name == "factored") return PdeLossMode::Factored;
  throw UsageError("unknown pde loss mode '" + name + "' (known: auto, grid, factored)");
}

bool has_factored_residual(const PdeProblem& problem) {
  return problem.kind == ProblemKind::LinearDiffusion || problem.kind == ProblemKind::Helmholtz;
}

NodeId factored_pde_loss(Tape& tape, const PdeProblem& problem, const SeparableNodes& model,
                         const AxisGrid& grid) {
  if (!has_factored_residual(problem)) {
    throw UsageError("problem " + problem.name + " has a residual that is nonlinear in u");
  }
  const std::size_t d = model.bodies.size();
  if (grid.dims() != d || problem.dims() != d) throw UsageError("grid and model dimensions differ");

  std::vector<Jet2Nodes> jets;
  for (std::size_t i = 0; i < d; ++i) jets.push_back(mlp_jet_forward(tape, model.bodies[i], grid.axis_column(i)));
  auto values = [&] {
    std::vector<NodeId> f;
    for (const auto& j : jets) f.push_back(j.value);
    return f;
  };

  // The residual as Σ_a c_a · merge(factors_a).
  struct Term {
    double coef;
    std::vector<NodeId> factors;
  };
  std::vector<Term> terms;
  auto derivative = [&](double coef, std::size_t axis, bool second) {
    Term t{coef, values()};
    t.factors[axis] = second ? jets[axis].second : jets[axis].first;
    terms.push_back(std::move(t));
  };
  if (problem.kind == ProblemKind::Helmholtz) {
    for (std::size_t i = 0; i < d; ++i) derivative(1.0, i, true);
    const double k = problem.wavenumber;
    terms.push_back({k * k, values()});
    const auto q = problem.separable_source(grid);
    Term src{-1.0, {}};
    for (const auto& f : *q) src.factors.push_back(tape.constant(f));
    terms.push_back(std::move(src));
  } else {
    const std::size_t t = problem.time_axis();
    derivative(1.0, t, false);
    for (std::size_t i = 0; i < t; ++i) derivative(-problem.alpha, i, true);
  }

  // mean(r²) = (1/N) Σ_{a,b} c_a c_b Σ_{j,k} Π_i (F_ai^T F_bi)[j,k]
  std::map<std::pair<NodeId, NodeId>, NodeId> grams;
  auto gram = [&](NodeId a, NodeId b) {
    auto [it, fresh] = grams.try_emplace({a, b}, 0);
    if (fresh) it->second = tape.matmul_tn(a, b);
    return it->second;
  };
  const double inv_n = 1.0 / static_cast<double>(grid.grid_points());
  std::optional<NodeId> acc;
  for (std::size_t a = 0; a < terms.size(); ++a) {
    for (std::size_t b = a; b < terms.size(); ++b) {
      NodeId h = gram(terms[a].factors[0], terms[b].factors[0]);
      for (std::size_t i = 1; i < d; ++i) h = tape.mul(h, gram(terms[a].factors[i], terms[b].factors[i]));
      const double w = (a == b ? 1.0 : 2.0) * terms[a].coef * terms[b].coef * inv_n;
      const NodeId s = tape.scale(tape.sum(h), w);
      acc = acc ? tape.add(*acc, s) : s;
    }
  }
  return *acc;
}

LossNodes assemble_loss(Tape& tape, const PdeProblem& problem, const ModelNodes& model,
                        const TrainingLattices& lattices, PdeLossMode mode) {
  const std::size_t d = problem.dims();
  const auto* separable = std::get_if<SeparableNodes>(&model);
  bool factored = false;
  if (mode == PdeLossMode::Factored) {
    if (!separable) throw UsageError("factored pde loss needs the separable architecture");
    if (!has_factored_residual(problem)) {
      throw UsageError("factored pde loss does not apply to " + problem.name);
    }
    factored = true;
  } else if (mode == PdeLossMode::Auto) {
    factored = separable && has_factored_residual(problem);
  }

  std::optional<FieldBundle> interior;
  std::optional<NodeId> pde;
  if (factored) {
    pde = factored_pde_loss(tape, problem, *separable, lattices.interior);
  } else {
    interior = evaluate_fields(tape, model, lattices.interior, residual_request(problem));
  }

  ConstraintFields c;
  if (lattices.initial) {
    FieldRequest req = FieldRequest::value_only(d);
    if (lattices.initial_velocity) req.first[problem.time_axis()] = true;
    const FieldBundle ic = evaluate_fields(tape, model, lattices.initial->grid, req);
    c.initial = ic.u;
    if (lattices.initial_velocity) c.initial_velocity = ic.du[problem.time_axis()];
  }
  for (const auto& face : lattices.boundary) {
    c.boundary.push_back(evaluate_fields(tape, model, face.grid, FieldRequest::value_only(d)).u);
  }
  if (pde) return assemble_loss_from_terms(tape, problem, *pde, c, lattices);
  return assemble_loss_from_fields(tape, problem, *interior, c, lattices);
}

}  // namespace spinn
