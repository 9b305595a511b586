#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spinn/models.hpp"
#include "spinn/tape.hpp"
#include "spinn/tensor.hpp"

namespace spinn {

enum class ProblemKind { LinearDiffusion, NonlinearDiffusion, Helmholtz, KleinGordon };

struct GaussianBump {
  double amplitude;
  double cx;
  double cy;
  double sigma;
};

struct LossWeights {
  double pde = 1.0;
  double ic = 1.0;
  double bc = 1.0;
};

// A benchmark PDE on a box. When the problem is time dependent, time is the
// last axis.
struct PdeProblem {
  std::string name;
  ProblemKind kind = ProblemKind::Helmholtz;
  std::vector<AxisBounds> bounds;
  bool time_dependent = false;

  double alpha = 0.05;                       // diffusivity
  double wavenumber = 1.0;                   // Helmholtz k
  std::array<double, 3> modes{3.0, 3.0, 2.0};  // Helmholtz a_1..a_3
  std::vector<GaussianBump> bumps;           // diffusion initial condition
  bool velocity_ic = true;                   // Klein-Gordon ∂t u(x,0) term
  LossWeights weights;

  std::size_t dims() const { return bounds.size(); }
  std::size_t spatial_dims() const { return time_dependent ? dims() - 1 : dims(); }
  std::size_t time_axis() const { return dims() - 1; }

  bool has_exact() const;
  // Closed-form solution; throws UsageError when there is none.
  double exact(std::span<const double> x) const;
  // Forcing term on the right-hand side (q for Helmholtz, f for Klein-Gordon).
  double source(std::span<const double> x) const;
  bool has_source() const;
  // u(x, 0); only the spatial coordinates of x are read.
  double initial(std::span<const double> x) const;
  bool has_velocity_ic() const;
  double initial_velocity(std::span<const double> x) const;
  // Dirichlet value at a point of the spatial boundary.
  double boundary(std::span<const double> x) const;
  // Per-axis factors [n_i, R] whose merge is the source on `grid`, when the
  // source has that form.
  std::optional<std::vector<Tensor>> separable_source(const AxisGrid& grid) const;
};

std::vector<std::string> problem_names();
// Registered defaults: diffusion-linear, diffusion-nonlinear, helmholtz3d, klein-gordon3d.
PdeProblem make_problem(const std::string& name);

// ---------------------------------------------------------------------------
// Residual operators over field bundles. `source` is a constant node shaped like
// the fields.

NodeId residual_linear_diffusion(Tape& tape, const FieldBundle& f, double alpha);
NodeId residual_nonlinear_diffusion(Tape& tape, const FieldBundle& f, double alpha);
NodeId residual_helmholtz(Tape& tape, const FieldBundle& f, double k, NodeId source);
NodeId residual_klein_gordon(Tape& tape, const FieldBundle& f, NodeId source);

// Derivatives each residual reads.
FieldRequest residual_request(const PdeProblem& problem);
NodeId residual(Tape& tape, const PdeProblem& problem, const FieldBundle& f,
                std::optional<NodeId> source);

// ---------------------------------------------------------------------------
// Collocation lattices and targets. All sets are factorizable sub-lattices.

struct ConstraintLattice {
  AxisGrid grid;
  Tensor target;  // lattice-shaped
};

struct TrainingLattices {
  AxisGrid interior;
  std::optional<Tensor> source;  // lattice-shaped
  std::optional<ConstraintLattice> initial;
  std::optional<ConstraintLattice> initial_velocity;
  std::vector<ConstraintLattice> boundary;
};

// n uniformly spaced points per axis including the endpoints.
TrainingLattices make_lattices(const PdeProblem& problem, std::size_t n);

// Evaluates a function of the coordinates at every lattice point.
template <class F>
Tensor sample_on(const AxisGrid& grid, F&& fn) {
  const Tensor pts = grid.points();
  Tensor out(grid.grid_shape());
  const std::size_t d = pts.dim(1);
  for (std::size_t p = 0; p < pts.dim(0); ++p) {
    out[p] = fn(std::span<const double>(pts.data().data() + p * d, d));
  }
  return out;
}

// How a separable model's PDE term is reduced. Grid materializes the residual
// on the whole lattice. Factored expands mean(r²) of the CP-form residual into
// Hadamard products of per-axis Gram matrices, O(Σn·R²) instead of O(Πn·r); it
// needs a residual linear in u with a separable (or absent) source. Auto uses
// factored whenever it applies.
enum class PdeLossMode { Auto, Grid, Factored };
std::string pde_loss_name(PdeLossMode mode);
PdeLossMode parse_pde_loss(const std::string& name);

bool has_factored_residual(const PdeProblem& problem);
NodeId factored_pde_loss(Tape& tape, const PdeProblem& problem, const SeparableNodes& model,
                         const AxisGrid& grid);

struct LossNodes {
  NodeId total;
  NodeId pde;
  std::optional<NodeId> ic;
  std::optional<NodeId> ic_velocity;
  std::optional<NodeId> bc;
};

// λ_pde·mean(r²) + λ_ic·mean((u−u_ic)²) [+ λ_ic·mean((∂t u−v_ic)²)] + λ_bc·mean((u−u_bc)²).
LossNodes assemble_loss(Tape& tape, const PdeProblem& problem, const ModelNodes& model,
                        const TrainingLattices& lattices, PdeLossMode mode = PdeLossMode::Grid);

// Lower-level assembly from already evaluated fields; used when fields are
// injected directly (e.g. exact-solution surrogates).
struct ConstraintFields {
  std::optional<NodeId> initial;
  std::optional<NodeId> initial_velocity;
  std::vector<NodeId> boundary;  // one per boundary lattice
};
// Targets are reshaped to the shape of the field nodes they are compared with.
LossNodes assemble_loss_from_fields(Tape& tape, const PdeProblem& problem,
                                    const FieldBundle& interior,
                                    const ConstraintFields& constraints,
                                    const TrainingLattices& lattices);
// Same, with the PDE term already reduced to a scalar node.
LossNodes assemble_loss_from_terms(Tape& tape, const PdeProblem& problem, NodeId pde,
                                   const ConstraintFields& constraints,
                                   const TrainingLattices& lattices);

}  // namespace spinn
