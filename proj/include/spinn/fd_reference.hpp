#pragma once

// Finite-difference reference solutions for the 2-d diffusion problems on a
// uniform node grid with homogeneous Dirichlet boundaries.
//
//   linear:    Crank–Nicolson in time, 5-point Laplacian in space
//   nonlinear: classical RK4 on ∂t u = (α/2) Δ_h(u²), which is the conservative
//              form of α(|∇u|² + uΔu)

#include <cstddef>
#include <functional>

#include "spinn/pde.hpp"
#include "spinn/tensor.hpp"

namespace spinn {

struct FdSolution {
  AxisBounds x;
  AxisBounds y;
  AxisBounds t;
  std::size_t nx = 0;  // nodes per spatial axis, boundaries included
  std::size_t nt = 0;  // time steps; nt + 1 stored levels
  Tensor u;            // [nt + 1, nx, nx], index (level, ix, iy)

  double dx() const { return (x.hi - x.lo) / static_cast<double>(nx - 1); }
  double dt() const { return (t.hi - t.lo) / static_cast<double>(nt); }
  // Trilinear interpolation; clamps to the domain.
  double at(double px, double py, double pt) const;
  // Values on a (x1, x2, t) lattice, shaped like the lattice.
  Tensor on_lattice(const AxisGrid& grid) const;
};

using InitialCondition = std::function<double(double, double)>;

// Largest stable RK4 step for the nonlinear scheme given the peak |u|.
double nonlinear_stable_dt(double alpha, double dx, double peak_u);

FdSolution fd_reference_diffusion(const PdeProblem& problem, std::size_t nx, std::size_t nt);
FdSolution fd_reference_diffusion(const PdeProblem& problem, std::size_t nx, std::size_t nt,
                                  const InitialCondition& ic);

// Step counts that land FD nodes exactly on a uniform n-point lattice and keep
// the nonlinear scheme stable.
struct FdResolution {
  std::size_t nx;
  std::size_t nt;
};
FdResolution aligned_fd_resolution(const PdeProblem& problem, std::size_t lattice_n,
                                   std::size_t refine = 4);

}  // namespace spinn
