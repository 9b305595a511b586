#include "spinn/fd_reference.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "spinn/errors.hpp"

namespace spinn {

namespace {

// RK4's stability interval on the negative real axis is about [-2.78, 0]; the
// 5-point Laplacian scaled by D has spectral radius below 8D/dx².
constexpr double kRk4RealStability = 2.78;
constexpr double kSafety = 0.9;

std::size_t at3(std::size_t level, std::size_t i, std::size_t j, std::size_t nx) {
  return (level * nx + i) * nx + j;
}

double lerp(double a, double b, double w) { return a + (b - a) * w; }

void locate(double v, const AxisBounds& b, std::size_t cells, std::size_t& i, double& w) {
  const double s = (std::clamp(v, b.lo, b.hi) - b.lo) / (b.hi - b.lo) * static_cast<double>(cells);
  const double fl = std::floor(s);
  i = std::min(static_cast<std::size_t>(fl), cells - 1);
  w = s - static_cast<double>(i);
}

// 5-point Laplacian on interior nodes, Dirichlet zero outside.
void laplacian(const std::vector<double>& u, std::vector<double>& out, std::size_t nx,
               double inv_h2) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 1; i + 1 < nx; ++i) {
    for (std::size_t j = 1; j + 1 < nx; ++j) {
      const std::size_t k = i * nx + j;
      out[k] = (u[k - nx] + u[k + nx] + u[k - 1] + u[k + 1] - 4.0 * u[k]) * inv_h2;
    }
  }
}

}  // namespace

double nonlinear_stable_dt(double alpha, double dx, double peak_u) {
  const double diffusivity = alpha * std::max(peak_u, 1e-12);
  return kSafety * kRk4RealStability * dx * dx / (8.0 * diffusivity);
}

double FdSolution::at(double px, double py, double pt) const {
  std::size_t i, j, k;
  double wi, wj, wk;
  locate(px, x, nx - 1, i, wi);
  locate(py, y, nx - 1, j, wj);
  locate(pt, t, nt, k, wk);
  auto plane = [&](std::size_t level) {
    const double a = lerp(u[at3(level, i, j, nx)], u[at3(level, i, j + 1, nx)], wj);
    const double b = lerp(u[at3(level, i + 1, j, nx)], u[at3(level, i + 1, j + 1, nx)], wj);
    return lerp(a, b, wi);
  };
  return lerp(plane(k), plane(k + 1), wk);
}

Tensor FdSolution::on_lattice(const AxisGrid& grid) const {
  if (grid.dims() != 3) throw UsageError("diffusion lattice must be (x1, x2, t)");
  return sample_on(grid, [&](auto p) { return at(p[0], p[1], p[2]); });
}

FdSolution fd_reference_diffusion(const PdeProblem& problem, std::size_t nx, std::size_t nt) {
  return fd_reference_diffusion(problem, nx, nt, [&](double a, double b) {
    const double p[2] = {a, b};
    return problem.initial(p);
  });
}

FdSolution fd_reference_diffusion(const PdeProblem& problem, std::size_t nx, std::size_t nt,
                                  const InitialCondition& ic) {
  if (problem.kind != ProblemKind::LinearDiffusion &&
      problem.kind != ProblemKind::NonlinearDiffusion) {
    throw UsageError("finite-difference reference only covers the diffusion problems");
  }
  if (nx < 3 || nt < 1) throw UsageError("fd reference needs nx >= 3 and nt >= 1");

  FdSolution sol;
  sol.x = problem.bounds[0];
  sol.y = problem.bounds[1];
  sol.t = problem.bounds[2];
  sol.nx = nx;
  sol.nt = nt;
  sol.u = Tensor({nt + 1, nx, nx});
  const double h = sol.dx();
  if (std::abs((sol.y.hi - sol.y.lo) - (sol.x.hi - sol.x.lo)) > 1e-12) {
    throw UsageError("fd reference assumes a square spatial domain");
  }
  const double dt = sol.dt();
  const double alpha = problem.alpha;

  std::vector<double> u(nx * nx, 0.0);
  double peak = 0.0;
  for (std::size_t i = 1; i + 1 < nx; ++i) {
    for (std::size_t j = 1; j + 1 < nx; ++j) {
      const double v = ic(sol.x.lo + h * static_cast<double>(i), sol.y.lo + h * static_cast<double>(j));
      u[i * nx + j] = v;
      peak = std::max(peak, std::abs(v));
    }
  }
  auto store = [&](std::size_t level) {
    std::copy(u.begin(), u.end(), sol.u.data().begin() + static_cast<std::ptrdiff_t>(level * nx * nx));
  };
  store(0);
  const double inv_h2 = 1.0 / (h * h);

  if (problem.kind == ProblemKind::LinearDiffusion) {
    // (I − ½αdtΔ) u⁺ = (I + ½αdtΔ) u on interior nodes.
    const std::size_t m = nx - 2;
    const double c = 0.5 * alpha * dt * inv_h2;
    auto idx = [m](std::size_t i, std::size_t j) { return static_cast<int>((i - 1) * m + (j - 1)); };
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(5 * m * m);
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      for (std::size_t j = 1; j + 1 < nx; ++j) {
        const int k = idx(i, j);
        trips.emplace_back(k, k, 1.0 + 4.0 * c);
        if (i > 1) trips.emplace_back(k, idx(i - 1, j), -c);
        if (i + 2 < nx) trips.emplace_back(k, idx(i + 1, j), -c);
        if (j > 1) trips.emplace_back(k, idx(i, j - 1), -c);
        if (j + 2 < nx) trips.emplace_back(k, idx(i, j + 1), -c);
      }
    }
    Eigen::SparseMatrix<double> A(static_cast<int>(m * m), static_cast<int>(m * m));
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success) throw NumericalError("Crank–Nicolson factorization failed");

    std::vector<double> lap(nx * nx);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(m * m));
    for (std::size_t level = 1; level <= nt; ++level) {
      laplacian(u, lap, nx, inv_h2);
      for (std::size_t i = 1; i + 1 < nx; ++i)
        for (std::size_t j = 1; j + 1 < nx; ++j)
          rhs[idx(i, j)] = u[i * nx + j] + 0.5 * alpha * dt * lap[i * nx + j];
      const Eigen::VectorXd next = solver.solve(rhs);
      for (std::size_t i = 1; i + 1 < nx; ++i)
        for (std::size_t j = 1; j + 1 < nx; ++j) u[i * nx + j] = next[idx(i, j)];
      store(level);
    }
    return sol;
  }

  const double limit = nonlinear_stable_dt(alpha, h, peak);
  if (dt > limit) {
    const auto suggested = static_cast<std::size_t>(std::ceil((sol.t.hi - sol.t.lo) / limit));
    std::ostringstream msg;
    msg << "nonlinear diffusion: dt=" << dt << " exceeds the RK4 stability limit " << limit
        << " for dx=" << h << "; use dt <= " << limit << " (nt >= " << suggested << ")";
    throw ConfigError(msg.str());
  }

  // RK4 on du/dt = (α/2) Δ_h(u²). Boundary nodes stay at zero.
  std::vector<double> sq(nx * nx), k1(nx * nx), k2(nx * nx), k3(nx * nx), k4(nx * nx),
      stage(nx * nx);
  auto rhs = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t k = 0; k < v.size(); ++k) sq[k] = v[k] * v[k];
    laplacian(sq, out, nx, inv_h2);
    for (double& o : out) o *= 0.5 * alpha;
  };
  for (std::size_t level = 1; level <= nt; ++level) {
    rhs(u, k1);
    for (std::size_t k = 0; k < u.size(); ++k) stage[k] = u[k] + 0.5 * dt * k1[k];
    rhs(stage, k2);
    for (std::size_t k = 0; k < u.size(); ++k) stage[k] = u[k] + 0.5 * dt * k2[k];
    rhs(stage, k3);
    for (std::size_t k = 0; k < u.size(); ++k) stage[k] = u[k] + dt * k3[k];
    rhs(stage, k4);
    for (std::size_t k = 0; k < u.size(); ++k)
      u[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    store(level);
  }
  return sol;
}

FdResolution aligned_fd_resolution(const PdeProblem& problem, std::size_t lattice_n,
                                   std::size_t refine) {
  const std::size_t cells = (lattice_n - 1) * refine;
  FdResolution r{cells + 1, cells};
  if (problem.kind == ProblemKind::NonlinearDiffusion) {
    const double h = (problem.bounds[0].hi - problem.bounds[0].lo) / static_cast<double>(cells);
    double peak = 0.0;
    for (std::size_t i = 0; i <= cells; ++i) {
      for (std::size_t j = 0; j <= cells; ++j) {
        const double p[2] = {problem.bounds[0].lo + h * static_cast<double>(i),
                             problem.bounds[1].lo + h * static_cast<double>(j)};
        peak = std::max(peak, std::abs(problem.initial(p)));
      }
    }
    const double span = problem.bounds[2].hi - problem.bounds[2].lo;
    const double limit = nonlinear_stable_dt(problem.alpha, h, peak);
    const auto needed = static_cast<std::size_t>(std::ceil(span / limit));
    const std::size_t per = lattice_n - 1;
    r.nt = std::max(r.nt, (needed + per - 1) / per * per);
  }
  return r;
}

}  // namespace spinn
