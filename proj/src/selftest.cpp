#include "spinn/selftest.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

#include "spinn/flops.hpp"
#include "spinn/jet.hpp"
#include "spinn/models.hpp"
#include "spinn/pde.hpp"
#include "spinn/trainer.hpp"

namespace spinn {

namespace {

Tensor random_tensor(Shape shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

SelftestResult check_merge() {
  SplitMix64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + rng.next() % 3, r = 1 + rng.next() % 8;
    std::vector<Tensor> f;
    std::vector<std::size_t> n;
    for (std::size_t i = 0; i < d; ++i) {
      n.push_back(1 + rng.next() % 6);
      f.push_back(random_tensor({n.back(), r}, rng));
    }
    const Tensor u = merge(f);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t flat = 0; flat < u.size(); ++flat) {
      double s = 0.0;
      for (std::size_t j = 0; j < r; ++j) {
        double p = 1.0;
        for (std::size_t i = 0; i < d; ++i) p *= f[i](idx[i], j);
        s += p;
      }
      worst = std::max(worst, std::abs(s - u[flat]));
      for (std::size_t i = d; i-- > 0;) {
        if (++idx[i] < n[i]) break;
        idx[i] = 0;
      }
    }
  }
  return {"merge matches the pointwise rank-r sum", worst < 1e-12, "max abs diff " + fmt(worst)};
}

SelftestResult check_tape_gradients() {
  SplitMix64 rng(5);
  const Tensor x0 = random_tensor({4, 3}, rng), w0 = random_tensor({3, 5}, rng),
               b0 = random_tensor({5}, rng), a0 = random_tensor({4, 2}, rng),
               c0 = random_tensor({3, 2}, rng);
  auto build = [](Tape& t, NodeId x, NodeId w, NodeId b, NodeId a, NodeId c) {
    const NodeId h = t.tanh(t.add(t.matmul(x, w), b));
    const NodeId g = t.matmul_tn(x, t.square(t.tanh(x, 1)));
    const NodeId m = t.merge(std::vector<NodeId>{a, c});
    const NodeId s1 = t.mean(t.mul(h, t.scale(h, 0.5)));
    const NodeId s2 = t.sum(t.sub(m, t.tanh(m, 2)));
    return t.add(t.add(s1, t.scale(s2, 0.1)), t.sum(g));
  };
  std::vector<Tensor> vals = {x0, w0, b0, a0, c0};
  auto eval = [&](const std::vector<Tensor>& v) {
    Tape t;
    std::vector<NodeId> ids;
    for (const auto& tv : v) ids.push_back(t.leaf(tv));
    return t.value(build(t, ids[0], ids[1], ids[2], ids[3], ids[4])).item();
  };
  Tape tape;
  std::vector<NodeId> ids;
  for (const auto& tv : vals) ids.push_back(tape.leaf(tv));
  const Gradients g = tape.backward(build(tape, ids[0], ids[1], ids[2], ids[3], ids[4]));
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < vals.size(); ++k) {
    for (std::size_t e = 0; e < vals[k].size(); ++e) {
      auto plus = vals, minus = vals;
      plus[k][e] += h;
      minus[k][e] -= h;
      const double fd = (eval(plus) - eval(minus)) / (2 * h);
      const double an = g[ids[k]][e];
      worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd)));
    }
  }
  return {"tape gradients match central differences", worst < 1e-5, "max rel err " + fmt(worst)};
}

SelftestResult check_jets() {
  SplitMix64 rng(21);
  const MlpParams net = init_mlp({1, 8, 8, 8, 3}, rng);
  const Tensor x = random_tensor({7, 1}, rng);
  const Jet2Batch jet = mlp_jet_forward(net, x);
  auto f_at = [&](double shift) {
    Tensor xs = x;
    for (double& v : xs.data()) v += shift;
    return mlp_forward(net, xs);
  };
  const double h1 = 1e-5, h2 = 1e-3;
  const Tensor fp = f_at(h1), fm = f_at(-h1), gp = f_at(h2), gm = f_at(-h2), f0 = f_at(0.0);
  double e1 = 0, e2 = 0, s1 = 0, s2 = 0;
  for (std::size_t i = 0; i < f0.size(); ++i) {
    const double d1 = (fp[i] - fm[i]) / (2 * h1);
    const double d2 = (gp[i] - 2 * f0[i] + gm[i]) / (h2 * h2);
    e1 = std::max(e1, std::abs(d1 - jet.first[i]));
    e2 = std::max(e2, std::abs(d2 - jet.second[i]));
    s1 = std::max(s1, std::abs(d1));
    s2 = std::max(s2, std::abs(d2));
  }
  const double r1 = e1 / s1, r2 = e2 / s2;
  return {"jets match finite-difference stencils", r1 < 1e-5 && r2 < 1e-5,
          "rel err f' " + fmt(r1) + ", f'' " + fmt(r2)};
}

// Analytic derivatives of the manufactured solutions, fed to the residual
// operators as constants.
SelftestResult check_manufactured_residuals() {
  constexpr double pi = std::numbers::pi;
  SplitMix64 rng(3);
  double worst = 0.0;
  for (const char* name : {"helmholtz3d", "klein-gordon3d"}) {
    const PdeProblem p = make_problem(name);
    const std::size_t n = 1000;
    Tensor u({n}), q({n}), d2[3] = {Tensor({n}), Tensor({n}), Tensor({n})};
    for (std::size_t k = 0; k < n; ++k) {
      double x[3];
      for (std::size_t i = 0; i < 3; ++i) x[i] = rng.uniform(p.bounds[i].lo, p.bounds[i].hi);
      u[k] = p.exact(x);
      q[k] = p.source(x);
      if (p.kind == ProblemKind::Helmholtz) {
        for (std::size_t i = 0; i < 3; ++i) d2[i][k] = -std::pow(p.modes[i] * pi, 2) * u[k];
      } else {
        d2[0][k] = d2[1][k] = 0.0;
        d2[2][k] = -u[k];
      }
    }
    Tape t;
    FieldBundle f;
    f.u = t.constant(u);
    f.du.resize(3);
    for (const auto& d : d2) f.ddu.push_back(t.constant(d));
    const Tensor r = t.value(residual(t, p, f, t.constant(q)));
    for (double v : r.data()) worst = std::max(worst, std::abs(v));
  }
  return {"manufactured solutions zero the residuals", worst < 1e-6, "max |r| " + fmt(worst)};
}

SelftestResult check_flops_counter() {
  bool ok = true;
  {
    const ArchSpec spec{SpecKind::Separable, {1, 6, 6, 4}, 3, 4, 5};
    SeparableModel m = init_separable(3, {6, 6}, 4, 1);
    const AxisGrid grid = AxisGrid::uniform({{0, 1}, {0, 1}, {0, 1}}, {5, 5, 5});
    Tape t;
    const auto nodes = std::get<SeparableNodes>(spinn::bind(t, Model{m}));
    CountingScope fwd;
    spinn_fields(t, nodes, grid, FieldRequest::value_only(3));
    const OpCounts f = fwd.counts();
    CountingScope all;
    spinn_fields(t, nodes, grid, FieldRequest::all(3));
    ok = ok && f == count_forward(spec) && all.counts() == count_field_evaluation(spec);
  }
  {
    const ArchSpec spec{SpecKind::Monolithic, {3, 6, 6, 1}, 3, 1, 4};
    VanillaModel m = init_vanilla(3, {6, 6}, 2);
    const AxisGrid grid = AxisGrid::uniform({{0, 1}, {0, 1}, {0, 1}}, {4, 4, 4});
    Tape t;
    const auto nodes = std::get<MlpNodes>(spinn::bind(t, Model{m}));
    CountingScope fwd;
    pinn_fields(t, nodes, grid.points(), FieldRequest::value_only(3));
    const OpCounts f = fwd.counts();
    CountingScope all;
    pinn_fields(t, nodes, grid.points(), FieldRequest::all(3));
    ok = ok && f == count_forward(spec) && all.counts() == count_field_evaluation(spec);
  }
  return {"flops estimator equals the runtime counter", ok,
          ok ? "exact agreement" : "estimator and runtime counter differ"};
}

SelftestResult check_factored_loss() {
  double worst = 0.0;
  for (const char* name : {"helmholtz3d", "diffusion-linear"}) {
    const PdeProblem p = make_problem(name);
    const TrainingLattices L = make_lattices(p, 6);
    const Model m = init_separable(3, {8, 8}, 4, 9);
    const auto a = evaluate_loss(p, m, L, true, PdeLossMode::Grid);
    const auto b = evaluate_loss(p, m, L, true, PdeLossMode::Factored);
    worst = std::max(worst, std::abs(a.record.total - b.record.total) / std::abs(a.record.total));
    for (std::size_t k = 0; k < a.grads.size(); ++k)
      for (std::size_t e = 0; e < a.grads[k].size(); ++e)
        worst = std::max(worst, std::abs(a.grads[k][e] - b.grads[k][e]) /
                                    std::max(1.0, std::abs(a.grads[k][e])));
  }
  return {"factored and grid PDE losses agree", worst < 1e-10, "max rel diff " + fmt(worst)};
}

SelftestResult check_determinism() {
  const PdeProblem p = make_problem("klein-gordon3d");
  const TrainingLattices L = make_lattices(p, 5);
  const Model m = init_separable(3, {8, 8}, 4, 4);
  const auto a = evaluate_loss(p, m, L, true);
  const auto b = evaluate_loss(p, m, L, true);
  bool same = a.record.total == b.record.total;
  for (std::size_t k = 0; k < a.grads.size(); ++k) same = same && a.grads[k] == b.grads[k];
  return {"loss and gradients are bit-reproducible", same, same ? "identical" : "differ"};
}

}  // namespace

std::vector<SelftestResult> run_selftest() {
  std::vector<std::function<SelftestResult()>> checks = {
      check_merge,         check_tape_gradients, check_jets,         check_manufactured_residuals,
      check_flops_counter, check_factored_loss,  check_determinism};
  std::vector<SelftestResult> out;
  for (auto& c : checks) {
    try {
      out.push_back(c());
    } catch (const std::exception& e) {
      out.push_back({"check threw", false, e.what()});
    }
  }
  return out;
}

bool report_selftest(const std::vector<SelftestResult>& results, std::ostream& os) {
  bool all = true;
  for (const auto& r : results) {
    os << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    all = all && r.passed;
  }
  return all;
}

}  // namespace spinn
