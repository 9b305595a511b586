#include "spinn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "spinn/config.hpp"
#include "spinn/errors.hpp"
#include "spinn/fd_reference.hpp"

namespace spinn {

namespace {

constexpr double kDivergenceLoss = 1e8;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (n < 2) throw ConfigError("n must be at least 2, got " + std::to_string(n));
  if (rank < 1) throw ConfigError("rank must be at least 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a positive number");
  if (fd_refine < 1) throw ConfigError("fd_refine must be at least 1");
  for (std::size_t w : hidden) {
    if (w == 0) throw ConfigError("hidden widths must be positive");
  }
  const auto names = problem_names();
  if (std::find(names.begin(), names.end(), problem) == names.end()) {
    std::string known;
    for (const auto& s : names) known += (known.empty() ? "" : ", ") + s;
    throw ConfigError("unknown problem '" + problem + "' (known: " + known + ")");
  }
}

std::vector<std::size_t> TrainConfig::resolved_hidden() const {
  if (!hidden.empty()) return hidden;
  return arch == ArchKind::Separable ? default_separable_spec().hidden
                                     : default_vanilla_spec().hidden;
}

ModelSpec TrainConfig::model_spec(std::size_t dims) const {
  ModelSpec s;
  s.arch = arch;
  s.dims = dims;
  s.hidden = resolved_hidden();
  s.rank = rank;
  s.seed = seed;
  return s;
}

PdeProblem TrainConfig::make_problem() const {
  PdeProblem p = spinn::make_problem(problem);
  p.velocity_ic = velocity_ic;
  return p;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"problem", problem},
          {"arch", arch_name(arch)},
          {"n", n},
          {"rank", rank},
          {"hidden", resolved_hidden()},
          {"lr", lr},
          {"iterations", iterations},
          {"eval_every", eval_every},
          {"seed", seed},
          {"output_dir", output_dir},
          {"velocity_ic", velocity_ic},
          {"pde_loss", pde_loss_name(pde_loss)},
          {"fd_refine", fd_refine}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.problem = j.value("problem", c.problem);
  if (j.contains("arch")) c.arch = parse_arch(j.at("arch").get<std::string>());
  c.n = j.value("n", c.n);
  c.rank = j.value("rank", c.rank);
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.lr = j.value("lr", c.lr);
  c.iterations = j.value("iterations", c.iterations);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.seed = j.value("seed", c.seed);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.velocity_ic = j.value("velocity_ic", c.velocity_ic);
  if (j.contains("pde_loss")) c.pde_loss = parse_pde_loss(j.at("pde_loss").get<std::string>());
  c.fd_refine = j.value("fd_refine", c.fd_refine);
  return c;
}

// ---------------------------------------------------------------------------

TimingStats timing_stats(std::vector<double> samples) {
  TimingStats t;
  t.count = samples.size();
  if (samples.empty()) return t;
  std::sort(samples.begin(), samples.end());
  t.min_ms = samples.front();
  t.max_ms = samples.back();
  t.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(t.count);
  const std::size_t h = t.count / 2;
  t.median_ms = t.count % 2 ? samples[h] : 0.5 * (samples[h - 1] + samples[h]);
  return t;
}

std::optional<double> TrainReport::final_relative_l2() const {
  if (errors.empty()) return std::nullopt;
  return errors.back().relative_l2;
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j;
  j["config"] = config.to_json();
  j["optimizer"] = {{"name", "adam"},
                    {"lr", adam.lr},
                    {"beta1", adam.beta1},
                    {"beta2", adam.beta2},
                    {"eps", adam.eps}};
  j["parameter_count"] = parameter_count;
  auto& lc = j["loss_curve"] = nlohmann::json::array();
  for (const auto& r : losses) {
    lc.push_back({{"iteration", r.iteration},
                  {"total", r.total},
                  {"pde", r.pde},
                  {"ic", opt_json(r.ic)},
                  {"ic_velocity", opt_json(r.ic_velocity)},
                  {"bc", opt_json(r.bc)}});
  }
  auto& ec = j["error_curve"] = nlohmann::json::array();
  for (const auto& e : errors) ec.push_back({{"iteration", e.iteration}, {"relative_l2", e.relative_l2}});
  j["final_relative_l2"] = opt_json(final_relative_l2());
  j["timing_ms_per_iter"] = {{"count", timing.count},
                             {"mean", timing.mean_ms},
                             {"median", timing.median_ms},
                             {"min", timing.min_ms},
                             {"max", timing.max_ms}};
  j["peak_tensor_bytes"] = peak_bytes;
  j["diverged"] = diverged;
  j["abort_reason"] = abort_reason;
  j["checkpoint"] = checkpoint_path;
  return j;
}

// ---------------------------------------------------------------------------

double relative_l2(const Tensor& pred, const Tensor& ref) {
  if (pred.shape() != ref.shape()) {
    throw DimensionError("relative_l2 shapes differ: " + shape_string(pred.shape()) + " vs " +
                         shape_string(ref.shape()));
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double e = pred[i] - ref[i];
    num += e * e;
    den += ref[i] * ref[i];
  }
  if (den == 0.0) throw DomainError("relative_l2: reference has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

Tensor reference_solution(const PdeProblem& problem, const AxisGrid& grid, std::size_t fd_refine) {
  if (problem.has_exact()) return sample_on(grid, [&](auto x) { return problem.exact(x); });
  // The FD mesh is aligned with a uniform lattice of the same n per axis.
  const std::size_t n = grid.axis(0).size();
  const FdResolution res = aligned_fd_resolution(problem, n, fd_refine);
  return fd_reference_diffusion(problem, res.nx, res.nt).on_lattice(grid);
}

bool factored_loss_applies(const PdeProblem& problem, const Model& model) {
  return std::holds_alternative<SeparableModel>(model) && has_factored_residual(problem);
}

LossEvaluation evaluate_loss(const PdeProblem& problem, const Model& model,
                             const TrainingLattices& lattices, bool with_grads, PdeLossMode mode) {
  Tape tape;
  const ModelNodes nodes = bind(tape, model);
  const LossNodes loss = assemble_loss(tape, problem, nodes, lattices, mode);

  LossEvaluation out;
  LossRecord& r = out.record;
  r.total = tape.value(loss.total).item();
  r.pde = tape.value(loss.pde).item();
  if (loss.ic) r.ic = tape.value(*loss.ic).item();
  if (loss.ic_velocity) r.ic_velocity = tape.value(*loss.ic_velocity).item();
  if (loss.bc) r.bc = tape.value(*loss.bc).item();

  if (with_grads) {
    const Gradients g = tape.backward(loss.total);
    for (NodeId id : parameter_nodes(nodes)) out.grads.push_back(g[id]);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void write_curves_csv(const TrainReport& report, const std::filesystem::path& dir) {
  const std::string stamp = "# config " + report.config.to_json().dump() + "\n";
  std::ofstream loss(dir / "loss.csv");
  loss.precision(17);
  loss << stamp << "iteration,total,pde,ic,ic_velocity,bc\n";
  for (const auto& r : report.losses) {
    loss << r.iteration << ',' << r.total << ',' << r.pde << ',';
    if (r.ic) loss << *r.ic;
    loss << ',';
    if (r.ic_velocity) loss << *r.ic_velocity;
    loss << ',';
    if (r.bc) loss << *r.bc;
    loss << '\n';
  }
  std::ofstream err(dir / "error.csv");
  err.precision(17);
  err << stamp << "iteration,relative_l2\n";
  for (const auto& e : report.errors) err << e.iteration << ',' << e.relative_l2 << '\n';
}

}  // namespace

TrainReport train(const TrainConfig& config) {
  config.validate();
  const PdeProblem problem = config.make_problem();
  const TrainingLattices lattices = make_lattices(problem, config.n);
  const ModelSpec spec = config.model_spec(problem.dims());
  Model model = init_model(spec);
  if (config.pde_loss == PdeLossMode::Factored && !factored_loss_applies(problem, model)) {
    throw ConfigError("pde_loss = factored does not apply to " + config.problem + " with arch " +
                      arch_name(config.arch));
  }

  TrainReport report;
  report.config = config;
  report.adam.lr = config.lr;
  report.parameter_count = parameter_count(model);

  const Tensor reference = reference_solution(problem, lattices.interior, config.fd_refine);
  auto record_error = [&](std::size_t it) {
    report.errors.push_back({it, relative_l2(predict_grid(model, lattices.interior), reference)});
  };

  const std::vector<Tensor*> params = parameters(model);
  const std::vector<std::string> names = parameter_names(model);
  AdamState state = adam_init(params);
  std::vector<double> step_ms;
  memory::reset_peak();

  for (std::size_t it = 0;; ++it) {
    const bool last = it == config.iterations;
    const auto start = Clock::now();
    LossEvaluation ev = evaluate_loss(problem, model, lattices, !last, config.pde_loss);
    ev.record.iteration = it;
    report.losses.push_back(ev.record);

    if (!std::isfinite(ev.record.total) || ev.record.total > kDivergenceLoss) {
      report.diverged = true;
      report.abort_reason = "loss " + std::to_string(ev.record.total) + " at iteration " +
                            std::to_string(it) + " exceeds the divergence threshold";
      break;
    }
    if (last) break;
    adam_step(params, ev.grads, state, report.adam, names);
    step_ms.push_back(ms_since(start));

    if (config.eval_every > 0 && it % config.eval_every == 0) record_error(it);
  }
  if (!report.diverged) record_error(report.losses.back().iteration);
  report.timing = timing_stats(step_ms);
  report.peak_bytes = memory::peak_bytes();

  if (config.write_artifacts) {
    namespace fs = std::filesystem;
    const fs::path dir(config.output_dir);
    fs::create_directories(dir);
    const fs::path ckpt = dir / "checkpoint.json";
    save_checkpoint(ckpt.string(), model, {spec, report.losses.back().iteration, config.to_json()});
    report.checkpoint_path = ckpt.string();
    report.report_path = (dir / "report.json").string();
    std::ofstream os(report.report_path);
    os << report.to_json().dump(2) << '\n';
    write_curves_csv(report, dir);
    std::ofstream(dir / "config.ini") << to_ini(config);
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<ScalingRow> benchmark_scaling(const TrainConfig& base,
                                          const std::vector<std::size_t>& n_list,
                                          std::size_t warmup, std::size_t measured) {
  if (!std::is_sorted(n_list.begin(), n_list.end())) {
    throw UsageError("benchmark resolutions must be sorted");
  }
  if (measured == 0) throw UsageError("benchmark needs at least one timed iteration");
  std::vector<ScalingRow> rows;
  for (std::size_t n : n_list) {
    TrainConfig cfg = base;
    cfg.n = n;
    cfg.validate();
    const PdeProblem problem = cfg.make_problem();
    const TrainingLattices lattices = make_lattices(problem, n);
    Model model = init_model(cfg.model_spec(problem.dims()));
    const std::vector<Tensor*> params = parameters(model);
    AdamState state = adam_init(params);
    AdamConfig adam;
    adam.lr = cfg.lr;

    auto step = [&] {
      LossEvaluation ev = evaluate_loss(problem, model, lattices, true, cfg.pde_loss);
      adam_step(params, ev.grads, state, adam);
    };
    for (std::size_t i = 0; i < warmup; ++i) step();
    memory::reset_peak();
    std::vector<double> ms;
    for (std::size_t i = 0; i < measured; ++i) {
      const auto start = Clock::now();
      step();
      ms.push_back(ms_since(start));
    }
    const TimingStats t = timing_stats(ms);
    rows.push_back({n, lattices.interior.grid_points(), t.median_ms, t.min_ms, memory::peak_bytes(),
                    parameter_count(model)});
  }
  return rows;
}

double loglog_slope(const std::vector<ScalingRow>& rows) {
  if (rows.size() < 2) throw UsageError("slope needs at least two resolutions");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    const double x = std::log(static_cast<double>(r.n)), y = std::log(r.median_ms);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace spinn
