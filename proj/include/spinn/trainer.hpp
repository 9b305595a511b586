#pragma once

// Full-batch Adam over the physics-informed loss, with relative-L2 tracking
// against an exact or finite-difference reference.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinn/adam.hpp"
#include "spinn/models.hpp"
#include "spinn/pde.hpp"
#include "spinn/tensor.hpp"

namespace spinn {

struct TrainConfig {
  std::string problem = "klein-gordon3d";
  ArchKind arch = ArchKind::Separable;
  std::size_t n = 32;
  std::size_t rank = 50;
  std::vector<std::size_t> hidden;  // empty: 5×50 separable, 5×100 vanilla
  double lr = 1e-3;
  std::size_t iterations = 5000;
  std::size_t eval_every = 500;  // 0: only at the end
  std::uint64_t seed = 0;
  std::string output_dir = "runs/latest";
  bool velocity_ic = true;
  PdeLossMode pde_loss = PdeLossMode::Auto;
  std::size_t fd_refine = 4;
  bool write_artifacts = true;

  void validate() const;
  std::vector<std::size_t> resolved_hidden() const;
  ModelSpec model_spec(std::size_t dims) const;
  PdeProblem make_problem() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LossRecord {
  std::size_t iteration = 0;
  double total = 0.0;
  double pde = 0.0;
  std::optional<double> ic;
  std::optional<double> ic_velocity;
  std::optional<double> bc;
};

struct ErrorRecord {
  std::size_t iteration = 0;
  double relative_l2 = 0.0;
};

struct TimingStats {
  std::size_t count = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
};
TimingStats timing_stats(std::vector<double> samples_ms);

struct TrainReport {
  TrainConfig config;
  AdamConfig adam;
  std::size_t parameter_count = 0;
  std::vector<LossRecord> losses;  // iterations 0..N; entry N is the loss after the last step
  std::vector<ErrorRecord> errors;
  TimingStats timing;
  std::size_t peak_bytes = 0;
  bool diverged = false;
  std::string abort_reason;
  std::string checkpoint_path;
  std::string report_path;

  std::optional<double> final_relative_l2() const;
  nlohmann::json to_json() const;
};

// ‖pred − ref‖₂ / ‖ref‖₂ over all entries.
double relative_l2(const Tensor& pred, const Tensor& ref);

// Reference solution on `grid`: the exact solution when the problem has one,
// otherwise the finite-difference oracle (diffusion) on an aligned mesh.
Tensor reference_solution(const PdeProblem& problem, const AxisGrid& grid, std::size_t fd_refine);

struct LossEvaluation {
  LossRecord record;
  std::vector<Tensor> grads;  // in parameters() order; empty unless requested
};

// One loss evaluation (and optional reverse sweep) for `model`.
LossEvaluation evaluate_loss(const PdeProblem& problem, const Model& model,
                             const TrainingLattices& lattices, bool with_grads,
                             PdeLossMode mode = PdeLossMode::Auto);

// Whether the factored PDE term applies to this problem/model pair.
bool factored_loss_applies(const PdeProblem& problem, const Model& model);

TrainReport train(const TrainConfig& config);

struct ScalingRow {
  std::size_t n = 0;
  std::size_t grid_points = 0;
  double median_ms = 0.0;
  double min_ms = 0.0;
  std::size_t peak_bytes = 0;
  std::size_t parameter_count = 0;
};

// Times full training iterations (loss, backward, Adam) at each resolution:
// `warmup` untimed iterations, then the median of `measured` timed ones.
std::vector<ScalingRow> benchmark_scaling(const TrainConfig& base,
                                          const std::vector<std::size_t>& n_list,
                                          std::size_t warmup = 5, std::size_t measured = 20);

// Least-squares slope of log(ms) against log(n).
double loglog_slope(const std::vector<ScalingRow>& rows);

}  // namespace spinn
