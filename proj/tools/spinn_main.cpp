// spinn command-line front end.
//
// Exit codes: 0 success, 1 usage/config/file error, 2 numerical failure,
// 3 selftest failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spinn/config.hpp"
#include "spinn/errors.hpp"
#include "spinn/flops.hpp"
#include "spinn/selftest.hpp"
#include "spinn/trainer.hpp"

namespace fs = std::filesystem;
using namespace spinn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitSelftest = 3;

std::vector<std::size_t> parse_size_list(const std::string& s, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError(std::string("--") + what + ": expected positive integers, got '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string("--") + what + " is empty");
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path.string());
  out << text;
}

// Flags that override config values. Unset optionals leave the config alone.
struct Overrides {
  std::optional<std::string> problem, arch, hidden, output, pde_loss;
  std::optional<std::size_t> n, rank, iterations, eval_every, fd_refine;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<bool> velocity_ic;

  void add_to(CLI::App& app) {
    app.add_option("--problem", problem, "problem name");
    app.add_option("--arch", arch, "spinn or pinn");
    app.add_option("--hidden", hidden, "hidden widths, comma separated");
    app.add_option("--rank", rank, "separable rank");
    app.add_option("--n", n, "lattice points per axis");
    app.add_option("--lr", lr, "Adam learning rate");
    app.add_option("--iterations", iterations, "Adam steps");
    app.add_option("--eval-every", eval_every, "relative L2 cadence (0: end only)");
    app.add_option("--seed", seed, "initialization seed");
    app.add_option("--pde-loss", pde_loss, "auto, grid or factored");
    app.add_option("--fd-refine", fd_refine, "FD reference refinement factor");
    app.add_option("--velocity-ic", velocity_ic, "Klein-Gordon velocity IC term (true/false)");
    app.add_option("--output", output, "output directory");
  }

  void apply(TrainConfig& c) const {
    if (problem) c.problem = *problem;
    if (arch) c.arch = parse_arch(*arch);
    if (hidden) c.hidden = parse_size_list(*hidden, "hidden");
    if (rank) c.rank = *rank;
    if (n) c.n = *n;
    if (lr) c.lr = *lr;
    if (iterations) c.iterations = *iterations;
    if (eval_every) c.eval_every = *eval_every;
    if (seed) c.seed = *seed;
    if (pde_loss) c.pde_loss = parse_pde_loss(*pde_loss);
    if (fd_refine) c.fd_refine = *fd_refine;
    if (velocity_ic) c.velocity_ic = *velocity_ic;
    if (output) c.output_dir = *output;
  }
};

TrainConfig resolve_config(const std::string& config_path, const Overrides& o) {
  TrainConfig c;
  if (!config_path.empty()) c = load_config_file(config_path, c);
  apply_env_overrides(c);
  o.apply(c);
  c.validate();
  return c;
}

int cmd_train(const std::string& config_path, const Overrides& o) {
  const TrainConfig config = resolve_config(config_path, o);
  if (!config_path.empty()) {
    write_text(fs::path(config.output_dir) / "config.source.ini", read_text(config_path));
  }
  const TrainReport report = train(config);
  const auto& last = report.losses.back();
  std::cout << "problem " << config.problem << ", arch " << arch_name(config.arch) << ", n "
            << config.n << ", params " << report.parameter_count << "\n";
  std::cout << "loss " << report.losses.front().total << " -> " << last.total << " after "
            << last.iteration << " iterations\n";
  if (const auto l2 = report.final_relative_l2()) std::cout << "relative L2 " << *l2 << "\n";
  if (report.timing.count > 0) std::cout << "median ms/iter " << report.timing.median_ms << "\n";
  if (!report.report_path.empty()) std::cout << "report " << report.report_path << "\n";
  if (report.diverged) {
    std::cerr << "training diverged: " << report.abort_reason << "\n";
    return kExitNumerical;
  }
  return 0;
}

struct LoadedRun {
  Model model;
  TrainConfig config;
  PdeProblem problem;
};

LoadedRun load_run(const std::string& checkpoint) {
  if (!fs::exists(checkpoint)) throw FileError("checkpoint not found: " + checkpoint);
  auto [model, info] = load_checkpoint(checkpoint);
  if (!info.meta.contains("problem")) throw FileError(checkpoint + ": manifest has no run config");
  TrainConfig config = TrainConfig::from_json(info.meta);
  PdeProblem problem = config.make_problem();
  return {std::move(model), std::move(config), std::move(problem)};
}

AxisGrid eval_grid(const PdeProblem& p, std::size_t n) {
  return AxisGrid::uniform(p.bounds, std::vector<std::size_t>(p.dims(), n));
}

int cmd_eval(const std::string& checkpoint, std::optional<std::size_t> n_opt,
             std::optional<std::size_t> refine_opt) {
  const LoadedRun run = load_run(checkpoint);
  const std::size_t n = n_opt.value_or(run.config.n);
  const std::size_t refine = refine_opt.value_or(run.config.fd_refine);
  const AxisGrid grid = eval_grid(run.problem, n);
  const double l2 =
      relative_l2(predict_grid(run.model, grid), reference_solution(run.problem, grid, refine));
  const nlohmann::json out = {{"checkpoint", checkpoint},
                              {"problem", run.problem.name},
                              {"n", n},
                              {"reference", run.problem.has_exact() ? "exact" : "finite-difference"},
                              {"relative_l2", l2}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_export(const std::string& checkpoint, std::optional<std::size_t> n_opt,
               const std::string& field, const std::string& output) {
  const LoadedRun run = load_run(checkpoint);
  const std::size_t n = n_opt.value_or(run.config.n);
  const AxisGrid grid = eval_grid(run.problem, n);
  GridFile g;
  g.field = field;
  g.bounds = run.problem.bounds;
  g.meta = {{"config", run.config.to_json()}, {"checkpoint", checkpoint}, {"n", n}};
  if (field == "prediction") {
    g.values = predict_grid(run.model, grid);
  } else if (field == "reference") {
    g.values = reference_solution(run.problem, grid, run.config.fd_refine);
  } else if (field == "error") {
    const Tensor pred = predict_grid(run.model, grid);
    const Tensor ref = reference_solution(run.problem, grid, run.config.fd_refine);
    g.values = pred;
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = pred[i] - ref[i];
  } else {
    throw UsageError("--field must be prediction, reference or error");
  }
  if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
  write_grid_file(output, g);
  std::cout << "wrote " << output << " (" << g.values.size() << " values)\n";
  return 0;
}

struct BenchOptions {
  std::string problem = "helmholtz3d";
  std::string arch = "both";
  std::string spinn_n = "16,32,64,128";
  std::string pinn_n = "8,16,24,32";
  std::optional<std::string> n;
  std::size_t warmup = 5;
  std::size_t measured = 20;
  std::optional<std::string> spinn_hidden, pinn_hidden;
  std::size_t rank = 50;
  std::string output = "bench.csv";
};

void bench_one(const BenchOptions& b, ArchKind arch, const std::vector<std::size_t>& ns,
               std::ostream& csv) {
  TrainConfig base;
  base.problem = b.problem;
  base.arch = arch;
  base.rank = b.rank;
  const auto& hidden = arch == ArchKind::Separable ? b.spinn_hidden : b.pinn_hidden;
  if (hidden) base.hidden = parse_size_list(*hidden, "hidden");
  base.write_artifacts = false;
  base.validate();
  const auto rows = benchmark_scaling(base, ns, b.warmup, b.measured);
  for (const auto& r : rows) {
    csv << arch_name(arch) << "," << r.n << "," << r.grid_points << "," << r.median_ms << ","
        << r.min_ms << "," << r.peak_bytes << "," << r.parameter_count << "\n";
    std::cout << arch_name(arch) << " n=" << r.n << " median " << r.median_ms << " ms/iter, peak "
              << r.peak_bytes / (1024 * 1024) << " MiB\n";
  }
  if (rows.size() >= 2) {
    std::cout << arch_name(arch) << " log-log slope " << loglog_slope(rows) << "\n";
  }
}

int cmd_bench(const BenchOptions& b) {
  if (b.arch != "spinn" && b.arch != "pinn" && b.arch != "both") {
    throw UsageError("--arch must be spinn, pinn or both");
  }
  std::ostringstream csv;
  csv << "# problem " << b.problem << ", warmup " << b.warmup << ", measured " << b.measured
      << "\n";
  csv << "arch,n,grid_points,median_ms,min_ms,peak_bytes,parameters\n";
  if (b.arch != "pinn") {
    bench_one(b, ArchKind::Separable, parse_size_list(b.n.value_or(b.spinn_n), "n"), csv);
  }
  if (b.arch != "spinn") {
    bench_one(b, ArchKind::Vanilla, parse_size_list(b.n.value_or(b.pinn_n), "n"), csv);
  }
  write_text(b.output, csv.str());
  std::cout << "wrote " << b.output << "\n";
  return 0;
}

int cmd_flops(std::size_t n, const std::string& format, const std::string& output) {
  const ArchSpec s = default_spinn_arch(n), p = default_pinn_arch(n);
  const FlopsReport rs = flops_report(s), rp = flops_report(p);
  const std::string md = flops_table_markdown(rs, rp);
  const std::string js = flops_json(s, rs, p, rp).dump(2) + "\n";
  if (format == "markdown" || format == "both") std::cout << md;
  if (format == "json") std::cout << js;
  if (!output.empty()) {
    write_text(fs::path(output) / "flops.md", md);
    write_text(fs::path(output) / "flops.json", js);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Separable physics-informed neural networks"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "train a model from a config");
  std::string config_path;
  Overrides overrides;
  train_cmd->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  overrides.add_to(*train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "relative L2 of a checkpoint against its reference");
  std::string checkpoint;
  std::optional<std::size_t> eval_n, eval_refine;
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint manifest")->required();
  eval_cmd->add_option("--n", eval_n, "evaluation lattice points per axis");
  eval_cmd->add_option("--fd-refine", eval_refine, "FD reference refinement factor");

  auto* bench_cmd = app.add_subcommand("bench", "ms/iter scaling against lattice size");
  BenchOptions bench;
  bench_cmd->add_option("--problem", bench.problem, "problem name");
  bench_cmd->add_option("--arch", bench.arch, "spinn, pinn or both");
  bench_cmd->add_option("--n", bench.n, "lattice sizes for every arch, comma separated");
  bench_cmd->add_option("--spinn-n", bench.spinn_n, "separable lattice sizes");
  bench_cmd->add_option("--pinn-n", bench.pinn_n, "baseline lattice sizes");
  bench_cmd->add_option("--warmup", bench.warmup, "untimed iterations");
  bench_cmd->add_option("--measured", bench.measured, "timed iterations");
  bench_cmd->add_option("--rank", bench.rank, "separable rank");
  bench_cmd->add_option("--spinn-hidden", bench.spinn_hidden, "separable hidden widths");
  bench_cmd->add_option("--pinn-hidden", bench.pinn_hidden, "baseline hidden widths");
  bench_cmd->add_option("--output", bench.output, "CSV path");

  auto* flops_cmd = app.add_subcommand("flops", "operation counts for the default architectures");
  bool defaults = false;
  std::size_t flops_n = 90;
  std::string format = "markdown", flops_out;
  flops_cmd->add_flag("--defaults", defaults, "default architectures (always used)");
  flops_cmd->add_option("--n", flops_n, "lattice points per axis")->check(CLI::PositiveNumber);
  flops_cmd->add_option("--format", format, "markdown, json or both")
      ->check(CLI::IsMember({"markdown", "json", "both"}));
  flops_cmd->add_option("--output", flops_out, "directory for flops.md and flops.json");

  auto* export_cmd = app.add_subcommand("export-grid", "write a field on a lattice to a grid file");
  std::optional<std::size_t> export_n;
  std::string field = "prediction", grid_out;
  export_cmd->add_option("--checkpoint", checkpoint, "checkpoint manifest")->required();
  export_cmd->add_option("--n", export_n, "lattice points per axis");
  export_cmd->add_option("--field", field, "prediction, reference or error");
  export_cmd->add_option("--output", grid_out, "grid file path")->required();

  auto* selftest_cmd = app.add_subcommand("selftest", "run the invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(config_path, overrides);
    if (*eval_cmd) return cmd_eval(checkpoint, eval_n, eval_refine);
    if (*bench_cmd) return cmd_bench(bench);
    if (*flops_cmd) return cmd_flops(flops_n, format, flops_out);
    if (*export_cmd) return cmd_export(checkpoint, export_n, field, grid_out);
    if (*selftest_cmd) return report_selftest(run_selftest(), std::cout) ? 0 : kExitSelftest;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
