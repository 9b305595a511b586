#pragma once

// Sectioned key = value run configuration.
//
//   [problem]  name, velocity_ic
//   [model]    arch, rank, hidden (comma list)
//   [train]    n, lr, iterations, eval_every, seed, pde_loss, fd_refine
//   [output]   dir
//
// Precedence, lowest first: built-in defaults, config file, SPINN_OUTPUT_DIR
// (output dir only), command-line flags.

#include <iosfwd>
#include <string>

#include "spinn/trainer.hpp"

namespace spinn {

inline constexpr const char* kOutputDirEnv = "SPINN_OUTPUT_DIR";

// Applies the keys found in `is` on top of `base`. Unknown sections or keys and
// unparsable values throw ConfigError naming "[section] key".
TrainConfig parse_config(std::istream& is, TrainConfig base = {});
TrainConfig load_config_file(const std::string& path, TrainConfig base = {});

// Overrides output_dir from the environment when set and non-empty.
void apply_env_overrides(TrainConfig& config);

// Round-trips through parse_config.
std::string to_ini(const TrainConfig& config);

}  // namespace spinn
