#pragma once

#include <string>
#include <vector>

#include "sacr2/sac.hpp"
#include "sacr2/types.hpp"

namespace sacr2 {

/// Full declarative description of one experiment suite: a run configuration
/// plus seed count, base seed and output location. Serializes to a sectioned
/// key = value text file; parsing rejects unknown keys.
struct ExperimentConfig {
  std::string preset_name;  // informational
  RunConfig run;
  int n_seeds = 4;
  std::uint64_t base_seed = 0;
  std::string output_dir = "runs/experiment";
};

struct ConfigError : IoError {
  using IoError::IoError;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);

/// Named toggle combinations for the ablation grid. `sac_demo` is the
/// demonstration baseline every other preset perturbs.
ExperimentConfig preset(const std::string& name);
const std::vector<std::string>& preset_names();

}  // namespace sacr2
