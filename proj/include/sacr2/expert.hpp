#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sacr2/env.hpp"
#include "sacr2/replay.hpp"
#include "sacr2/types.hpp"

namespace sacr2 {

/// Scripted demonstrator: Jacobian-transpose servoing toward the target, with
/// a damped-least-squares step inside `dls_radius` so the final approach does
/// not orbit the target at near-singular stretches. A small uniform jitter
/// keeps demonstrated actions from being degenerate.
struct ExpertConfig {
  Scalar gain = 16.0;      // tuned so demo episodes average ~20 steps
  Scalar jitter = 0.02;    // uniform action noise magnitude
  Scalar dls_radius = 0.4; // switch to the damped step inside this distance
  Scalar dls_damping = 0.1;
  int demo_count = 200;    // episodes generated for a run's initial demo set
};

/// Set of successful expert episodes plus the statistic N (rounded mean
/// episode length) used as the success-relabeling window.
struct DemoSet {
  std::vector<Episode> episodes;
  int mean_length = 0;  // N
  std::string env_config_hash;

  int episode_count() const { return int(episodes.size()); }
  long transition_count() const;
};

/// clamp(gain * J^T W (target - ee), -1, 1) plus jitter, where W is the
/// identity in the far field and (J J^T + damping I)^-1 inside dls_radius.
/// The jitter grows when the servo annihilates the error (near-singular
/// poses) so the expert can escape.
Vector expert_action(const ReacherState& state, const EnvConfig& env,
                     const ExpertConfig& expert, Rng& rng);

/// Rolls the expert for one episode; nullopt when the target is not reached
/// within the step limit.
std::optional<Episode> roll_expert_episode(const EnvConfig& env,
                                           const ExpertConfig& expert, Rng& rng,
                                           long episode_id);

/// Rolls episodes until n_episodes successes are collected, keeping raw
/// environment rewards. Aborts if more than 5% of attempts fail.
DemoSet generate_demos(int n_episodes, const EnvConfig& env, const ExpertConfig& expert,
                       Rng& rng);

/// Recomputes N from episode lengths (arithmetic mean, rounded to nearest).
int demo_mean_length(const std::vector<Episode>& episodes);

// Demo files: header "SACR2DEMO v1 <env_hash> <n_episodes> <N>", then one
// record per transition: episode_id step_idx s a r s' done. Numeric text at
// full double precision; round-trips exactly.
void save_demos(const DemoSet& demos, const std::string& path);
DemoSet load_demos(const std::string& path);
DemoSet load_demos(const std::string& path, const std::string& expected_env_hash);

}  // namespace sacr2
