#pragma once

#include <string>
#include <vector>

#include "sacr2/sac.hpp"
#include "sacr2/types.hpp"

namespace sacr2 {

struct GradCheckReport {
  std::string name;
  Scalar max_rel_error = 0;
};

inline constexpr Scalar kGradCheckTolerance = 1e-4;
inline constexpr Scalar kGradCheckStep = 1e-6;

/// Central finite differences against the analytic backward pass for the MLP
/// core, the critic loss (1-step + n-step + L2), the actor loss (entropy + Q
/// + BC + L2) and the behaviour-cloning loss in isolation. Deterministic
/// seeds; small 64-bit networks.
std::vector<GradCheckReport> run_gradcheck_suites();

/// Synthetic small-scale batch/nets pair for finite-difference testing.
struct GradCheckProblem {
  TrainBatch batch;
  AgentNets nets;
  SacConfig config;
};
GradCheckProblem make_gradcheck_problem(std::uint64_t seed, bool relu_hidden);

}  // namespace sacr2
