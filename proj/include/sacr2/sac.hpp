#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sacr2/env.hpp"
#include "sacr2/expert.hpp"
#include "sacr2/nn.hpp"
#include "sacr2/replay.hpp"
#include "sacr2/types.hpp"

namespace sacr2 {

struct SacConfig {
  Scalar gamma = 0.99;
  Scalar alpha = 0.2;            // entropy coefficient
  bool alpha_auto = false;       // tune alpha toward target entropy -action_dim
  Scalar tau = 0.005;
  Scalar lr = 3e-4;
  int batch_size = 64;
  int replay_ratio = 32;         // with batch 64: two env steps per train step
  int n_step = 5;
  Scalar lambda_n = 1.0;         // n-step critic loss weight (0 disables)
  Scalar lambda_bc = 2.0;        // behaviour-cloning loss weight (0 disables)
  bool q_filter = false;
  Scalar l2_actor = 1e-4;
  Scalar l2_critic = 1e-4;
  Scalar bonus = 5.0;            // reward bonus b
  int pretrain_iters = 3000;
  int random_steps = 1000;
  Scalar reset_to_demo_prob = 0.0;
  bool relabel_successes = true;
  int relabel_window_fallback = 21;  // N when no demonstrations exist
  int hidden_units = 256;
  int hidden_layers = 2;

  int env_steps_per_train() const { return batch_size / replay_ratio; }
  void validate() const;
  std::vector<int> hidden_dims() const;
};

/// Actor, twin critics and their targets, with one Adam state per trained
/// network. Targets start as exact copies of the critics.
struct AgentNets {
  nn::PolicyNet actor;
  nn::Mlp critic1, critic2;
  nn::Mlp target1, target2;
  nn::AdamState actor_opt, critic1_opt, critic2_opt;
  Scalar log_alpha = 0.0;
  Scalar target_entropy = 0.0;

  static AgentNets create(int obs_dim, int action_dim, const SacConfig& config, Rng& rng);
  Scalar alpha(const SacConfig& config) const;
};

void save_agent(std::ostream& out, const AgentNets& nets);
void load_agent(std::istream& in, AgentNets& nets);

/// Fixed batch of training data: every loss below is a deterministic function
/// of (batch, nets, config), which the finite-difference suites rely on.
struct TrainBatch {
  Matrix obs, act, obs_next;
  Vector rew, done, is_demo, is_weights;
  // n-step assembly (used when lambda_n > 0)
  bool has_nstep = false;
  Vector return_n, done_n, discount_n;  // discount_n = gamma^steps_used
  Matrix obs_n;
  // externally supplied noise: one draw for the bootstrap action (shared by
  // the 1-step and n-step targets), one for the reparameterized actor action
  Matrix noise_bootstrap, noise_actor;

  int size() const { return int(obs.rows()); }
};

/// Soft Bellman backup y = r + disc * (1 - done) * (min target Q - alpha log pi),
/// with the bootstrap action freshly sampled from the current policy. No
/// gradient flows through y.
Vector critic_targets(const TrainBatch& batch, const AgentNets& nets,
                      const SacConfig& config);

struct CriticLossResult {
  Scalar loss = 0;
  Vector td_errors;  // 1-step |Q1 - y1| per sample, for PER
};

/// MSBE over both critics plus the weighted n-step term and L2 weight decay.
/// When grads are requested they are written (not accumulated).
CriticLossResult critic_loss(const TrainBatch& batch, const AgentNets& nets,
                             const SacConfig& config, nn::Gradients* grads1 = nullptr,
                             nn::Gradients* grads2 = nullptr);

struct ActorLossResult {
  Scalar loss = 0;
  Scalar bc_loss = 0;
  Scalar mean_log_prob = 0;
  Scalar mean_q = 0;
  Vector per_sample;  // alpha log pi - min Q, per sample (modified-PER term)
};

/// Entropy-regularized policy objective plus optional behaviour cloning and
/// L2 weight decay.
ActorLossResult actor_loss(const TrainBatch& batch, const AgentNets& nets,
                           const SacConfig& config, nn::Gradients* grads = nullptr);

/// Mean squared error between tanh(mean(s)) and the demonstrated action over
/// the demo rows of the batch; optional Q-filter zeroes terms where critic1
/// ranks the policy action above the demonstration. Empty demo sub-batch
/// yields 0.
Scalar bc_loss(const TrainBatch& batch, const AgentNets& nets, const SacConfig& config);

struct StepDiagnostics {
  Scalar critic_loss = 0;
  Scalar actor_loss = 0;
  Scalar bc_loss = 0;
  Scalar mean_q = 0;
  Scalar mean_target = 0;
  Scalar demo_batch_fraction = 0;
  Scalar alpha = 0;
};

/// One gradient step: sample, assemble n-step, critic Adam update, actor Adam
/// update, polyak targets, PER priority refresh. Throws TrainingDiverged on
/// non-finite losses.
StepDiagnostics train_step(AgentNets& nets, ReplayStore& store, const SacConfig& config,
                           Rng& rng);

/// pretrain_iters train steps with no environment interaction.
void pretrain(AgentNets& nets, ReplayStore& store, const SacConfig& config, Rng& rng);

struct EpisodeRecord {
  long episode = 0;
  long env_steps = 0;
  long train_steps = 0;
  int success = 0;
  int length = 0;
  Scalar rolling_success = 0;  // window 100
  Scalar critic_loss = 0;
  Scalar actor_loss = 0;
  Scalar demo_batch_fraction = 0;  // mean over train steps since last record
};

struct RunSummary {
  long episodes = 0;
  long env_steps = 0;
  long train_steps = 0;
  long episodes_to_90 = -1;       // first episode index with rolling >= 0.9
  Scalar final_rolling = 0;
  Scalar mean_demo_fraction = 0;  // mean over post-pretrain train steps
  int demo_mean_length = 0;       // N used for relabeling
  Scalar expert_success_rate = 1.0;
};

struct MetricsLog {
  std::vector<EpisodeRecord> episodes;
  RunSummary summary;
};

/// Everything one training run needs; the harness adds suite-level fields.
struct RunConfig {
  EnvConfig env;
  ExpertConfig expert;
  ReplayConfig replay;
  SacConfig sac;
  long max_env_steps = 150'000;

  void validate() const;
};

/// Full training pipeline: demo insertion, random interactions, pretraining,
/// then interleaved environment steps and gradient updates with success
/// relabeling, optional reset-to-demonstration starts and single-buffer demo
/// ratio maintenance.
MetricsLog run_training(const RunConfig& config, std::uint64_t seed);

/// Greedy-policy evaluation on fresh targets (diagnostics only).
Scalar evaluate_greedy(const AgentNets& nets, const EnvConfig& env, int episodes,
                       Rng& rng);

}  // namespace sacr2
