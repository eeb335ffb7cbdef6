#include "sacr2/sac.hpp"

#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>

namespace sacr2 {

void SacConfig::validate() const {
  if (!(gamma >= 0 && gamma <= 1)) throw ContractViolation("SacConfig: gamma outside [0, 1]");
  if (!(tau >= 0 && tau <= 1)) throw ContractViolation("SacConfig: tau outside [0, 1]");
  if (!(alpha >= 0)) throw ContractViolation("SacConfig: alpha must be >= 0");
  if (!(lr > 0)) throw ContractViolation("SacConfig: lr must be > 0");
  if (batch_size < 1) throw ContractViolation("SacConfig: batch_size must be >= 1");
  if (replay_ratio < 1) throw ContractViolation("SacConfig: replay_ratio must be >= 1");
  if (batch_size % replay_ratio != 0 || batch_size / replay_ratio < 1)
    throw ContractViolation(
        "SacConfig: batch_size must be a positive multiple of replay_ratio");
  if (n_step < 1) throw ContractViolation("SacConfig: n_step must be >= 1");
  if (lambda_n < 0 || lambda_bc < 0 || l2_actor < 0 || l2_critic < 0 || bonus < 0)
    throw ContractViolation("SacConfig: loss weights and bonus must be >= 0");
  if (pretrain_iters < 0 || random_steps < 0)
    throw ContractViolation("SacConfig: iteration counts must be >= 0");
  if (!(reset_to_demo_prob >= 0 && reset_to_demo_prob <= 1))
    throw ContractViolation("SacConfig: reset_to_demo_prob outside [0, 1]");
  if (relabel_window_fallback < 2)
    throw ContractViolation("SacConfig: relabel_window_fallback must be >= 2");
  if (hidden_units < 1 || hidden_layers < 1)
    throw ContractViolation("SacConfig: hidden layer sizes must be positive");
}

std::vector<int> SacConfig::hidden_dims() const {
  return std::vector<int>(size_t(hidden_layers), hidden_units);
}

AgentNets AgentNets::create(int obs_dim, int action_dim, const SacConfig& config,
                            Rng& rng) {
  config.validate();
  AgentNets nets;
  nets.actor = nn::PolicyNet::create(obs_dim, action_dim, config.hidden_dims(),
                                     nn::Activation::kRelu, rng);
  std::vector<int> critic_dims;
  critic_dims.push_back(obs_dim + action_dim);
  for (int h : config.hidden_dims()) critic_dims.push_back(h);
  critic_dims.push_back(1);
  nets.critic1 = nn::Mlp::create(critic_dims, nn::Activation::kRelu, rng);
  nets.critic2 = nn::Mlp::create(critic_dims, nn::Activation::kRelu, rng);
  nets.target1 = nets.critic1;
  nets.target2 = nets.critic2;
  nets.actor_opt = nn::AdamState::create(nets.actor.net, config.lr);
  nets.critic1_opt = nn::AdamState::create(nets.critic1, config.lr);
  nets.critic2_opt = nn::AdamState::create(nets.critic2, config.lr);
  nets.log_alpha = std::log(std::max(config.alpha, Scalar(1e-8)));
  nets.target_entropy = -Scalar(action_dim);
  return nets;
}

Scalar AgentNets::alpha(const SacConfig& config) const {
  return config.alpha_auto ? std::exp(log_alpha) : config.alpha;
}

void save_agent(std::ostream& out, const AgentNets& nets) {
  out << "SACR2AGENT v1 " << format_double(nets.log_alpha) << ' '
      << format_double(nets.target_entropy) << ' ' << nets.actor.action_dim << '\n';
  nn::save_mlp(out, "actor", nets.actor.net);
  nn::save_mlp(out, "critic1", nets.critic1);
  nn::save_mlp(out, "critic2", nets.critic2);
  nn::save_mlp(out, "target1", nets.target1);
  nn::save_mlp(out, "target2", nets.target2);
}

void load_agent(std::istream& in, AgentNets& nets) {
  std::string magic, version;
  if (!(in >> magic >> version >> nets.log_alpha >> nets.target_entropy >>
        nets.actor.action_dim) ||
      magic != "SACR2AGENT" || version != "v1")
    throw IoError("load_agent: bad checkpoint header");
  nets.actor.net = nn::load_mlp(in, "actor");
  nets.critic1 = nn::load_mlp(in, "critic1");
  nets.critic2 = nn::load_mlp(in, "critic2");
  nets.target1 = nn::load_mlp(in, "target1");
  nets.target2 = nn::load_mlp(in, "target2");
}

namespace {

Matrix join_obs_action(const MatrixRef& obs, const MatrixRef& action) {
  Matrix joint(obs.rows(), obs.cols() + action.cols());
  joint << obs, action;
  return joint;
}

/// Shared soft Bellman backup. The 1-step and n-step targets differ only in
/// the (obs, reward-sum, done, discount) tuple, so with n = 1 the two are
/// bitwise identical.
Vector soft_bootstrap(const AgentNets& nets, const SacConfig& config,
                      const MatrixRef& boot_obs, const VectorRef& reward_sum,
                      const VectorRef& done, const VectorRef& discount,
                      const MatrixRef& noise) {
  nn::PolicySample next = nn::policy_sample(nets.actor, boot_obs, noise);
  const Matrix joint = join_obs_action(boot_obs, next.action);
  const Vector q1 = nn::forward(nets.target1, joint).col(0);
  const Vector q2 = nn::forward(nets.target2, joint).col(0);
  const Vector q_min = q1.cwiseMin(q2);
  const Scalar alpha = nets.alpha(config);
  return (reward_sum.array() +
          discount.array() * (Scalar(1) - done.array()) *
              (q_min.array() - alpha * next.log_prob.array()))
      .matrix();
}

}  // namespace

Vector critic_targets(const TrainBatch& batch, const AgentNets& nets,
                      const SacConfig& config) {
  const Vector one_step_discount = Vector::Constant(batch.size(), config.gamma);
  return soft_bootstrap(nets, config, batch.obs_next, batch.rew, batch.done,
                        one_step_discount, batch.noise_bootstrap);
}

CriticLossResult critic_loss(const TrainBatch& batch, const AgentNets& nets,
                             const SacConfig& config, nn::Gradients* grads1,
                             nn::Gradients* grads2) {
  const int b = batch.size();
  const Matrix joint = join_obs_action(batch.obs, batch.act);
  const Vector y1 = critic_targets(batch, nets, config);
  Vector yn;
  const bool use_nstep = config.lambda_n > 0;
  if (use_nstep) {
    if (!batch.has_nstep)
      throw ContractViolation("critic_loss: lambda_n > 0 requires n-step fields");
    yn = soft_bootstrap(nets, config, batch.obs_n, batch.return_n, batch.done_n,
                        batch.discount_n, batch.noise_bootstrap);
  }

  CriticLossResult result;
  const Vector& w = batch.is_weights;
  const nn::Mlp* critics[2] = {&nets.critic1, &nets.critic2};
  nn::Gradients* grads[2] = {grads1, grads2};
  for (int c = 0; c < 2; ++c) {
    nn::ForwardCache cache;
    const Vector q = nn::forward(*critics[c], joint, grads[c] ? &cache : nullptr).col(0);
    const Vector r1 = q - y1;
    result.loss += Scalar(0.5) * (w.array() * r1.array().square()).mean();
    if (c == 0) result.td_errors = r1.cwiseAbs();
    Vector d_q = (w.array() * r1.array() / Scalar(b)).matrix();
    if (use_nstep) {
      const Vector rn = q - yn;
      result.loss +=
          config.lambda_n * Scalar(0.5) * (w.array() * rn.array().square()).mean();
      d_q += (config.lambda_n * (w.array() * rn.array() / Scalar(b))).matrix();
    }
    if (grads[c]) {
      *grads[c] = nn::Gradients::zeros_like(*critics[c]);
      nn::backward(*critics[c], cache, Matrix(d_q), grads[c]);
      grads[c]->add_l2(*critics[c], config.l2_critic);
    }
  }
  result.loss += config.l2_critic * (nets.critic1.squared_weight_norm() +
                                     nets.critic2.squared_weight_norm());
  return result;
}

namespace {

struct BcTerms {
  Scalar loss = 0;
  Scalar demo_count = 0;
  Matrix diff;    // pi_det - demo action
  Vector filter;  // is_demo, optionally gated by the Q-filter
};

BcTerms bc_terms(const Matrix& pi_det, const TrainBatch& batch, const AgentNets& nets,
                 const SacConfig& config) {
  BcTerms t;
  t.filter = batch.is_demo;
  if (config.q_filter) {
    const Vector q_demo =
        nn::forward(nets.critic1, join_obs_action(batch.obs, batch.act)).col(0);
    const Vector q_pi =
        nn::forward(nets.critic1, join_obs_action(batch.obs, pi_det)).col(0);
    t.filter = t.filter.cwiseProduct(
        (q_demo.array() > q_pi.array()).cast<Scalar>().matrix());
  }
  t.demo_count = batch.is_demo.sum();
  if (t.demo_count > 0) {
    t.diff = pi_det - batch.act;
    const Vector sq = t.diff.rowwise().squaredNorm();
    t.loss = (t.filter.array() * sq.array()).sum() / t.demo_count;
  }
  return t;
}

}  // namespace

Scalar bc_loss(const TrainBatch& batch, const AgentNets& nets, const SacConfig& config) {
  const Matrix head = nn::forward(nets.actor.net, batch.obs);
  const Matrix pi_det =
      head.leftCols(nets.actor.action_dim).array().tanh().matrix();
  return bc_terms(pi_det, batch, nets, config).loss;
}

ActorLossResult actor_loss(const TrainBatch& batch, const AgentNets& nets,
                           const SacConfig& config, nn::Gradients* grads) {
  const int b = batch.size();
  const int adim = nets.actor.action_dim;
  nn::PolicySample sample = nn::policy_sample(nets.actor, batch.obs, batch.noise_actor);
  const Matrix joint = join_obs_action(batch.obs, sample.action);
  nn::ForwardCache cache1, cache2;
  const Vector q1 = nn::forward(nets.critic1, joint, grads ? &cache1 : nullptr).col(0);
  const Vector q2 = nn::forward(nets.critic2, joint, grads ? &cache2 : nullptr).col(0);
  const Vector q_min = q1.cwiseMin(q2);
  const Scalar alpha = nets.alpha(config);

  ActorLossResult result;
  result.per_sample = alpha * sample.log_prob - q_min;
  result.mean_log_prob = sample.log_prob.mean();
  result.mean_q = q_min.mean();
  result.loss = result.per_sample.mean();

  Matrix d_mean_extra;
  if (config.lambda_bc > 0) {
    const BcTerms bc = bc_terms(sample.deterministic_action(), batch, nets, config);
    result.bc_loss = bc.loss;
    result.loss += config.lambda_bc * bc.loss;
    if (grads && bc.demo_count > 0) {
      const Matrix pi_det = sample.deterministic_action();
      d_mean_extra =
          ((config.lambda_bc * Scalar(2) / bc.demo_count) *
           (bc.diff.array().colwise() * bc.filter.array()) *
           (Scalar(1) - pi_det.array().square()))
              .matrix();
    }
  }
  result.loss += config.l2_actor * nets.actor.net.squared_weight_norm();

  if (grads) {
    *grads = nn::Gradients::zeros_like(nets.actor.net);
    const Vector d_log_prob = Vector::Constant(b, alpha / Scalar(b));
    const Vector pick1 =
        (q1.array() <= q2.array()).cast<Scalar>().matrix();
    const Vector d_y1 = -pick1 / Scalar(b);
    const Vector d_y2 = -(Vector::Ones(b) - pick1) / Scalar(b);
    const Matrix d_in1 = nn::backward(nets.critic1, cache1, Matrix(d_y1), nullptr);
    const Matrix d_in2 = nn::backward(nets.critic2, cache2, Matrix(d_y2), nullptr);
    const Matrix d_action = d_in1.rightCols(adim) + d_in2.rightCols(adim);
    nn::policy_backward(nets.actor, sample, d_action, d_log_prob, d_mean_extra, grads);
    grads->add_l2(nets.actor.net, config.l2_actor);
  }
  return result;
}

namespace {

TrainBatch make_train_batch(const SampledBatch& sampled, const ReplayStore& store,
                            const SacConfig& config, Rng& rng) {
  const int b = int(sampled.transitions.size());
  const int sdim = int(sampled.transitions.front().s.size());
  const int adim = int(sampled.transitions.front().a.size());
  TrainBatch batch;
  batch.obs.resize(b, sdim);
  batch.act.resize(b, adim);
  batch.obs_next.resize(b, sdim);
  batch.rew.resize(b);
  batch.done.resize(b);
  batch.is_demo.resize(b);
  batch.is_weights = sampled.is_weights;
  for (int i = 0; i < b; ++i) {
    const Transition& t = sampled.transitions[size_t(i)];
    batch.obs.row(i) = t.s.transpose();
    batch.act.row(i) = t.a.transpose();
    batch.obs_next.row(i) = t.s_next.transpose();
    batch.rew[i] = t.r;
    batch.done[i] = t.done ? 1 : 0;
    batch.is_demo[i] = t.is_demo ? 1 : 0;
  }
  if (config.lambda_n > 0) {
    batch.has_nstep = true;
    batch.return_n.resize(b);
    batch.done_n.resize(b);
    batch.discount_n.resize(b);
    batch.obs_n.resize(b, sdim);
    for (int i = 0; i < b; ++i) {
      const NStepView view =
          store.assemble_nstep(sampled.handles[size_t(i)], config.n_step, config.gamma);
      batch.return_n[i] = view.return_n;
      batch.done_n[i] = view.done_n ? 1 : 0;
      batch.obs_n.row(i) = view.bootstrap_obs.transpose();
      Scalar disc = 1;
      for (int k = 0; k < view.steps_used; ++k) disc *= config.gamma;
      batch.discount_n[i] = disc;
    }
  }
  batch.noise_bootstrap = rng.normal_matrix(b, adim);
  batch.noise_actor = rng.normal_matrix(b, adim);
  return batch;
}

}  // namespace

StepDiagnostics train_step(AgentNets& nets, ReplayStore& store, const SacConfig& config,
                           Rng& rng) {
  const SampledBatch sampled = store.sample_batch(config.batch_size, rng);
  const TrainBatch batch = make_train_batch(sampled, store, config, rng);

  nn::Gradients grads1, grads2;
  const CriticLossResult critic = critic_loss(batch, nets, config, &grads1, &grads2);
  nn::adam_step(nets.critic1, grads1, nets.critic1_opt);
  nn::adam_step(nets.critic2, grads2, nets.critic2_opt);

  nn::Gradients actor_grads;
  const ActorLossResult actor = actor_loss(batch, nets, config, &actor_grads);
  nn::adam_step(nets.actor.net, actor_grads, nets.actor_opt);

  if (config.alpha_auto)
    nets.log_alpha += config.lr * (actor.mean_log_prob + nets.target_entropy);

  nn::polyak_update(nets.target1, nets.critic1, config.tau);
  nn::polyak_update(nets.target2, nets.critic2, config.tau);

  store.update_priorities(sampled.handles, critic.td_errors, actor.per_sample);

  StepDiagnostics diag;
  diag.critic_loss = critic.loss;
  diag.actor_loss = actor.loss;
  diag.bc_loss = actor.bc_loss;
  diag.demo_batch_fraction = batch.is_demo.mean();
  diag.alpha = nets.alpha(config);
  diag.mean_q = actor.mean_q;
  if (!std::isfinite(diag.critic_loss) || !std::isfinite(diag.actor_loss)) {
    std::ostringstream msg;
    msg << "train_step: non-finite loss (critic=" << diag.critic_loss
        << ", actor=" << diag.actor_loss << ", mean_q=" << diag.mean_q
        << ", alpha=" << diag.alpha << ", batch_demo_fraction="
        << diag.demo_batch_fraction << ")";
    throw TrainingDiverged(msg.str());
  }
  return diag;
}

void pretrain(AgentNets& nets, ReplayStore& store, const SacConfig& config, Rng& rng) {
  if (config.pretrain_iters > 0 && store.size() == 0)
    throw ContractViolation("pretrain: replay store is empty");
  for (int i = 0; i < config.pretrain_iters; ++i) train_step(nets, store, config, rng);
}

void RunConfig::validate() const {
  env.validate();
  replay.validate();
  sac.validate();
  if (max_env_steps < 1) throw ContractViolation("RunConfig: max_env_steps must be >= 1");
  if (sac.pretrain_iters > 0 && expert.demo_count == 0 && sac.random_steps == 0)
    throw ContractViolation("RunConfig: pretraining needs demos or random interactions");
  if (expert.demo_count < 0)
    throw ContractViolation("RunConfig: demo_count must be >= 0");
}

namespace {

// Substream ids of the master seed; fixed so runs are reproducible.
enum StreamId : std::uint64_t {
  kStreamInit = 0,
  kStreamDemo = 1,
  kStreamEnvReset = 2,
  kStreamActionNoise = 3,
  kStreamTrain = 4,
  kStreamRandomPhase = 5,
  kStreamResetChoice = 6,
  kStreamMaintain = 7,
  kStreamEval = 8,
};

}  // namespace

MetricsLog run_training(const RunConfig& config, std::uint64_t seed) {
  config.validate();
  Rng init_rng = Rng::stream(seed, kStreamInit);
  Rng demo_rng = Rng::stream(seed, kStreamDemo);
  Rng env_rng = Rng::stream(seed, kStreamEnvReset);
  Rng action_rng = Rng::stream(seed, kStreamActionNoise);
  Rng train_rng = Rng::stream(seed, kStreamTrain);
  Rng random_rng = Rng::stream(seed, kStreamRandomPhase);
  Rng reset_rng = Rng::stream(seed, kStreamResetChoice);
  Rng maintain_rng = Rng::stream(seed, kStreamMaintain);

  const int obs_dim = observation_dim(config.env);
  const int act_dim = config.env.num_joints;
  AgentNets nets = AgentNets::create(obs_dim, act_dim, config.sac, init_rng);
  ReplayStore store(config.replay);

  MetricsLog log;
  const bool have_demos = config.expert.demo_count > 0;
  int relabel_window = config.sac.relabel_window_fallback;
  DemoSet demos;
  if (have_demos) {
    demos = generate_demos(config.expert.demo_count, config.env, config.expert, demo_rng);
    relabel_window = demos.mean_length;
    store.insert_demoset(demos.episodes, config.sac.bonus);
  }
  log.summary.demo_mean_length = relabel_window;

  long env_steps = 0, train_steps = 0, episode_index = 0, next_demo_id = 1'000'000;
  std::deque<int> window;
  Scalar window_sum = 0;
  StepDiagnostics last_diag;
  Scalar df_accum = 0, df_post_accum = 0;
  long df_count = 0, post_train_steps = 0;

  auto record_episode = [&](bool success, int length) {
    window.push_back(success ? 1 : 0);
    window_sum += success ? 1 : 0;
    if (window.size() > 100) {
      window_sum -= window.front();
      window.pop_front();
    }
    EpisodeRecord rec;
    rec.episode = episode_index;
    rec.env_steps = env_steps;
    rec.train_steps = train_steps;
    rec.success = success ? 1 : 0;
    rec.length = length;
    rec.rolling_success = window_sum / Scalar(window.size());
    rec.critic_loss = last_diag.critic_loss;
    rec.actor_loss = last_diag.actor_loss;
    rec.demo_batch_fraction = df_count > 0 ? df_accum / Scalar(df_count) : Scalar(0);
    log.episodes.push_back(rec);
    if (log.summary.episodes_to_90 < 0 && rec.rolling_success >= Scalar(0.9))
      log.summary.episodes_to_90 = episode_index;
    df_accum = 0;
    df_count = 0;
    ++episode_index;
  };

  // phase 1: random interactions (complete episodes, never relabeled)
  while (env_steps < config.sac.random_steps && env_steps < config.max_env_steps) {
    Episode episode;
    ReacherState state = reset(config.env, env_rng);
    for (;;) {
      Vector action(act_dim);
      for (int j = 0; j < act_dim; ++j) action[j] = random_rng.uniform(-1, 1);
      const Vector obs = observe(state);
      const StepResult sr = step(state, action, config.env);
      Transition t;
      t.s = obs;
      t.a = action;
      t.r = sr.reward;
      t.s_next = observe(sr.state);
      t.done = sr.done;
      t.episode_id = episode_index;
      t.step_idx = episode.length();
      episode.transitions.push_back(std::move(t));
      ++env_steps;
      state = sr.state;
      if (sr.done) {
        episode.success = sr.success;
        break;
      }
    }
    store.push_episode(episode);
    record_episode(episode.success, episode.length());
  }

  // phase 2: pretraining on the buffer only
  if (config.sac.pretrain_iters > 0) {
    if (store.size() == 0) throw ContractViolation("run_training: pretraining with empty buffer");
    for (int i = 0; i < config.sac.pretrain_iters; ++i) {
      last_diag = train_step(nets, store, config.sac, train_rng);
      ++train_steps;
    }
  }

  auto demo_source = [&]() -> std::optional<Episode> {
    return roll_expert_episode(config.env, config.expert, maintain_rng, next_demo_id++);
  };

  auto start_episode = [&]() -> ReacherState {
    if (have_demos && config.sac.reset_to_demo_prob > 0 &&
        reset_rng.uniform() < config.sac.reset_to_demo_prob) {
      const Episode& ep =
          demos.episodes[size_t(reset_rng.uniform_int(demos.episode_count()))];
      const Transition& t = ep.transitions[size_t(reset_rng.uniform_int(ep.length()))];
      return state_from_observation(config.env, t.s);
    }
    return reset(config.env, env_rng);
  };

  // phase 3: interleave training and collection
  if (env_steps < config.max_env_steps) {
    ReacherState state = start_episode();
    Episode current;
    while (env_steps < config.max_env_steps) {
      last_diag = train_step(nets, store, config.sac, train_rng);
      ++train_steps;
      ++post_train_steps;
      df_accum += last_diag.demo_batch_fraction;
      df_post_accum += last_diag.demo_batch_fraction;
      ++df_count;
      const int env_budget = config.sac.env_steps_per_train();
      for (int k = 0; k < env_budget && env_steps < config.max_env_steps; ++k) {
        const Vector obs = observe(state);
        const Matrix noise = action_rng.normal_matrix(1, act_dim);
        const nn::PolicySample ps =
            nn::policy_sample(nets.actor, obs.transpose(), noise);
        const Vector action = ps.action.row(0).transpose();
        const StepResult sr = step(state, action, config.env);
        Transition t;
        t.s = obs;
        t.a = action;
        t.r = sr.reward;
        t.s_next = observe(sr.state);
        t.done = sr.done;
        t.episode_id = episode_index;
        t.step_idx = current.length();
        current.transitions.push_back(std::move(t));
        ++env_steps;
        state = sr.state;
        if (sr.done) {
          current.success = sr.success;
          if (sr.success && config.sac.relabel_successes)
            store.push_episode(relabel_success(current, config.sac.bonus, relabel_window));
          else
            store.push_episode(current);
          if (have_demos) store.maintain_demo_ratio(demo_source, config.sac.bonus);
          record_episode(sr.success, current.length());
          current = Episode{};
          state = start_episode();
        }
      }
    }
  }

  log.summary.episodes = episode_index;
  log.summary.env_steps = env_steps;
  log.summary.train_steps = train_steps;
  log.summary.final_rolling =
      log.episodes.empty() ? Scalar(0) : log.episodes.back().rolling_success;
  log.summary.mean_demo_fraction =
      post_train_steps > 0 ? df_post_accum / Scalar(post_train_steps) : Scalar(0);
  return log;
}

Scalar evaluate_greedy(const AgentNets& nets, const EnvConfig& env, int episodes,
                       Rng& rng) {
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    ReacherState state = reset(env, rng);
    for (;;) {
      const Vector obs = observe(state);
      const Matrix head = nn::forward(nets.actor.net, obs.transpose());
      const Vector action =
          head.leftCols(nets.actor.action_dim).array().tanh().matrix().row(0).transpose();
      const StepResult sr = step(state, action, env);
      state = sr.state;
      if (sr.done) {
        successes += sr.success ? 1 : 0;
        break;
      }
    }
  }
  return Scalar(successes) / Scalar(episodes);
}

}  // namespace sacr2
