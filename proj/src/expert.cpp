#include "sacr2/expert.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace sacr2 {

long DemoSet::transition_count() const {
  long n = 0;
  for (const Episode& e : episodes) n += e.length();
  return n;
}

Vector expert_action(const ReacherState& state, const EnvConfig& env,
                     const ExpertConfig& expert, Rng& rng) {
  const Vector2 error = state.target_position - state.ee_position;
  const Matrix jac = arm_jacobian(state.joint_angles, env.link_lengths);
  Vector raw;
  if (error.norm() >= expert.dls_radius) {
    raw = expert.gain * (jac.transpose() * error);
  } else {
    // damped least squares: a plain transpose step orbits the target when the
    // arm is near its stretched singularity
    const Eigen::Matrix2d gram = jac * jac.transpose();
    const Scalar a11 = gram(0, 0) + expert.dls_damping;
    const Scalar a12 = gram(0, 1);
    const Scalar a22 = gram(1, 1) + expert.dls_damping;
    const Scalar det = a11 * a22 - a12 * a12;
    const Vector2 weighted{(a22 * error.x() - a12 * error.y()) / det,
                           (-a12 * error.x() + a11 * error.y()) / det};
    raw = expert.gain * (jac.transpose() * weighted);
  }
  Scalar jitter = expert.jitter;
  if (raw.norm() < Scalar(1e-3) * expert.gain * error.norm())
    jitter *= 25;  // escape singular poses
  Vector action = raw.cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
  for (int i = 0; i < action.size(); ++i)
    action[i] += rng.uniform(-jitter, jitter);
  return action.cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
}

std::optional<Episode> roll_expert_episode(const EnvConfig& env,
                                           const ExpertConfig& expert, Rng& rng,
                                           long episode_id) {
  Episode episode;
  ReacherState state = reset(env, rng);
  for (int t = 0; t < env.max_steps; ++t) {
    const Vector action = expert_action(state, env, expert, rng);
    const Vector obs = observe(state);
    StepResult result = step(state, action, env);
    Transition tr;
    tr.s = obs;
    tr.a = action;
    tr.r = result.reward;
    tr.s_next = observe(result.state);
    tr.done = result.done;
    tr.episode_id = episode_id;
    tr.step_idx = t;
    episode.transitions.push_back(std::move(tr));
    state = result.state;
    if (result.done) {
      episode.success = result.success;
      return episode.success ? std::optional<Episode>(std::move(episode)) : std::nullopt;
    }
  }
  return std::nullopt;
}

int demo_mean_length(const std::vector<Episode>& episodes) {
  if (episodes.empty()) throw ContractViolation("demo_mean_length: no episodes");
  Scalar total = 0;
  for (const Episode& e : episodes) total += e.length();
  return int(std::llround(total / Scalar(episodes.size())));
}

DemoSet generate_demos(int n_episodes, const EnvConfig& env, const ExpertConfig& expert,
                       Rng& rng) {
  if (n_episodes < 1) throw ContractViolation("generate_demos: n_episodes must be >= 1");
  DemoSet demos;
  demos.env_config_hash = env.hash();
  long attempts = 0;
  while (demos.episode_count() < n_episodes) {
    ++attempts;
    std::optional<Episode> episode =
        roll_expert_episode(env, expert, rng, demos.episode_count());
    if (episode) {
      demos.episodes.push_back(std::move(*episode));
    } else if (attempts >= 40 &&
               Scalar(attempts - demos.episode_count()) > Scalar(0.05) * Scalar(attempts)) {
      std::ostringstream msg;
      msg << "generate_demos: expert failure rate exceeded 5% (" << attempts
          << " attempts for " << demos.episode_count() << " successes); "
          << "environment or expert misconfigured";
      throw TrainingDiverged(msg.str());
    }
  }
  demos.mean_length = demo_mean_length(demos.episodes);
  return demos;
}

void save_demos(const DemoSet& demos, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_demos: cannot open " + path);
  out << "SACR2DEMO v1 " << demos.env_config_hash << ' ' << demos.episode_count() << ' '
      << demos.mean_length << '\n';
  for (const Episode& episode : demos.episodes) {
    for (const Transition& t : episode.transitions) {
      out << t.episode_id << ' ' << t.step_idx;
      for (long i = 0; i < t.s.size(); ++i) out << ' ' << format_double(t.s[i]);
      for (long i = 0; i < t.a.size(); ++i) out << ' ' << format_double(t.a[i]);
      out << ' ' << format_double(t.r);
      for (long i = 0; i < t.s_next.size(); ++i) out << ' ' << format_double(t.s_next[i]);
      out << ' ' << int(t.done) << '\n';
    }
  }
  if (!out) throw IoError("save_demos: write failed for " + path);
}

namespace {
DemoSet load_demos_impl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_demos: cannot open " + path);
  std::string magic, version;
  DemoSet demos;
  int n_episodes = 0;
  if (!(in >> magic >> version >> demos.env_config_hash >> n_episodes >>
        demos.mean_length))
    throw IoError("load_demos: malformed header in " + path);
  if (magic != "SACR2DEMO") throw IoError("load_demos: not a demo file: " + path);
  if (version != "v1") throw IoError("load_demos: unsupported version " + version);
  if (n_episodes < 1) throw IoError("load_demos: empty demo set");

  std::string line;
  std::getline(in, line);  // finish header line
  long expect_episode = -1;
  int obs_dim = -1, act_dim = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<Scalar> v;
    Scalar x;
    while (ls >> x) v.push_back(x);
    if (!ls.eof()) throw IoError("load_demos: non-numeric token in " + path);
    if (obs_dim < 0) {
      // record layout: id, step, s (3n+4), a (n), r, s' (3n+4), done
      const long joints = (long(v.size()) - 12) / 7;
      if (joints < 1 || 7 * joints + 12 != long(v.size()))
        throw IoError("load_demos: unrecognized record layout in " + path);
      obs_dim = int(3 * joints + 4);
      act_dim = int(joints);
    }
    if (long(v.size()) != 2 + 2 * obs_dim + act_dim + 2)
      throw IoError("load_demos: truncated record in " + path);

    Transition t;
    t.episode_id = long(v[0]);
    t.step_idx = int(v[1]);
    size_t k = 2;
    t.s = Eigen::Map<const Vector>(v.data() + k, obs_dim);
    k += size_t(obs_dim);
    t.a = Eigen::Map<const Vector>(v.data() + k, act_dim);
    k += size_t(act_dim);
    t.r = v[k++];
    t.s_next = Eigen::Map<const Vector>(v.data() + k, obs_dim);
    k += size_t(obs_dim);
    t.done = v[k] != 0;

    if (t.episode_id != expect_episode) {
      if (t.episode_id != expect_episode + 1 || t.step_idx != 0)
        throw IoError("load_demos: episode records out of order in " + path);
      demos.episodes.emplace_back();
      ++expect_episode;
    }
    Episode& ep = demos.episodes.back();
    if (t.step_idx != ep.length())
      throw IoError("load_demos: non-contiguous step indices in " + path);
    ep.transitions.push_back(std::move(t));
  }
  if (demos.episode_count() != n_episodes)
    throw IoError("load_demos: header declares " + std::to_string(n_episodes) +
                  " episodes, file holds " + std::to_string(demos.episode_count()));
  for (Episode& ep : demos.episodes) {
    const Transition& last = ep.transitions.back();
    if (!last.done || !(last.r > 0))
      throw IoError("load_demos: demo episode does not end in success");
    for (int i = 0; i + 1 < ep.length(); ++i)
      if (ep.transitions[size_t(i)].done)
        throw IoError("load_demos: done flag before episode end");
    ep.success = true;
  }
  if (demo_mean_length(demos.episodes) != demos.mean_length)
    throw IoError("load_demos: stored N does not match recomputed mean length");
  return demos;
}
}  // namespace

DemoSet load_demos(const std::string& path) { return load_demos_impl(path); }

DemoSet load_demos(const std::string& path, const std::string& expected_env_hash) {
  DemoSet demos = load_demos_impl(path);
  if (demos.env_config_hash != expected_env_hash)
    throw IoError("load_demos: demo file env hash " + demos.env_config_hash +
                  " does not match expected env hash " + expected_env_hash);
  return demos;
}

}  // namespace sacr2
