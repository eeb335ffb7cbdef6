#include "sacr2/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace sacr2 {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct KeyValue {
  std::string section, key, value;
};

std::vector<KeyValue> parse_ini(const std::string& text) {
  std::vector<KeyValue> out;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    out.push_back({section, trim(t.substr(0, eq)), trim(t.substr(eq + 1))});
  }
  return out;
}

Scalar to_scalar(const KeyValue& kv) {
  char* end = nullptr;
  const Scalar v = std::strtod(kv.value.c_str(), &end);
  if (end == kv.value.c_str() || *end != '\0')
    throw ConfigError("config key " + kv.section + "." + kv.key + ": bad number '" +
                      kv.value + "'");
  return v;
}

long to_long(const KeyValue& kv) {
  char* end = nullptr;
  const long v = std::strtol(kv.value.c_str(), &end, 10);
  if (end == kv.value.c_str() || *end != '\0')
    throw ConfigError("config key " + kv.section + "." + kv.key + ": bad integer '" +
                      kv.value + "'");
  return v;
}

bool to_bool(const KeyValue& kv) {
  if (kv.value == "true") return true;
  if (kv.value == "false") return false;
  throw ConfigError("config key " + kv.section + "." + kv.key +
                    ": expected true or false, got '" + kv.value + "'");
}

std::vector<Scalar> to_scalar_list(const KeyValue& kv) {
  std::vector<Scalar> out;
  std::istringstream in(kv.value);
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    out.push_back(std::strtod(tok.c_str(), &end));
    if (end == tok.c_str() || *end != '\0')
      throw ConfigError("config key " + kv.section + "." + kv.key + ": bad number '" +
                        tok + "'");
  }
  if (out.empty())
    throw ConfigError("config key " + kv.section + "." + kv.key + ": empty list");
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  for (const KeyValue& kv : parse_ini(text)) {
    const std::string id = kv.section + "." + kv.key;
    if (id == "experiment.preset") c.preset_name = kv.value;
    else if (id == "experiment.n_seeds") c.n_seeds = int(to_long(kv));
    else if (id == "experiment.base_seed") c.base_seed = std::uint64_t(to_long(kv));
    else if (id == "experiment.max_env_steps") c.run.max_env_steps = to_long(kv);
    else if (id == "experiment.output_dir") c.output_dir = kv.value;
    else if (id == "env.num_joints") c.run.env.num_joints = int(to_long(kv));
    else if (id == "env.link_lengths") c.run.env.link_lengths = to_scalar_list(kv);
    else if (id == "env.action_scale") c.run.env.action_scale = to_scalar(kv);
    else if (id == "env.reach_threshold") c.run.env.reach_threshold = to_scalar(kv);
    else if (id == "env.max_steps") c.run.env.max_steps = int(to_long(kv));
    else if (id == "env.sparse_reward") c.run.env.sparse_reward = to_scalar(kv);
    else if (id == "env.target_r_min") c.run.env.target_r_min = to_scalar(kv);
    else if (id == "env.target_r_max") c.run.env.target_r_max = to_scalar(kv);
    else if (id == "expert.gain") c.run.expert.gain = to_scalar(kv);
    else if (id == "expert.jitter") c.run.expert.jitter = to_scalar(kv);
    else if (id == "expert.dls_radius") c.run.expert.dls_radius = to_scalar(kv);
    else if (id == "expert.dls_damping") c.run.expert.dls_damping = to_scalar(kv);
    else if (id == "expert.demo_count") c.run.expert.demo_count = int(to_long(kv));
    else if (id == "replay.mode") {
      if (kv.value == "single") c.run.replay.mode = BufferMode::kSingle;
      else if (kv.value == "dual") c.run.replay.mode = BufferMode::kDual;
      else throw ConfigError("config key replay.mode: expected single or dual");
    } else if (id == "replay.per_mode") {
      if (kv.value == "standard") c.run.replay.per_mode = PerMode::kStandard;
      else if (kv.value == "modified") c.run.replay.per_mode = PerMode::kModified;
      else throw ConfigError("config key replay.per_mode: expected standard or modified");
    }
    else if (id == "replay.capacity") c.run.replay.capacity = to_long(kv);
    else if (id == "replay.demo_capacity") c.run.replay.demo_capacity = to_long(kv);
    else if (id == "replay.demo_fraction") c.run.replay.demo_fraction = to_scalar(kv);
    else if (id == "replay.target_demo_ratio") c.run.replay.target_demo_ratio = to_scalar(kv);
    else if (id == "replay.per_alpha") c.run.replay.per_alpha = to_scalar(kv);
    else if (id == "replay.per_beta") c.run.replay.per_beta = to_scalar(kv);
    else if (id == "replay.per_eps") c.run.replay.per_eps = to_scalar(kv);
    else if (id == "replay.per_eps_demo") c.run.replay.per_eps_demo = to_scalar(kv);
    else if (id == "replay.per_lambda_actor") c.run.replay.per_lambda_actor = to_scalar(kv);
    else if (id == "replay.use_is_weights") c.run.replay.use_is_weights = to_bool(kv);
    else if (id == "sac.gamma") c.run.sac.gamma = to_scalar(kv);
    else if (id == "sac.alpha") c.run.sac.alpha = to_scalar(kv);
    else if (id == "sac.alpha_auto") c.run.sac.alpha_auto = to_bool(kv);
    else if (id == "sac.tau") c.run.sac.tau = to_scalar(kv);
    else if (id == "sac.lr") c.run.sac.lr = to_scalar(kv);
    else if (id == "sac.batch_size") c.run.sac.batch_size = int(to_long(kv));
    else if (id == "sac.replay_ratio") c.run.sac.replay_ratio = int(to_long(kv));
    else if (id == "sac.n_step") c.run.sac.n_step = int(to_long(kv));
    else if (id == "sac.lambda_n") c.run.sac.lambda_n = to_scalar(kv);
    else if (id == "sac.lambda_bc") c.run.sac.lambda_bc = to_scalar(kv);
    else if (id == "sac.q_filter") c.run.sac.q_filter = to_bool(kv);
    else if (id == "sac.l2_actor") c.run.sac.l2_actor = to_scalar(kv);
    else if (id == "sac.l2_critic") c.run.sac.l2_critic = to_scalar(kv);
    else if (id == "sac.bonus") c.run.sac.bonus = to_scalar(kv);
    else if (id == "sac.pretrain_iters") c.run.sac.pretrain_iters = int(to_long(kv));
    else if (id == "sac.random_steps") c.run.sac.random_steps = int(to_long(kv));
    else if (id == "sac.reset_to_demo_prob") c.run.sac.reset_to_demo_prob = to_scalar(kv);
    else if (id == "sac.relabel_successes") c.run.sac.relabel_successes = to_bool(kv);
    else if (id == "sac.relabel_window_fallback")
      c.run.sac.relabel_window_fallback = int(to_long(kv));
    else if (id == "sac.hidden_units") c.run.sac.hidden_units = int(to_long(kv));
    else if (id == "sac.hidden_layers") c.run.sac.hidden_layers = int(to_long(kv));
    else throw ConfigError("config: unknown key '" + id + "'");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[experiment]\n";
  if (!c.preset_name.empty()) o << "preset = " << c.preset_name << '\n';
  o << "n_seeds = " << c.n_seeds << '\n'
    << "base_seed = " << c.base_seed << '\n'
    << "max_env_steps = " << c.run.max_env_steps << '\n'
    << "output_dir = " << c.output_dir << '\n';
  o << "\n[env]\n"
    << "num_joints = " << c.run.env.num_joints << '\n'
    << "link_lengths =";
  for (Scalar l : c.run.env.link_lengths) o << ' ' << format_double(l);
  o << '\n'
    << "action_scale = " << format_double(c.run.env.action_scale) << '\n'
    << "reach_threshold = " << format_double(c.run.env.reach_threshold) << '\n'
    << "max_steps = " << c.run.env.max_steps << '\n'
    << "sparse_reward = " << format_double(c.run.env.sparse_reward) << '\n'
    << "target_r_min = " << format_double(c.run.env.target_r_min) << '\n'
    << "target_r_max = " << format_double(c.run.env.target_r_max) << '\n';
  o << "\n[expert]\n"
    << "gain = " << format_double(c.run.expert.gain) << '\n'
    << "jitter = " << format_double(c.run.expert.jitter) << '\n'
    << "dls_radius = " << format_double(c.run.expert.dls_radius) << '\n'
    << "dls_damping = " << format_double(c.run.expert.dls_damping) << '\n'
    << "demo_count = " << c.run.expert.demo_count << '\n';
  o << "\n[replay]\n"
    << "mode = " << (c.run.replay.mode == BufferMode::kDual ? "dual" : "single") << '\n'
    << "per_mode = "
    << (c.run.replay.per_mode == PerMode::kModified ? "modified" : "standard") << '\n'
    << "capacity = " << c.run.replay.capacity << '\n'
    << "demo_capacity = " << c.run.replay.demo_capacity << '\n'
    << "demo_fraction = " << format_double(c.run.replay.demo_fraction) << '\n'
    << "target_demo_ratio = " << format_double(c.run.replay.target_demo_ratio) << '\n'
    << "per_alpha = " << format_double(c.run.replay.per_alpha) << '\n'
    << "per_beta = " << format_double(c.run.replay.per_beta) << '\n'
    << "per_eps = " << format_double(c.run.replay.per_eps) << '\n'
    << "per_eps_demo = " << format_double(c.run.replay.per_eps_demo) << '\n'
    << "per_lambda_actor = " << format_double(c.run.replay.per_lambda_actor) << '\n'
    << "use_is_weights = " << (c.run.replay.use_is_weights ? "true" : "false") << '\n';
  o << "\n[sac]\n"
    << "gamma = " << format_double(c.run.sac.gamma) << '\n'
    << "alpha = " << format_double(c.run.sac.alpha) << '\n'
    << "alpha_auto = " << (c.run.sac.alpha_auto ? "true" : "false") << '\n'
    << "tau = " << format_double(c.run.sac.tau) << '\n'
    << "lr = " << format_double(c.run.sac.lr) << '\n'
    << "batch_size = " << c.run.sac.batch_size << '\n'
    << "replay_ratio = " << c.run.sac.replay_ratio << '\n'
    << "n_step = " << c.run.sac.n_step << '\n'
    << "lambda_n = " << format_double(c.run.sac.lambda_n) << '\n'
    << "lambda_bc = " << format_double(c.run.sac.lambda_bc) << '\n'
    << "q_filter = " << (c.run.sac.q_filter ? "true" : "false") << '\n'
    << "l2_actor = " << format_double(c.run.sac.l2_actor) << '\n'
    << "l2_critic = " << format_double(c.run.sac.l2_critic) << '\n'
    << "bonus = " << format_double(c.run.sac.bonus) << '\n'
    << "pretrain_iters = " << c.run.sac.pretrain_iters << '\n'
    << "random_steps = " << c.run.sac.random_steps << '\n'
    << "reset_to_demo_prob = " << format_double(c.run.sac.reset_to_demo_prob) << '\n'
    << "relabel_successes = " << (c.run.sac.relabel_successes ? "true" : "false") << '\n'
    << "relabel_window_fallback = " << c.run.sac.relabel_window_fallback << '\n'
    << "hidden_units = " << c.run.sac.hidden_units << '\n'
    << "hidden_layers = " << c.run.sac.hidden_layers << '\n';
  return o.str();
}

namespace {

/// The demonstration baseline: 200 demos in a single PER buffer held at 10%,
/// 1000 random interactions, 3000 pretraining iterations, L2 regularization,
/// no bonus, no relabeling, no auxiliary losses.
ExperimentConfig baseline_sac_demo() {
  ExperimentConfig c;
  c.preset_name = "sac_demo";
  c.run.expert.demo_count = 200;
  c.run.replay.mode = BufferMode::kSingle;
  c.run.replay.per_mode = PerMode::kStandard;
  c.run.replay.target_demo_ratio = 0.10;
  c.run.sac.bonus = 0.0;
  c.run.sac.relabel_successes = false;
  c.run.sac.lambda_n = 0.0;
  c.run.sac.lambda_bc = 0.0;
  c.run.sac.q_filter = false;
  c.run.sac.pretrain_iters = 3000;
  c.run.sac.random_steps = 1000;
  c.run.sac.reset_to_demo_prob = 0.0;
  c.run.max_env_steps = 150'000;
  c.n_seeds = 4;
  c.output_dir = "runs/sac_demo";
  return c;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "sac_demo",       "sac_demo_nstep", "sac_demo_bc",  "sac_demo_star",
      "sacr2_b5",       "sacr2_b10",      "sacr2_norelabel_b5",
      "two_buffers",    "reset_demo",     "pretrain_heavy",
      "per_modified",   "sacr2_star",     "sac_plain",    "sacr2_nodemo"};
  return names;
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c = baseline_sac_demo();
  c.preset_name = name;
  c.output_dir = "runs/" + name;
  if (name == "sac_demo") {
  } else if (name == "sac_demo_nstep") {
    c.run.sac.lambda_n = 1.0;
    c.run.sac.n_step = 5;
  } else if (name == "sac_demo_bc") {
    c.run.sac.lambda_bc = 2.0;
  } else if (name == "sac_demo_star") {
    c.run.sac.lambda_n = 1.0;
    c.run.sac.n_step = 5;
    c.run.sac.lambda_bc = 2.0;
  } else if (name == "sacr2_b5") {
    c.run.sac.bonus = 5.0;
    c.run.sac.relabel_successes = true;
  } else if (name == "sacr2_b10") {
    c.run.sac.bonus = 10.0;
    c.run.sac.relabel_successes = true;
  } else if (name == "sacr2_norelabel_b5") {
    c.run.sac.bonus = 5.0;
    c.run.sac.relabel_successes = false;
  } else if (name == "two_buffers") {
    c.run.replay.mode = BufferMode::kDual;
    c.run.replay.demo_fraction = 0.10;
  } else if (name == "reset_demo") {
    c.run.sac.reset_to_demo_prob = 0.1;
  } else if (name == "pretrain_heavy") {
    c.run.sac.pretrain_iters = 10'000;
    c.run.expert.demo_count = 800;
  } else if (name == "per_modified") {
    c.run.replay.per_mode = PerMode::kModified;
  } else if (name == "sacr2_star") {
    c.run.sac.lambda_n = 1.0;
    c.run.sac.n_step = 5;
    c.run.sac.lambda_bc = 2.0;
    c.run.sac.bonus = 5.0;
    c.run.sac.relabel_successes = true;
  } else if (name == "sac_plain") {
    c.run.expert.demo_count = 0;
    c.run.sac.pretrain_iters = 0;
  } else if (name == "sacr2_nodemo") {
    c.run.expert.demo_count = 0;
    c.run.sac.pretrain_iters = 0;
    c.run.sac.bonus = 5.0;
    c.run.sac.relabel_successes = true;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

}  // namespace sacr2
